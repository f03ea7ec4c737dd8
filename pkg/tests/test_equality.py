from hypothesis import given, settings, strategies as st

from colf.checker import check_text
from colf.equality import (
    EQUAL, ERROR, UNEQUAL, Equation, EqualityChecker, equal_constants, equal_spines,
    equal_terms, match_renaming, rough_bound_log10,
)
from colf.syntax import Lam, PrepatArg

import oracles
from gen import (
    C, R, V, commutation_instance, corpus_signature, first_order_terms, rational_signature,
    term_variant,
)


def P(x):
    return PrepatArg(x)


def test_r1_r2_equal_via_memo():
    sig = corpus_signature("repeat_streams")
    m1 = Lam("x", R("r1", P("x")))
    m2 = Lam("x", R("r2", P("x")))
    res = equal_terms((), (), m1, m2, sig)
    assert res.verdict == EQUAL
    assert 1 <= res.max_delta <= 64


def test_w2_w3_equal():
    sig = corpus_signature("mixed_valid")
    res = equal_constants(sig, "w2", "w3")
    assert res.verdict == EQUAL and res.max_delta == 3


def test_closed_finitary_term_equal_without_memo():
    sig = corpus_signature("mixed_valid")
    m = C("cosucc", C("cosucc", C("cozero")))
    m2 = C("cosucc", C("cosucc", C("cozero")))
    res = equal_terms((), (), m, m2, sig)
    assert res.verdict == EQUAL and res.max_delta == 0


def test_s3_s1_unequal():
    sig = corpus_signature("mixed_valid")
    res = equal_constants(sig, "s3", "s1")
    assert res.verdict == UNEQUAL
    assert "zero" in res.reason and "succ" in res.reason


def test_s3_s4_equal():
    sig = corpus_signature("mixed_valid")
    assert equal_constants(sig, "s3", "s4").verdict == EQUAL


def test_spines():
    sig = corpus_signature("mixed_valid")
    assert equal_spines((), (), (), (), sig).verdict == EQUAL
    assert equal_spines((), ("x", "y"), (P("x"),), (P("y"),), sig).verdict == UNEQUAL
    same = (C("zero"), P("x"))
    assert equal_spines((), ("x",), same, same, sig).verdict == EQUAL


def test_match_identity_renaming():
    e = Equation(("x",), R("r1", P("x")), R("r2", P("x")))
    assert match_renaming(e, ("x",), R("r1", P("x")), R("r2", P("x"))) == {"x": "x"}


def test_match_non_injective_renaming():
    e = Equation(("y", "z"), V("y", P("z")), V("y", P("z")))
    assert match_renaming(e, ("x",), V("x", P("x")), V("x", P("x"))) == {"y": "x", "z": "x"}


def test_match_mismatched_heads():
    e = Equation((), R("r1"), R("r2"))
    assert match_renaming(e, (), R("r1"), R("r3")) is None


def test_match_respects_bound_variables():
    e = Equation(("y",), Lam("a", V("a")), V("y"))
    assert match_renaming(e, ("x",), Lam("b", V("b")), V("x")) == {"y": "x"}
    assert match_renaming(Equation(("y",), R("r", Lam("a", V("y"))), R("r")),
                          ("a",), R("r", Lam("a", V("a"))), R("r")) is None


def test_memo_cap_gives_error():
    sig = corpus_signature("mixed_valid")
    res = EqualityChecker(sig, memo_cap=1).equal_terms(R("w2"), R("w3"))
    assert res.verdict == ERROR


def test_rough_bound_is_finite():
    assert 0 < rough_bound_log10(corpus_signature("repeat_streams")) < 1000


def test_type_family_is_not_a_term():
    assert equal_constants(corpus_signature("mixed_valid"), "nat", "nat").verdict == ERROR


# Agreement with the bisimulation oracle on random rational signatures


@settings(max_examples=200, deadline=None)
@given(rational_signature(), st.data())
def test_agrees_with_bisimulation(case, data):
    text, names = case
    res = check_text(text)
    assert res.ok, res.failures()
    sig = res.signature
    a = data.draw(st.sampled_from(names))
    b = data.draw(st.sampled_from(names))
    got = equal_constants(sig, a, b)
    assert got.verdict in (EQUAL, UNEQUAL)
    assert got.equal == oracles.bisimilar(sig, R(a), R(b))


@settings(max_examples=100, deadline=None)
@given(rational_signature())
def test_copies_and_unfoldings_equal(case):
    text, names = case
    sig = check_text(text).signature
    for n in names:
        base = n.split("_")[0]
        assert equal_constants(sig, base, n).equal


SIG = corpus_signature("mixed_valid")


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["conat", "pstream", "padding"]).flatmap(
    lambda f: st.tuples(first_order_terms(SIG, f), first_order_terms(SIG, f))), st.data())
def test_equivalence_laws(pair, data):
    t, u = pair
    u2 = data.draw(term_variant(SIG, t))
    chk = EqualityChecker(SIG)
    assert chk.equal_terms(t, t).equal
    assert chk.equal_terms(t, u2).equal
    assert chk.equal_terms(t, u).verdict == chk.equal_terms(u, t).verdict
    if chk.equal_terms(t, u).equal:
        assert chk.equal_terms(u2, u).equal
    assert chk.equal_terms(t, u).equal == oracles.bisimilar(SIG, t, u)


@settings(max_examples=150, deadline=None)
@given(commutation_instance(), st.data())
def test_substitution_compatible_with_equality(inst, data):
    # N = N' and M = M' imply [N/x]M = [N'/x]M'
    from colf.subst import erase, hsubst

    sig, x, a, n, m = inst
    n2 = data.draw(term_variant(sig, n))
    m2 = data.draw(term_variant(sig, m))
    chk = EqualityChecker(sig)
    assert chk.equal_terms(n, n2).equal and chk.equal_terms(m, m2).equal
    tau = erase(a)
    assert chk.equal_terms(hsubst(n, x, tau, m), hsubst(n2, x, tau, m2)).equal
