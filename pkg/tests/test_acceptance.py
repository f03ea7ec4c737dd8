"""Acceptance criteria, one test per criterion.

Each test records a pass/fail line in ``conftest.ACCEPTANCE``; the lines are
printed in the terminal summary of every pytest run.
"""

import io
import random
import time

from hypothesis import given, settings, strategies as st

from colf import parser as ps
from colf.checker import check_file, check_text
from colf.cli import run
from colf.elaborate import elaborate_signature
from colf.equality import EQUAL, equal_constants
from colf.expansion import approx_equal, approx_subst, expand, truncate
from colf.subst import STAR, erase, hsubst
from colf.syntax import PrepatArg, eta_expand, has_metas, Const, RecConst, RecDef, TypeFamily
from colf.typecheck import Kernel, check_signature

import oracles
from conftest import ACCEPTANCE, CORPUS
from gen import (
    commutation_instance, corpus_signature, elaboration_signature, first_order_terms,
    term_variant, typed_instance,
)

MAX_DELTA = 64
DEPTHS = range(21)


def record(label, ok, detail=""):
    ACCEPTANCE[label] = (bool(ok), detail)
    assert ok, f"{label}: {detail}"


def run_property(label, test, counts, required, what):
    """Run a hypothesis test; pass iff it holds on at least ``required`` cases."""
    try:
        test()
    except Exception as e:
        ACCEPTANCE[label] = (False, f"{counts['n']} {what}; falsified: {type(e).__name__}")
        raise
    record(label, counts["n"] >= required, f"{counts['n']} {what} (required {required})")


def _cli(*argv):
    out = io.StringIO()
    return run(list(argv), out), out.getvalue()


# --------------------------------------------------------------------------


def test_1_mixed_corpus():
    text = (CORPUS / "mixed.colf").read_text()
    check_text(text)  # warm caches shared with other files out of the timing
    t0 = time.perf_counter()
    res = check_text(text)
    elapsed = time.perf_counter() - t0
    rejected = {r.name for r in res.failures()}
    diagnostics = all("guarded" in res.report(n).message for n in rejected)
    verdicts = {res.report(n).verdict for n in rejected}
    ok = (rejected == {"w1", "p2", "p6", "p7"} and verdicts == {"guardedness-error"}
          and diagnostics and elapsed < 1.0)
    record("1: mixed corpus verdicts", ok,
           f"rejected={sorted(rejected)} in {elapsed:.3f}s (limit 1s)")


EQ_FILES = {
    "eqw2w3": "mixed_valid",
    "eqr1r2": "repeat_streams",
    "eqfix": "meta_encoding",
    "eqr": "meta_encoding",
    "eqproof": "classical_subtyping_eq",
}
EQ_PAIRS = [
    ("mixed_valid", "w2", "w3"),
    ("repeat_streams", "r1", "r2"),
    ("meta_encoding", "fix", "fix2"),
    ("meta_encoding", "r", "r'"),
    ("classical_subtyping_eq", "s_sub_t", "s_sub_t2"),
]


def test_2_equality_examples():
    details = []
    ok = True
    for name, stem in EQ_FILES.items():
        res = check_file(CORPUS / f"{stem}.colf")
        good = res.report(name).ok and res.max_delta <= MAX_DELTA
        ok &= good
        details.append(f"{name}:{res.report(name).verdict}")
    worst = 0
    for stem, a, b in EQ_PAIRS:
        r = equal_constants(corpus_signature(stem), a, b)
        ok &= r.verdict == EQUAL and r.max_delta <= MAX_DELTA
        worst = max(worst, r.max_delta)
    record("2: equality examples", ok,
           f"{', '.join(details)}; max |delta| = {worst} (limit {MAX_DELTA})")


CASE_STUDIES = {
    "classical_subtyping": ["s", "t", "s_sub_t"],
    "polarized": ["il_sub_rl", "eg_s_sub_t"],
    "meta_encoding": ["fix", "eqfix", "eqr"],
    "bisimulation": ["omega", "ev_omega", "od_omega", "isconat_omega", "bisim_ev_s"],
}


def test_3_case_studies():
    codes = {}
    present = True
    for stem, names in CASE_STUDIES.items():
        path = CORPUS / f"{stem}.colf"
        codes[stem] = _cli("check", str(path))[0]
        verdicts = check_file(path).verdicts()
        present &= all(verdicts.get(n) == "ok" for n in names)
    ok = present and set(codes.values()) == {0}
    record("3: case studies exit 0", ok, ", ".join(f"{k}={v}" for k, v in codes.items()))


def _agree_at_all_depths(sig, m1, m2) -> bool:
    for k in DEPTHS:
        if not approx_equal(expand(sig, m1, k), expand(sig, m2, k)):
            return False
    return True


def _spine_agrees(sig, s1, s2) -> bool:
    for a, b in zip(s1, s2):
        if isinstance(a, PrepatArg) or isinstance(b, PrepatArg):
            if a != b:
                return False
        elif not _agree_at_all_depths(sig, a, b):
            return False
    return len(s1) == len(s2)


def _term_of(sig, d):
    head = RecConst(d.name) if isinstance(d, RecDef) else Const(d.name)
    return eta_expand(head, d.type)


def test_4_oracle_soundness_sweep():
    checked = 0
    discrepancies = []
    for path in sorted(CORPUS.glob("*.colf")):
        res = check_file(path, record=True)
        sig = res.signature
        for q in res.kernel.queries:
            if q.result.verdict == EQUAL:
                checked += 1
                if not _spine_agrees(sig, q.lhs, q.rhs):
                    discrepancies.append((path.stem, q))
        # every pair of same-typed accepted constants reported equal
        ok_names = {r.name for r in res.reports if r.ok}
        decls = [d for d in sig if d.name in ok_names and not isinstance(d, TypeFamily)]
        for i, d1 in enumerate(decls):
            for d2 in decls[i + 1:]:
                if d1.type != d2.type or not isinstance(d1, RecDef):
                    continue
                if equal_constants(sig, d1.name, d2.name).verdict == EQUAL:
                    checked += 1
                    if not _agree_at_all_depths(sig, _term_of(sig, d1), _term_of(sig, d2)):
                        discrepancies.append((path.stem, d1.name, d2.name))
    for stem, a, b in EQ_PAIRS:
        sig = corpus_signature(stem)
        checked += 1
        if not _agree_at_all_depths(sig, _term_of(sig, sig.lookup(a)), _term_of(sig, sig.lookup(b))):
            discrepancies.append((stem, a, b))
    record("4: oracle soundness sweep", not discrepancies and checked > 0,
           f"{checked} equal pairs, k=0..20, {len(discrepancies)} discrepancies")


def test_5_mutations():
    details = []
    ok = True
    for stem in ("mutation_pstream_type", "mutation_priority_swap"):
        res = check_file(CORPUS / f"{stem}.colf")
        flipped = all(res.report(n).verdict == "guardedness-error" for n in ("s1", "s3", "s4"))
        ok &= flipped
        details.append(f"{stem}: s1/s3/s4 {'rejected' if flipped else 'NOT rejected'}")
    record("5: mutation suite", ok, "; ".join(details))


# --------------------------------------------------------------------------
# Property suites

SIG = corpus_signature("mixed_valid")
FAMILIES = ["conat", "pstream", "padding", "nat"]


def test_6a_equality_is_an_equivalence():
    counts = {"n": 0}

    @settings(max_examples=1000, deadline=None, derandomize=True)
    @given(st.sampled_from(FAMILIES).flatmap(
        lambda f: st.tuples(first_order_terms(SIG, f), first_order_terms(SIG, f))), st.data())
    def prop(pair, data):
        t, u = pair
        v = data.draw(st.one_of(term_variant(SIG, u), term_variant(SIG, t)))
        chk = Kernel(SIG).eq
        tu = chk.equal_terms(t, u).verdict
        assert chk.equal_terms(t, t).verdict == EQUAL
        assert tu == chk.equal_terms(u, t).verdict
        assert tu != "error"
        if tu == EQUAL and chk.equal_terms(u, v).verdict == EQUAL:
            assert chk.equal_terms(t, v).verdict == EQUAL
        assert (tu == EQUAL) == oracles.bisimilar(SIG, t, u)
        counts["n"] += 1

    run_property("6a: equality reflexive/symmetric/transitive", prop, counts, 1000,
                 "generated term pairs, verdicts also match the bisimulation oracle")


def test_6b_substitution_respects_typing():
    counts = {"n": 0}

    @settings(max_examples=200, deadline=None, derandomize=True)
    @given(typed_instance())
    def prop(inst):
        sig, ctx, x, a, n, m, b = inst
        k = Kernel(sig)
        k.check_term(ctx.extend(x, a), m, b)
        k.check_term(ctx, n, a)
        tau = erase(a)
        k.check_term(ctx, hsubst(n, x, tau, m), hsubst(n, x, tau, b))
        counts["n"] += 1

    run_property("6b: substitution respects typing", prop, counts, 200, "well-typed instances")


def test_6c_expansion_commutes_with_substitution():
    counts = {"n": 0}

    @settings(max_examples=200, deadline=None, derandomize=True)
    @given(commutation_instance())
    def prop(inst):
        sig, x, a, n, m = inst
        tau = erase(a)
        for k in range(11):
            lhs = expand(sig, hsubst(n, x, tau, m), k)
            rhs = truncate(approx_subst(expand(sig, n, k), x, expand(sig, m, k)), k)
            assert approx_equal(lhs, rhs, compatible=tau != STAR)
        counts["n"] += 1

    run_property("6c: expansion/substitution commutation", prop, counts, 200,
                 "instances at k=0..10")


_ALPHABET = [b"a", b"b", b"nat", b"X", b"_", b":", b".", b"=", b"(", b")", b"{", b"}",
             b"[", b"]", b"->", b"type", b"cotype", b"%", b"\n", b" ", b"-", b">", b"\xff"]


def _fuzz_input(rng):
    if rng.random() < 0.5:
        return bytes(rng.randrange(256) for _ in range(rng.randrange(48)))
    return b"".join(rng.choice(_ALPHABET) for _ in range(rng.randrange(40)))


def test_6d_parser_fuzz():
    rng = random.Random(20261019)
    crashes = []
    n = 100_000
    for i in range(n):
        data = _fuzz_input(rng)
        try:
            ps.parse_signature_recovering(data)
            try:
                ps.parse_signature(data)
            except ps.ParseError:
                pass
        except Exception as e:  # any other exception is a crash
            crashes.append((data, repr(e)))
    # the whole pipeline on a sample of structured inputs
    pipeline = 0
    for i in range(3000):
        data = b"".join(rng.choice(_ALPHABET[:-1]) for _ in range(rng.randrange(60)))
        try:
            check_text(data)
            pipeline += 1
        except Exception as e:
            crashes.append((data, repr(e)))
    record("6d: parser fuzz", not crashes,
           f"{n} byte inputs + {pipeline} pipeline runs, {len(crashes)} crashes")


def test_6e_elaborated_output_rechecks():
    problems = []
    for path in sorted(CORPUS.glob("*.colf")):
        el = elaborate_signature(ps.parse_signature(path.read_text()))
        if any(has_metas(d) for d in el.signature):
            problems.append(f"{path.stem}: metavariables left")
        kern = check_signature(el.signature)
        expected = dict(
            line.split("\t") for line in path.with_suffix(".expect").read_text().splitlines())
        for r in kern.reports:
            if r.verdict != expected[r.name]:
                problems.append(f"{path.stem}:{r.name}")
    counts = {"n": 0, "accepted": 0}

    @settings(max_examples=200, deadline=None, derandomize=True)
    @given(elaboration_signature())
    def prop(text):
        el = elaborate_signature(ps.parse_signature(text))
        assert not any(has_metas(d) for d in el.signature)
        for r in check_signature(el.signature).reports:
            assert r.verdict in ("ok", "guardedness-error"), (text, r)
            counts["accepted"] += r.ok
        counts["n"] += 1

    try:
        prop()
    except Exception as e:
        problems.append(f"random: {type(e).__name__}")
    record("6e: elaborated output re-checks", not problems,
           f"{len(list(CORPUS.glob('*.colf')))} corpus files + {counts['n']} random signatures "
           f"({counts['accepted']} declarations re-accepted); problems: {problems or 'none'}")


def test_7_decidability_smoke():
    slow = []
    worst = 0.0
    for path in sorted(CORPUS.glob("*.colf")):
        t0 = time.perf_counter()
        res = check_file(path)
        dt = time.perf_counter() - t0
        worst = max(worst, dt)
        if dt >= 5.0 or res.cap_hit:
            slow.append(path.stem)
    record("7: decidability smoke test", not slow,
           f"slowest file {worst:.3f}s (limit 5s), memo cap never reached"
           if not slow else f"failed: {slow}")
