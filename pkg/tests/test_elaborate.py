from hypothesis import given, settings

from colf import parser as ps
from colf.elaborate import abstract_implicits, elaborate_signature, free_capitals
from colf.syntax import Atomic, Constructor, Pi, PrepatArg, RecConst, has_metas, show
from colf.typecheck import check_signature

from conftest import CORPUS
from gen import elaboration_signature


def _abstract(src, constants=frozenset()):
    [d] = ps.parse_signature(src)
    return ps.show_decl(abstract_implicits(d, constants))


def _elab(src):
    return elaborate_signature(ps.parse_signature(src))


def test_single_capital_abstracted():
    assert _abstract("refl : subtp T T.") == "refl : {T : _} subtp T T."


def test_closed_declaration_unchanged():
    assert _abstract("cozero : conat.") == "cozero : conat."


def test_binders_in_order_of_first_occurrence():
    out = _abstract("plus_emp : empty T1 -> empty T2 -> empty (plus T1 T2).")
    assert out.startswith("plus_emp : {T1 : _} {T2 : _} empty T1")


def test_capital_constant_is_not_abstracted():
    assert _abstract("c : P -> X.", {"X"}) == "c : {P : _} P -> X."


def test_abstraction_idempotent():
    [d] = ps.parse_signature("trans : subtp T1 T2 -> subtp T2 T3 -> subtp T1 T3.")
    once = abstract_implicits(d)
    assert abstract_implicits(once) == once
    assert free_capitals(once.classifier) == []


def test_fully_explicit_declaration_is_identity():
    el = _elab("nat : type. zero : nat. succ : {x : nat} nat.")
    assert el.ok
    succ = el.signature.lookup("succ")
    assert isinstance(succ, Constructor)
    nat = Atomic("nat", ())
    assert succ.type == Pi("x", nat, nat)


HEADER = """nat : type. zero : nat. succ : nat -> nat.
pstream : cotype. padding : type.
cocons : nat -> padding -> pstream. next : pstream -> padding.
"""


def test_recursion_constant_binder_becomes_prepattern():
    el = _elab(HEADER + "r1 : nat -> pstream = [x] cocons x (next (r1 x)).")
    assert el.ok
    r1 = el.signature.lookup("r1")
    assert isinstance(r1.type, Pi) and r1.type.prepat
    inner = r1.body.body.spine[1].spine[0]
    assert inner.head == RecConst("r1") and inner.spine == (PrepatArg("x"),)


def test_non_variable_argument_to_recursion_constant_rejected():
    el = _elab(HEADER + "up : nat -> pstream = [x] cocons x (next (up (succ x))).")
    assert el.errors["up"].verdict == "prepattern-error"
    assert "succ" in el.errors["up"].message


def test_atomic_recdef_has_empty_telescope():
    el = _elab(HEADER + "s : pstream = cocons zero (next s).")
    assert el.ok and not isinstance(el.signature.lookup("s").type, Pi)


def test_implicit_arguments_inferred():
    el = _elab(HEADER + "eq : pstream -> pstream -> type. eq/refl : eq N N."
               " s : pstream = cocons zero (next s). t : eq s s = eq/refl.")
    assert el.ok
    assert show(el.signature.lookup("t").body) == "eq/refl s"


def test_unsolved_hole_in_classifier_generalized():
    el = _elab("a : type. b : a -> type. c : b _.")
    assert el.ok
    assert show(el.signature.lookup("c").type) == "{X : a} b X"


def test_unsolved_hole_in_body_reported():
    el = _elab("a : cotype. e : a -> a. g : a = e _.")
    assert el.errors["g"].verdict == "type-error"
    assert "explicit" in el.errors["g"].message


def test_unknown_constant_reported():
    el = _elab("a : type. c : d.")
    assert "d" in el.errors["c"].message


def test_eqw2w3_elaborates_with_rigid_equality():
    el = elaborate_signature(ps.parse_signature((CORPUS / "mixed_valid.colf").read_text()))
    assert el.ok
    assert show(el.signature.lookup("eqw2w3").body) in ("eq/refl w2", "eq/refl w3")


def test_flip_recorded_for_higher_order_binder():
    el = elaborate_signature(ps.parse_signature((CORPUS / "meta_encoding.colf").read_text()))
    assert el.ok
    assert el.flips


@settings(max_examples=150, deadline=None)
@given(elaboration_signature())
def test_elaborated_output_rechecks(text):
    el = elaborate_signature(ps.parse_signature(text))
    kept = [d for d in el.signature if not has_metas(d)]
    assert len(kept) == len(el.signature)
    kern = check_signature(el.signature)
    for r in kern.reports:
        assert r.verdict in ("ok", "guardedness-error"), (r, text)
