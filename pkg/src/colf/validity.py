"""Side conditions on recursive definitions.

* ``A prepat``: a recursive definition's type is a telescope of prepattern
  binders ending in an atomic type.
* ``M contra``: the body's head, under its abstractions, is not a recursion
  constant.
* guardedness: every path from a recursion constant back to itself passes a
  coinductive constructor whose type family has the highest priority among the
  constructors on that path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .syntax import (
    Atomic, Const, Lam, Neutral, Pi, PrepatArg, RecConst, RecDef, Signature,
    SignatureError, Var,
)


class ValidityError(Exception):
    pass


class PrepatternError(ValidityError):
    """A recursion constant applied to something other than variables."""


class GuardednessError(ValidityError):
    """A cycle through a recursion constant without a valid trace."""

    def __init__(self, message: str, trace: tuple = (), cycle: tuple = ()):
        super().__init__(message)
        self.trace = trace
        self.cycle = cycle


class NotContractive(GuardednessError):
    pass


def is_prepattern_type(a) -> bool:
    while isinstance(a, Pi):
        if not a.prepat:
            return False
        a = a.cod
    return isinstance(a, Atomic)


def is_prepattern_spine(spine) -> bool:
    return all(isinstance(e, PrepatArg) for e in spine)


def strip_lams(m):
    while isinstance(m, Lam):
        m = m.body
    return m


def is_contractive(m) -> bool:
    r = strip_lams(m)
    return not (isinstance(r, Neutral) and isinstance(r.head, RecConst))


def valid_trace(constructors, sig: Signature) -> bool:
    """True iff the highest-priority constructor in the set is coinductive."""
    best: Optional[str] = None
    best_rank = -1
    for c in constructors:
        rank = sig.constructor_priority(c)
        if rank > best_rank:
            best, best_rank = c, rank
    return best is not None and sig.is_coinductive(best)


@dataclass
class GuardReport:
    ok: bool
    message: str = ""
    trace: tuple = ()
    cycle: tuple = ()
    explored: set = field(default_factory=set)


class _Guard:
    def __init__(self, sig: Signature, r: str):
        self.sig = sig
        self.r = r
        self.memo: dict = {}

    def term(self, m, q: frozenset, c: frozenset, path: tuple, cycle: tuple) -> None:
        while isinstance(m, Lam):
            m = m.body
        if not isinstance(m, Neutral):
            raise TypeError(f"not a term: {m!r}")
        head, spine = m.head, m.spine
        match head:
            case Const(name):
                self.spine(spine, q, c | {name}, path + (name,), cycle)
            case Var():
                self.spine(spine, q, c, path, cycle)
            case RecConst(name) if name == self.r:
                if not valid_trace(c, self.sig):
                    self.violation(path, cycle + (name,))
            case RecConst(name) if name in q:
                pass
            case RecConst(name):
                if not is_prepattern_spine(spine):
                    raise PrepatternError(
                        f"recursion constant {name} applied to a non-variable argument")
                key = (name, q, c)
                if key in self.memo:
                    return
                try:
                    d = self.sig.definition(name)
                except SignatureError as e:
                    raise ValidityError(str(e)) from None
                self.memo[key] = True
                self.term(d.body, q | {name}, c, path, cycle + (name,))
            case _:
                self.spine(spine, q, c, path, cycle)

    def spine(self, spine, q, c, path, cycle):
        for e in spine:
            if not isinstance(e, PrepatArg):
                self.term(e, q, c, path, cycle)

    def violation(self, path, cycle):
        shown = ", ".join(path) if path else "no constructor"
        kinds = []
        for name in dict.fromkeys(path):
            fam = self.sig.family_of(name)
            kinds.append(f"{fam}:{'cotype' if self.sig.is_coinductive(fam) else 'type'}")
        detail = f" (families {', '.join(kinds)})" if kinds else ""
        raise GuardednessError(
            f"{self.r} is not guarded: cycle {' -> '.join((self.r,) + cycle)} "
            f"passes [{shown}]{detail}; the highest-priority constructor "
            f"on a cycle must be coinductive",
            tuple(path), (self.r,) + tuple(cycle))


def check_guarded(sig: Signature, r: str, m=None) -> GuardReport:
    """Check every occurrence of ``r`` reachable from ``m`` (default: r's body)."""
    if m is None:
        m = sig.definition(r).body
    g = _Guard(sig, r)
    try:
        g.term(m, frozenset(), frozenset(), (), ())
    except GuardednessError as e:
        return GuardReport(False, str(e), e.trace, e.cycle)
    return GuardReport(True, explored={k[0] for k in g.memo})


def check_recdef(sig: Signature, d: RecDef) -> None:
    """All side conditions on a recursive definition; raises on failure."""
    if not is_prepattern_type(d.type):
        raise PrepatternError(f"type of {d.name} is not a prepattern telescope")
    if not is_contractive(d.body):
        raise NotContractive(f"body of {d.name} is not contractive: its head is a recursion constant")
    rep = check_guarded(sig, d.name, d.body)
    if not rep.ok:
        raise GuardednessError(rep.message, rep.trace, rep.cycle)
