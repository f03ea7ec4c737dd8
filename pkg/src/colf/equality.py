"""Equality of higher-order rational terms.

The algorithm compares two terms structurally, unfolding recursion constants
on demand.  Before unfolding, the current goal is recorded as an assumption;
a later goal that is a variable renaming of a recorded one holds by that
assumption.  Since unfolding a recursion constant applied to variables only
renames its definition, a finite set of goals can arise modulo renaming and
the search terminates.

Assumptions are local to the branch of the derivation that introduced them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .subst import SubstError, erase, reduce_spine, rename
from .syntax import (
    Const, Lam, Meta, Neutral, Pi, PrepatArg, RecConst, RecDef, Signature,
    SignatureError, Var, free_vars, show,
)
from .validity import is_contractive, is_prepattern_spine

DEFAULT_MEMO_CAP = 10000

EQUAL = "equal"
UNEQUAL = "unequal"
ERROR = "error"


class EqualityError(Exception):
    """The inputs are outside the domain of the algorithm."""


class MemoCapExceeded(EqualityError):
    pass


class _Unequal(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class Equation:
    """Assumption ``theta |- lhs = rhs``; ``theta`` lists the free variables."""

    theta: tuple
    lhs: Neutral
    rhs: Neutral

    def __str__(self):
        return f"<{', '.join(self.theta)} |- {show(self.lhs)} = {show(self.rhs)}>"


class _Delta:
    """Persistent list of equations (shared tails, cheap to extend)."""

    __slots__ = ("eq", "parent", "size")

    def __init__(self, eq: Optional[Equation] = None, parent: Optional["_Delta"] = None):
        self.eq = eq
        self.parent = parent
        self.size = 0 if parent is None else parent.size + 1

    def push(self, eq: Equation) -> "_Delta":
        return _Delta(eq, self)

    def __iter__(self):
        node = self
        while node is not None and node.eq is not None:
            yield node.eq
            node = node.parent

    def __len__(self):
        return self.size


EMPTY_DELTA = _Delta()


def make_delta(equations=()) -> _Delta:
    d = EMPTY_DELTA
    for e in equations:
        d = d.push(e)
    return d


@dataclass
class EqResult:
    verdict: str
    reason: str = ""
    max_delta: int = 0
    unfolds: int = 0

    @property
    def equal(self) -> bool:
        return self.verdict == EQUAL

    def __bool__(self):
        return self.equal


# --------------------------------------------------------------------------
# Rule (1): matching a goal against an assumption up to renaming


def match_renaming(eq: Equation, theta, lhs, rhs) -> Optional[dict]:
    """Renaming sigma from eq.theta into theta with <sigma>eq = goal, or None.

    Bound variables are compared up to alpha-equivalence; several variables of
    eq.theta may be sent to the same target.
    """
    sigma: dict = {}
    dom = set(eq.theta)
    cod = set(theta)
    try:
        _match(eq.lhs, lhs, sigma, dom, cod, {}, {})
        _match(eq.rhs, rhs, sigma, dom, cod, {}, {})
    except _NoMatch:
        return None
    return sigma


class _NoMatch(Exception):
    pass


def _match_var(x, y, sigma, dom, cod, bp, bt):
    if x in bp or y in bt:
        if bp.get(x) != bt.get(y) or x not in bp or y not in bt:
            raise _NoMatch
        return
    if x in dom:
        if y not in cod:
            raise _NoMatch
        if sigma.setdefault(x, y) != y:
            raise _NoMatch
    elif x != y:
        raise _NoMatch


def _match(p, t, sigma, dom, cod, bp, bt):
    # bp/bt: bound variable -> binder depth, for pattern and target
    match p, t:
        case Lam(x, m), Lam(y, n):
            d = len(bp)
            _match(m, n, sigma, dom, cod, {**bp, x: d}, {**bt, y: d})
        case Neutral(h1, s1), Neutral(h2, s2):
            if len(s1) != len(s2):
                raise _NoMatch
            if isinstance(h1, Var) and isinstance(h2, Var):
                _match_var(h1.name, h2.name, sigma, dom, cod, bp, bt)
            elif h1 != h2:
                raise _NoMatch
            for a, b in zip(s1, s2):
                _match(a, b, sigma, dom, cod, bp, bt)
        case PrepatArg(x), PrepatArg(y):
            _match_var(x, y, sigma, dom, cod, bp, bt)
        case _:
            raise _NoMatch


# --------------------------------------------------------------------------
# The checker


class EqualityChecker:
    """Decides term and spine equality over a fixed signature."""

    def __init__(self, sig: Signature, memo_cap: int = DEFAULT_MEMO_CAP):
        self.sig = sig
        self.memo_cap = memo_cap
        self.max_delta = 0
        self.unfolds = 0
        self._unfold_cache: dict = {}
        self._counter = 0

    # public entry points ---------------------------------------------

    def equal_terms(self, m1, m2, theta=(), delta=EMPTY_DELTA) -> EqResult:
        return self._run(lambda: self.terms(delta, tuple(theta), m1, m2))

    def equal_spines(self, s1, s2, theta=(), delta=EMPTY_DELTA) -> EqResult:
        return self._run(lambda: self.spines(delta, tuple(theta), tuple(s1), tuple(s2)))

    def _run(self, thunk) -> EqResult:
        self.max_delta = 0
        self.unfolds = 0
        try:
            thunk()
        except _Unequal as e:
            return EqResult(UNEQUAL, e.reason, self.max_delta, self.unfolds)
        except (EqualityError, SubstError) as e:
            return EqResult(ERROR, str(e), self.max_delta, self.unfolds)
        return EqResult(EQUAL, "", self.max_delta, self.unfolds)

    # judgments -------------------------------------------------------

    def terms(self, delta: _Delta, theta: tuple, m1, m2) -> None:
        if m1 is m2:
            return
        match m1, m2:
            case Lam(x, b1), Lam(y, b2):
                z = x if x == y and x not in theta else self._fresh(theta, x)
                self.terms(delta, theta + (z,), rename(z, x, b1), rename(z, y, b2))
            case Neutral(), Neutral():
                self.neutral(delta, theta, m1, m2)
            case _:
                raise _Unequal(f"{show(m1)} and {show(m2)} differ in shape")

    def neutral(self, delta, theta, r1: Neutral, r2: Neutral) -> None:
        h1, h2 = r1.head, r2.head
        if isinstance(h1, Meta) or isinstance(h2, Meta):
            raise EqualityError("cannot compare terms with unsolved metavariables")
        left_rec = isinstance(h1, RecConst)
        right_rec = isinstance(h2, RecConst)
        if left_rec or right_rec:
            # rule (1)
            for eq in delta:
                if match_renaming(eq, theta, r1, r2) is not None:
                    return
            goal = Equation(tuple(sorted(free_vars((r1, r2)))), r1, r2)
            if left_rec:
                # rule (2)
                delta2 = self._push(delta, goal)
                self.terms(delta2, theta, self.unfold(h1.name, r1.spine), r2)
            else:
                # rule (3): only when the left head is not a recursion constant
                delta2 = self._push(delta, goal)
                self.terms(delta2, theta, r1, self.unfold(h2.name, r2.spine))
            return
        # rules (4) and (5)
        if h1 != h2:
            raise _Unequal(f"heads {show(Neutral(h1))} and {show(Neutral(h2))} differ")
        self.spines(delta, theta, r1.spine, r2.spine)

    def spines(self, delta, theta, s1: tuple, s2: tuple) -> None:
        if len(s1) != len(s2):
            raise _Unequal("spines of different length")
        for a, b in zip(s1, s2):
            if isinstance(a, PrepatArg) or isinstance(b, PrepatArg):
                if a != b:
                    raise _Unequal(f"prepattern arguments {show(a)} and {show(b)} differ")
                continue
            self.terms(delta, theta, a, b)

    # helpers ---------------------------------------------------------

    def _push(self, delta: _Delta, eq: Equation) -> _Delta:
        if len(delta) >= self.memo_cap:
            raise MemoCapExceeded(
                f"equality assumptions exceeded the cap of {self.memo_cap}")
        d = delta.push(eq)
        self.max_delta = max(self.max_delta, len(d))
        return d

    def unfold(self, r: str, spine: tuple):
        key = (r, spine)
        hit = self._unfold_cache.get(key)
        if hit is not None:
            self.unfolds += 1
            return hit
        try:
            d = self.sig.definition(r)
        except SignatureError as e:
            raise EqualityError(str(e)) from None
        if not is_prepattern_spine(spine):
            raise EqualityError(f"recursion constant {r} applied to a non-variable argument")
        if not is_contractive(d.body):
            raise EqualityError(f"definition of {r} is not contractive")
        out = reduce_spine(spine, erase(d.type), d.body)
        self._unfold_cache[key] = out
        self.unfolds += 1
        return out

    def _fresh(self, theta, base: str) -> str:
        base = base.split("@", 1)[0]
        used = set(theta)
        while True:
            self._counter += 1
            z = f"{base}@{self._counter}"
            if z not in used:
                return z


def equal_terms(delta, theta, m1, m2, sig: Signature, memo_cap: int = DEFAULT_MEMO_CAP) -> EqResult:
    """Decide ``delta; theta |- m1 = m2`` (delta: iterable of Equation)."""
    return EqualityChecker(sig, memo_cap).equal_terms(m1, m2, theta, make_delta(delta))


def equal_spines(delta, theta, s1, s2, sig: Signature, memo_cap: int = DEFAULT_MEMO_CAP) -> EqResult:
    return EqualityChecker(sig, memo_cap).equal_spines(s1, s2, theta, make_delta(delta))


def equal_constants(sig: Signature, c1: str, c2: str, memo_cap: int = DEFAULT_MEMO_CAP) -> EqResult:
    """Compare two declared names as eta-long closed terms."""
    from .syntax import eta_expand

    def term_of(name):
        d = sig.lookup(name)
        if isinstance(d, RecDef):
            return eta_expand(RecConst(name), d.type)
        if hasattr(d, "type"):
            return eta_expand(Const(name), d.type)
        raise EqualityError(f"{name} is a type family, not a term")

    try:
        m1, m2 = term_of(c1), term_of(c2)
    except (SignatureError, EqualityError) as e:
        return EqResult(ERROR, str(e))
    return EqualityChecker(sig, memo_cap).equal_terms(m1, m2)


# --------------------------------------------------------------------------
# Diagnostics


def _term_shape(m, depth=1):
    """(max depth, max breadth, max abstraction length) of a term."""
    lams = 0
    while isinstance(m, Lam):
        lams += 1
        m = m.body
    d, b, l_ = depth, len(m.spine), lams
    for e in m.spine:
        if not isinstance(e, PrepatArg):
            d2, b2, l2 = _term_shape(e, depth + 1)
            d, b, l_ = max(d, d2), max(b, b2), max(l_, l2)
    return d, b, l_


def _telescope(a) -> int:
    n = 0
    while isinstance(a, Pi):
        n += 1
        a = a.cod
    return n


def rough_bound_log10(sig: Signature) -> float:
    """log10 of ((l+1)p)^(1+m+n+(l+1)p) with p = (1-b^d)/(1-b).

    b, d: maximum breadth and depth of the definition bodies; l: longest
    abstraction prefix allowed by a type; n, m: number of constants and of
    recursion constants.  The bound is far too loose to enforce and is only
    reported.
    """
    b = d = 1
    l_ = 0
    n = m = 0
    for decl in sig:
        if isinstance(decl, RecDef):
            m += 1
            d2, b2, l2 = _term_shape(decl.body)
            d, b, l_ = max(d, d2), max(b, b2), max(l_, l2)
            l_ = max(l_, _telescope(decl.type))
        elif hasattr(decl, "type"):
            n += 1
            l_ = max(l_, _telescope(decl.type))
    p = d if b == 1 else (b ** d - 1) // (b - 1)
    base = (l_ + 1) * p
    exponent = 1 + m + n + base
    return exponent * math.log10(base) if base > 1 else 0.0
