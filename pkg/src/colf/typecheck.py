"""Bidirectional type checking of canonical CoLF signatures.

Checking runs in two phases.  The first walks the signature in order and
checks every kind and type, plus the side conditions of each recursive
definition; constants are visible only after their declaration.  The second
phase checks the bodies of recursive definitions, where every recursion
constant of the whole signature is visible, so definitions may refer to each
other circularly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .equality import (
    DEFAULT_MEMO_CAP, EQUAL, UNEQUAL, EqResult, EqualityChecker,
)
from .subst import SubstError, erase, hsubst, rename
from .syntax import (
    Atomic, Const, Constructor, Context, Lam, Meta, Neutral, Pi, PrepatArg,
    RecConst, RecDef, Signature, TypeFamily, TypeMeta, Universe, Var, fresh,
    show,
)
from .validity import (
    PrepatternError, check_guarded, is_contractive,
    is_prepattern_type,
)

OK = "ok"
TYPE_ERROR = "type-error"
GUARDEDNESS_ERROR = "guardedness-error"
PREPATTERN_ERROR = "prepattern-error"
PARSE_ERROR = "parse-error"
VERDICTS = (OK, TYPE_ERROR, GUARDEDNESS_ERROR, PREPATTERN_ERROR, PARSE_ERROR)


class KernelError(Exception):
    """A failed premise; ``judgment`` names the judgment that failed."""

    verdict = TYPE_ERROR

    def __init__(self, judgment: str, message: str):
        super().__init__(message)
        self.judgment = judgment
        self.message = message


class KernelPrepatternError(KernelError):
    verdict = PREPATTERN_ERROR


class KernelGuardednessError(KernelError):
    verdict = GUARDEDNESS_ERROR


@dataclass
class DeclReport:
    name: str
    verdict: str
    message: str = ""
    judgment: str = ""
    span: object = None

    @property
    def ok(self) -> bool:
        return self.verdict == OK


@dataclass
class EqualityQuery:
    """One spine comparison made while checking types."""

    theta: tuple
    lhs: tuple
    rhs: tuple
    result: EqResult


@dataclass
class CheckResult:
    reports: list
    order: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    max_delta: int = 0
    cap_hit: bool = False

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.reports)

    def report(self, name: str) -> DeclReport:
        for r in self.reports:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self) -> list:
        return [r for r in self.reports if not r.ok]


class Kernel:
    """Checks one signature.

    ``xi`` is the length of the visible prefix of the signature; with
    ``definitions`` set, recursion constants anywhere in the signature are
    visible as well.
    """

    def __init__(self, sig: Signature, memo_cap: int = DEFAULT_MEMO_CAP, record: bool = False):
        self.sig = sig
        self.eq = EqualityChecker(sig, memo_cap)
        self.xi = len(sig)
        self.definitions = True
        self.record = record
        self.queries: list = []
        self.max_delta = 0
        self.cap_hit = False

    # signatures -------------------------------------------------------

    def check_signature(self) -> CheckResult:
        reports: dict = {}
        order: list = []
        deferred = []
        for i, d in enumerate(self.sig):
            self.xi, self.definitions = i, False
            order.append(("classifier", d.name))
            try:
                self.check_decl_classifier(d)
            except KernelError as e:
                reports[d.name] = DeclReport(d.name, e.verdict, e.message, e.judgment, d.span)
                continue
            if isinstance(d, RecDef):
                deferred.append((i, d))
            else:
                reports[d.name] = DeclReport(d.name, OK, span=d.span)
        for i, d in deferred:
            self.xi, self.definitions = i, True
            order.append(("body", d.name))
            try:
                self.check_term(Context(), d.body, d.type)
            except KernelError as e:
                reports[d.name] = DeclReport(d.name, e.verdict, e.message, e.judgment, d.span)
                continue
            reports[d.name] = DeclReport(d.name, OK, span=d.span)
        self.xi, self.definitions = len(self.sig), True
        return CheckResult([reports[d.name] for d in self.sig], order, self.queries,
                           self.max_delta, self.cap_hit)

    def check_decl_classifier(self, d) -> None:
        match d:
            case TypeFamily(_, kind):
                self.check_kind(Context(), kind)
            case Constructor(_, ty):
                self.check_type(Context(), ty)
            case RecDef(name, ty, body):
                self.check_type(Context(), ty)
                if not is_prepattern_type(ty):
                    raise KernelPrepatternError(
                        "prepattern", f"type of {name} must bind its arguments as prepattern variables")
                if not is_contractive(body):
                    raise KernelGuardednessError(
                        "contractive", f"body of {name} is headed by a recursion constant")
                try:
                    rep = check_guarded(self.sig, name, body)
                except PrepatternError as e:
                    raise KernelPrepatternError("guardedness", str(e)) from None
                except Exception as e:  # unknown recursion constant and the like
                    raise KernelError("guardedness", str(e)) from None
                if not rep.ok:
                    raise KernelGuardednessError("guardedness", rep.message)

    # lookup -----------------------------------------------------------

    def _visible(self, name: str, want, what: str):
        if name not in self.sig:
            raise KernelError("lookup", f"unknown {what} {name}")
        d = self.sig.lookup(name)
        if not isinstance(d, want):
            raise KernelError("lookup", f"{name} is not a {what}")
        pos = self.sig.position(name)
        if pos < self.xi or (self.definitions and isinstance(d, RecDef)):
            return d
        raise KernelError("lookup", f"{name} is used before its declaration")

    def family(self, name: str) -> TypeFamily:
        return self._visible(name, TypeFamily, "type family")

    def head_type(self, ctx: Context, head):
        match head:
            case Var(x):
                b = ctx.lookup(x)
                if b is None:
                    raise KernelError("term", f"unbound variable {x}")
                return b.type
            case Const(c):
                return self._visible(c, Constructor, "constructor").type
            case RecConst(r):
                return self._visible(r, RecDef, "recursion constant").type
            case Meta():
                raise KernelError("term", "unsolved metavariable")
        raise TypeError(head)

    # kinds and types --------------------------------------------------

    def check_kind(self, ctx: Context, k) -> None:
        match k:
            case Universe():
                return
            case Pi(x, dom, cod, prepat):
                self.check_type(ctx, dom)
                x2, ctx2, cod2 = _bind(ctx, x, cod, dom, prepat)
                self.check_kind(ctx2, cod2)
            case _:
                raise KernelError("kind", f"{show(k)} is not a kind")

    def check_type(self, ctx: Context, a) -> None:
        match a:
            case Pi(x, dom, cod, prepat):
                self.check_type(ctx, dom)
                _, ctx2, cod2 = _bind(ctx, x, cod, dom, prepat)
                self.check_type(ctx2, cod2)
            case Atomic():
                k = self.synth_atomic(ctx, a)
                if not isinstance(k, Universe):
                    raise KernelError("type", f"{show(a)} is not fully applied; its kind is {show(k)}")
            case TypeMeta():
                raise KernelError("type", "unsolved type")
            case _:
                raise KernelError("type", f"{show(a)} is not a type")

    def synth_atomic(self, ctx: Context, p: Atomic):
        fam = self.family(p.family)
        return self.check_spine_against_kind(ctx, p.spine, fam.kind)

    def check_spine_against_kind(self, ctx: Context, spine, k):
        for e in spine:
            if not isinstance(k, Pi):
                raise KernelError("kind spine", f"too many arguments: {show(e)} applied at kind {show(k)}")
            k = self._spine_step(ctx, e, k, "kind spine")
        return k

    # terms --------------------------------------------------------------

    def check_term(self, ctx: Context, m, a) -> None:
        match m, a:
            case Lam(x, body), Pi(y, dom, cod, prepat):
                z = x if x not in ctx else fresh(x)
                body2 = rename(z, x, body)
                cod2 = rename(z, y, cod)
                self.check_term(ctx.extend(z, dom, prepat), body2, cod2)
            case Neutral(), Atomic():
                p = self.synth_neutral(ctx, m)
                self.type_equal(ctx, p, a)
            case Lam(), _:
                raise KernelError("term", f"abstraction {show(m)} checked against non-function type {show(a)}")
            case Neutral(), Pi():
                raise KernelError("term", f"{show(m)} is not eta-long at type {show(a)}")
            case _:
                raise KernelError("term", f"cannot check {show(m)} against {show(a)}")

    def synth_neutral(self, ctx: Context, r: Neutral):
        a = self.head_type(ctx, r.head)
        if isinstance(r.head, RecConst):
            bad = [e for e in r.spine if not isinstance(e, PrepatArg)]
            if bad:
                raise KernelPrepatternError(
                    "prepattern", f"recursion constant {r.head.name} applied to non-variable {show(bad[0])}")
        p = self.check_spine_against_type(ctx, r.spine, a)
        return p

    def check_spine_against_type(self, ctx: Context, spine, a):
        for e in spine:
            if not isinstance(a, Pi):
                raise KernelError("spine", f"too many arguments: {show(e)} applied at type {show(a)}")
            a = self._spine_step(ctx, e, a, "spine")
        if not isinstance(a, Atomic):
            raise KernelError("spine", f"not enough arguments; remaining type {show(a)}")
        return a

    def _spine_step(self, ctx, e, pi: Pi, judgment: str):
        if pi.prepat:
            if not isinstance(e, PrepatArg):
                raise KernelPrepatternError(
                    judgment, f"argument {show(e)} must be a prepattern variable")
            b = ctx.lookup(e.var)
            if b is None or not b.prepat:
                raise KernelPrepatternError(
                    judgment, f"{e.var} is not a prepattern variable")
            self.type_equal(ctx, b.type, pi.dom)
            return rename(e.var, pi.var, pi.cod)
        if isinstance(e, PrepatArg):
            raise KernelPrepatternError(judgment, f"prepattern argument {e.var} at an ordinary binder")
        self.check_term(ctx, e, pi.dom)
        try:
            return hsubst(e, pi.var, erase(pi.dom), pi.cod)
        except SubstError as err:
            raise KernelError(judgment, f"substitution failed: {err}") from None

    # type equality ------------------------------------------------------

    def type_equal(self, ctx: Context, a1, a2) -> None:
        match a1, a2:
            case Atomic(f1, s1), Atomic(f2, s2):
                if f1 != f2:
                    raise KernelError("type equality", f"type mismatch: {show(a1)} vs {show(a2)}")
                self._spines_equal(ctx, s1, s2, a1, a2)
            case Pi(x, d1, c1, p1), Pi(y, d2, c2, p2) if p1 == p2:
                self.type_equal(ctx, d1, d2)
                z = x if x not in ctx else fresh(x)
                self.type_equal(ctx.extend(z, d1, p1), rename(z, x, c1), rename(z, y, c2))
            case _:
                raise KernelError("type equality", f"type mismatch: {show(a1, True)} vs {show(a2, True)}")

    def _spines_equal(self, ctx, s1, s2, a1, a2) -> None:
        theta = tuple(ctx.names())
        res = self.eq.equal_spines(s1, s2, theta)
        self.max_delta = max(self.max_delta, res.max_delta)
        if self.record:
            self.queries.append(EqualityQuery(theta, tuple(s1), tuple(s2), res))
        if res.verdict == EQUAL:
            return
        if res.verdict == UNEQUAL:
            raise KernelError("type equality", f"type mismatch: {show(a1)} vs {show(a2)} ({res.reason})")
        if "cap" in res.reason:
            self.cap_hit = True
        raise KernelError("term equality", f"cannot compare {show(a1)} and {show(a2)}: {res.reason}")


def _bind(ctx: Context, x: str, body, dom, prepat: bool):
    """Extend ctx with x (renamed apart if needed) and rename body to match."""
    z = x if x not in ctx else fresh(x)
    return z, ctx.extend(z, dom, prepat), (body if z == x else rename(z, x, body))


def check_signature(sig: Signature, memo_cap: int = DEFAULT_MEMO_CAP, record: bool = False) -> CheckResult:
    """Check every declaration of ``sig``; see :class:`CheckResult`."""
    return Kernel(sig, memo_cap, record).check_signature()


def check_term(sig: Signature, ctx: Context, m, a, memo_cap: int = DEFAULT_MEMO_CAP) -> None:
    """Check ``m`` against ``a`` with the whole signature visible."""
    Kernel(sig, memo_cap).check_term(ctx, m, a)


def type_equal(sig: Signature, ctx: Context, a1, a2, memo_cap: int = DEFAULT_MEMO_CAP) -> None:
    Kernel(sig, memo_cap).type_equal(ctx, a1, a2)
