"""Erasure, hereditary substitution, renaming and spine reduction.

Hereditary substitution is indexed by the simple type of the substituted
term; when it meets the substituted variable in head position it reduces the
resulting redex on the spot, so the output is canonical again.  Substituting
an ordinary term for a variable that occurs as a prepattern argument ``[x]``
has no canonical result and raises :class:`UndefinedSubstitution`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .syntax import (
    Atomic, Binding, Context, Lam, Neutral, Pi, PrepatArg, TypeMeta,
    Universe, Var, fresh, free_vars,
)


class SubstError(Exception):
    """Hereditary substitution has no result on this input."""


class UndefinedSubstitution(SubstError):
    pass


class IllTypedReduction(SubstError):
    pass


@dataclass(frozen=True)
class Base:
    def __str__(self):
        return "*"


@dataclass(frozen=True)
class Arrow:
    dom: "SimpleType"
    cod: "SimpleType"

    def __str__(self):
        d = f"({self.dom})" if isinstance(self.dom, Arrow) else str(self.dom)
        return f"{d} -> {self.cod}"


SimpleType = Union[Base, Arrow]
STAR = Base()


def erase(a) -> SimpleType:
    """Simple-type skeleton A° of a canonical type."""
    match a:
        case Atomic():
            return STAR
        case Pi(_, dom, cod, prepat):
            return Arrow(STAR if prepat else erase(dom), erase(cod))
        case TypeMeta():
            raise SubstError("cannot erase an unsolved type")
    raise TypeError(f"not a canonical type: {a!r}")


def simple_size(t: SimpleType) -> int:
    return 1 if isinstance(t, Base) else 1 + simple_size(t.dom) + simple_size(t.cod)


# --------------------------------------------------------------------------
# The substitution engine


@dataclass(frozen=True)
class _Term:
    """Environment entry: replace the variable by ``term`` at simple type ``tau``."""

    term: object
    tau: SimpleType


class _Engine:
    """Applies a simultaneous substitution of terms and variable names.

    ``env`` maps a variable either to a new name (renaming) or to a ``_Term``.
    ``avoid`` holds every variable free in some replacement; binders in that
    set are renamed apart on the way down.
    """

    __slots__ = ("avoid",)

    def __init__(self, avoid):
        self.avoid = avoid

    def go(self, obj, env):
        match obj:
            case Neutral(head, spine):
                spine2 = self.spine(spine, env)
                if isinstance(head, Var) and head.name in env:
                    r = env[head.name]
                    if isinstance(r, str):
                        return Neutral(Var(r), spine2)
                    return reduce_spine(spine2, r.tau, r.term)
                return obj if spine2 is spine else Neutral(head, spine2)
            case Lam(var, body):
                var2, env2 = self.binder(var, env)
                body2 = self.go(body, env2)
                if var2 == var and body2 is body:
                    return obj
                return Lam(var2, body2)
            case PrepatArg(var):
                r = env.get(var)
                if r is None:
                    return obj
                if isinstance(r, str):
                    return PrepatArg(r)
                raise UndefinedSubstitution(
                    f"substituting a term for prepattern variable {var}")
            case Atomic(fam, spine):
                spine2 = self.spine(spine, env)
                return obj if spine2 is spine else Atomic(fam, spine2)
            case Pi(var, dom, cod, prepat, tag):
                dom2 = self.go(dom, env)
                var2, env2 = self.binder(var, env)
                cod2 = self.go(cod, env2)
                if dom2 is dom and cod2 is cod and var2 == var:
                    return obj
                return Pi(var2, dom2, cod2, prepat, tag)
            case Universe() | TypeMeta():
                return obj
            case Context():
                out = []
                for b in obj.entries:
                    out.append(Binding(b.name, self.go(b.type, env), b.prepat))
                return Context(out)
            case tuple():
                return self.spine(obj, env)
        raise TypeError(f"cannot substitute into {obj!r}")

    def spine(self, spine, env):
        out = None
        for i, e in enumerate(spine):
            e2 = self.go(e, env)
            if e2 is not e and out is None:
                out = list(spine[:i])
            if out is not None:
                out.append(e2)
        return spine if out is None else tuple(out)

    def binder(self, var, env):
        if var not in env and var not in self.avoid:
            return var, env
        env2 = dict(env)
        env2.pop(var, None)
        if var in self.avoid:
            new = fresh(var)
            env2[var] = new
            return new, env2
        return var, env2


def _avoid_set(env: Mapping) -> set:
    avoid = set()
    for r in env.values():
        if isinstance(r, str):
            avoid.add(r)
        else:
            free_vars(r.term, avoid)
    return avoid


def hsubst(n, x: str, tau: SimpleType, obj):
    """[N/x]^tau applied to a term, spine, type, kind or context."""
    env = {x: _Term(n, tau)}
    return _Engine(_avoid_set(env)).go(obj, env)


hsubst_term = hsubst
hsubst_type = hsubst
hsubst_kind = hsubst
hsubst_context = hsubst


def rename_many(sigma: Mapping[str, str], obj):
    """Simultaneous renaming <sigma>obj; total on every syntactic category."""
    env = {x: y for x, y in sigma.items() if x != y}
    if not env:
        return obj
    return _Engine(set(env.values())).go(obj, env)


def rename(y: str, x: str, obj):
    """<y/x>obj: replace free occurrences of variable x by y."""
    return rename_many({x: y}, obj)


def reduce_spine(spine, tau: SimpleType, m):
    """S |>^tau M: apply the canonical term M to the spine S, hereditarily."""
    for e in spine:
        if not isinstance(tau, Arrow):
            raise IllTypedReduction(f"spine too long for simple type {tau}")
        if not isinstance(m, Lam):
            raise IllTypedReduction("applying a neutral term to further arguments")
        if isinstance(e, PrepatArg):
            if tau.dom != STAR:
                raise IllTypedReduction("prepattern argument at a higher-order position")
            m = rename(e.var, m.var, m.body)
        else:
            m = hsubst(e, m.var, tau.dom, m.body)
        tau = tau.cod
    if isinstance(m, Lam):
        raise IllTypedReduction("spine too short: result is not neutral")
    return m


def instantiate(pi: Pi, arg):
    """Codomain of ``pi`` instantiated with one spine entry."""
    if isinstance(arg, PrepatArg):
        return rename(arg.var, pi.var, pi.cod)
    return hsubst(arg, pi.var, erase(pi.dom), pi.cod)

