"""Finite Böhm-tree approximants of rational terms.

``expand(sig, M, k)`` unfolds recursion constants in ``M`` and cuts the
result at depth ``k``, writing ``_|_`` where the cut happens.  Abstractions and
unfolding do not consume depth; passing from a constructor or variable head
into its arguments consumes one level.  This is the independent oracle the
equality algorithm is tested against.

Trees are hash-consed, so structurally equal subtrees are shared and the
exponentially large trees of branching definitions stay small in memory.
"""

from __future__ import annotations

import weakref
from typing import Optional

from .subst import erase, reduce_spine
from .syntax import (
    Const, Lam, Meta, Neutral, PrepatArg, RecConst, Signature, SignatureError,
    Var,
)
from .validity import is_contractive, is_prepattern_spine


class ExpansionError(Exception):
    pass


class Approx:
    """Base class of approximant nodes; construct them with the helpers below."""

    __slots__ = ("_hash", "size", "fv", "__weakref__")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other or (
            type(self) is type(other) and self._hash == other._hash and self._key() == other._key())

    def __repr__(self):
        return show_approx(self)


class Bottom(Approx):
    __slots__ = ()

    def _key(self):
        return ()


class BLam(Approx):
    __slots__ = ("var", "body")

    def _key(self):
        return (self.var, self.body)


class BHead(Approx):
    """A constructor (``const`` true) or variable applied to approximants."""

    __slots__ = ("const", "name", "args")

    def _key(self):
        return (self.const, self.name, self.args)


class PrepatLeaf(Approx):
    __slots__ = ("var",)

    def _key(self):
        return (self.var,)


_table: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()


def _intern(node: Approx) -> Approx:
    key = (type(node).__name__,) + node._key()
    node._hash = hash(key)
    hit = _table.get(key)
    if hit is not None:
        return hit
    _table[key] = node
    return node


def _new(cls, **kw):
    node = cls.__new__(cls)
    for k, v in kw.items():
        setattr(node, k, v)
    return node


def _bottom() -> Bottom:
    b = _new(Bottom, size=1, fv=frozenset())
    return _intern(b)


BOTTOM = _bottom()


def blam(var: str, body: Approx) -> Approx:
    return _intern(_new(BLam, var=var, body=body, size=1 + body.size, fv=body.fv - {var}))


def bhead(const: bool, name: str, args=()) -> Approx:
    args = tuple(args)
    fv = frozenset() if const else frozenset((name,))
    for a in args:
        fv = fv | a.fv
    return _intern(_new(BHead, const=const, name=name, args=args,
                        size=1 + sum(a.size for a in args), fv=fv))


def prepat_leaf(var: str) -> Approx:
    return _intern(_new(PrepatLeaf, var=var, size=1, fv=frozenset((var,))))


# --------------------------------------------------------------------------
# Expansion


class Expander:
    def __init__(self, sig: Signature):
        self.sig = sig
        self.memo: dict = {}
        self.fuel_limit = len(sig.recdefs()) + 1
        self._unfold: dict = {}

    def expand(self, m, k: int) -> Approx:
        if k < 0:
            raise ValueError("depth must be non-negative")
        return self._term(m, k)

    def _term(self, m, k):
        if k == 0:
            return BOTTOM
        key = (m, k)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if isinstance(m, Lam):
            out = blam(m.var, self._term(m.body, k))
        else:
            out = self._neutral(m, k)
        self.memo[key] = out
        return out

    def _neutral(self, r: Neutral, k: int) -> Approx:
        fuel = self.fuel_limit
        while isinstance(r.head, RecConst):
            if fuel == 0:
                raise ExpansionError(f"unfolding {r.head.name} makes no progress")
            fuel -= 1
            r = self.unfold(r.head.name, r.spine)
            if isinstance(r, Lam):
                raise ExpansionError("unfolding produced a non-neutral term")
        match r.head:
            case Const(name):
                const = True
            case Var(name):
                const = False
            case Meta():
                raise ExpansionError("cannot expand a term with metavariables")
        return bhead(const, name, (self._entry(e, k - 1) for e in r.spine))

    def _entry(self, e, k):
        if k == 0:
            return BOTTOM
        if isinstance(e, PrepatArg):
            return prepat_leaf(e.var)
        return self._term(e, k)

    def unfold(self, r: str, spine):
        key = (r, spine)
        hit = self._unfold.get(key)
        if hit is not None:
            return hit
        try:
            d = self.sig.definition(r)
        except SignatureError as e:
            raise ExpansionError(str(e)) from None
        if not is_prepattern_spine(spine):
            raise ExpansionError(f"recursion constant {r} applied to a non-variable argument")
        if not is_contractive(d.body):
            raise ExpansionError(f"definition of {r} is not contractive")
        out = reduce_spine(spine, erase(d.type), d.body)
        self._unfold[key] = out
        return out


def expand(sig: Signature, m, k: int, expander: Optional[Expander] = None) -> Approx:
    """Depth-k approximant of ``m``."""
    return (expander or Expander(sig)).expand(m, k)


def truncate(t: Approx, k: int) -> Approx:
    """Cut an approximant at depth k, with the same depth accounting as expand."""
    memo: dict = {}

    def go(t, k):
        if k == 0 or isinstance(t, Bottom):
            return BOTTOM
        key = (id(t), k)
        if key in memo:
            return memo[key]
        match t:
            case BLam():
                out = blam(t.var, go(t.body, k))
            case BHead():
                out = bhead(t.const, t.name, [
                    BOTTOM if k - 1 == 0 else go(a, k - 1) for a in t.args])
            case PrepatLeaf():
                out = t
        memo[key] = out
        return out

    return go(t, k)


def depth(t: Approx) -> int:
    """Number of head-to-argument steps on the longest path."""
    memo: dict = {}

    def go(t):
        if id(t) in memo:
            return memo[id(t)]
        match t:
            case BLam():
                out = go(t.body)
            case BHead():
                out = 1 + max((go(a) for a in t.args), default=0)
            case _:
                out = 0
        memo[id(t)] = out
        return out

    return go(t)


# --------------------------------------------------------------------------
# Comparison


def approx_equal(t1: Approx, t2: Approx, compatible: bool = False) -> bool:
    """Alpha-equivalence of approximants.

    With ``compatible`` a bottom node on either side matches anything, so the
    test is agreement wherever both trees are defined.
    """
    memo: dict = {}

    def go(a, b, ea, eb):
        # ea/eb: bound variable -> binder depth
        if a is b and not any(v in ea or v in eb for v in a.fv):
            return True
        if compatible and (isinstance(a, Bottom) or isinstance(b, Bottom)):
            return True
        key = (id(a), id(b),
               tuple(sorted((v, ea[v]) for v in a.fv if v in ea)),
               tuple(sorted((v, eb[v]) for v in b.fv if v in eb)))
        if key in memo:
            return memo[key]
        match a, b:
            case Bottom(), Bottom():
                out = True
            case BLam(), BLam():
                d = len(ea)
                out = go(a.body, b.body, {**ea, a.var: d}, {**eb, b.var: d})
            case BHead(), BHead():
                out = (a.const == b.const and len(a.args) == len(b.args)
                       and _same_name(a, b, ea, eb)
                       and all(go(x, y, ea, eb) for x, y in zip(a.args, b.args)))
            case PrepatLeaf(), PrepatLeaf():
                out = ea.get(a.var, a.var) == eb.get(b.var, b.var) and (
                    (a.var in ea) == (b.var in eb))
            case _:
                out = False
        memo[key] = out
        return out

    return go(t1, t2, {}, {})


def _same_name(a, b, ea, eb) -> bool:
    if a.const:
        return a.name == b.name
    if (a.name in ea) != (b.name in eb):
        return False
    return ea[a.name] == eb[b.name] if a.name in ea else a.name == b.name


# --------------------------------------------------------------------------
# Substitution on approximants (used to test commutation)


def approx_subst(n: Approx, x: str, t: Approx) -> Approx:
    """Replace variable x by the approximant n in t, reducing as it goes.

    A bottom in function position absorbs its arguments.  Bound names in ``t``
    are assumed distinct from the free variables of ``n``.
    """
    memo: dict = {}

    def go(t):
        if x not in t.fv:
            return t
        if id(t) in memo:
            return memo[id(t)]
        match t:
            case BLam():
                out = t if t.var == x else blam(t.var, go(t.body))
            case BHead():
                args = [go(a) for a in t.args]
                out = apply(n, args) if (not t.const and t.name == x) else bhead(t.const, t.name, args)
            case PrepatLeaf():
                raise ExpansionError(f"substituting a term for prepattern variable {x}")
            case _:
                out = t
        memo[id(t)] = out
        return out

    return go(t)


def apply(f: Approx, args) -> Approx:
    for a in args:
        if isinstance(f, Bottom):
            return BOTTOM
        if not isinstance(f, BLam):
            raise ExpansionError("applying a non-abstraction approximant")
        if isinstance(a, PrepatLeaf):
            f = approx_rename(a.var, f.var, f.body)
        else:
            f = approx_subst(a, f.var, f.body)
    return f


def approx_rename(y: str, x: str, t: Approx) -> Approx:
    memo: dict = {}

    def go(t):
        if x not in t.fv:
            return t
        if id(t) in memo:
            return memo[id(t)]
        match t:
            case BLam():
                out = t if t.var == x else blam(t.var, go(t.body))
            case BHead():
                name = y if (not t.const and t.name == x) else t.name
                out = bhead(t.const, name, [go(a) for a in t.args])
            case PrepatLeaf():
                out = prepat_leaf(y)
        memo[id(t)] = out
        return out

    return go(t)


# --------------------------------------------------------------------------
# Printing


def show_approx(t: Approx) -> str:
    """One-line rendering in the concrete syntax."""
    def go(t, arg):
        match t:
            case Bottom():
                return "_|_"
            case PrepatLeaf():
                return t.var
            case BLam():
                s = f"[{t.var}] {go(t.body, False)}"
                return f"({s})" if arg else s
            case BHead():
                if not t.args:
                    return t.name
                s = " ".join([t.name] + [go(a, True) for a in t.args])
                return f"({s})" if arg else s
    return go(t, False)


def show_tree(t: Approx, indent: str = "  ") -> str:
    """Indented rendering: one node per line, children below their parent."""
    lines: list[str] = []

    def go(t, level):
        pad = indent * level
        match t:
            case Bottom():
                lines.append(pad + "_|_")
            case PrepatLeaf():
                lines.append(pad + t.var)
            case BLam():
                lines.append(pad + f"[{t.var}]")
                go(t.body, level + 1)
            case BHead():
                lines.append(pad + t.name)
                for a in t.args:
                    go(a, level + 1)

    go(t, 0)
    return "\n".join(lines)
