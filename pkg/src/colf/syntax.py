"""Abstract syntax of canonical CoLF terms, types, kinds and signatures.

Terms are kept in spine form, so a beta-redex cannot be written down: the head
of a neutral term is a variable, a constructor or a recursion constant, never
an abstraction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields
from typing import Iterable, Iterator, Optional, Union


class SignatureError(Exception):
    """Name resolution or declaration-order failure."""

    def __init__(self, message: str, span=None):
        super().__init__(message)
        self.span = span


class UnknownName(SignatureError):
    pass


class IllegalForwardReference(SignatureError):
    pass


class _Hashed:
    """Caches the structural hash; deep terms are used as memo keys."""

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = hash((type(self).__name__,) + tuple(
                getattr(self, f.name) for f in fields(self) if f.compare))
            object.__setattr__(self, "_hash", h)
            return h


# --------------------------------------------------------------------------
# Heads, terms and spines


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class RecConst:
    name: str


@dataclass(frozen=True)
class Meta:
    """Unification variable; only the elaborator ever builds these."""

    id: int


Head = Union[Var, Const, RecConst, Meta]


@dataclass(frozen=True)
class PrepatArg(_Hashed):
    """Spine entry ``[x]``: a prepattern-variable argument."""

    var: str


@dataclass(frozen=True)
class Lam(_Hashed):
    var: str
    body: "Term"


@dataclass(frozen=True)
class Neutral(_Hashed):
    head: Head
    spine: tuple = ()


Term = Union[Lam, Neutral]
SpineEntry = Union[Lam, Neutral, PrepatArg]


# --------------------------------------------------------------------------
# Types and kinds


@dataclass(frozen=True)
class Universe:
    """``type`` (co=False) or ``cotype`` (co=True)."""

    co: bool


TYPE = Universe(False)
COTYPE = Universe(True)


@dataclass(frozen=True)
class Pi(_Hashed):
    """Dependent function space, used for both types and kinds.

    ``prepat`` selects the prepattern flavour ``{x :^ A} B``.  ``tag`` records
    which source binder produced the node so the elaborator can flip its
    flavour; it never takes part in equality.
    """

    var: str
    dom: "CanonicalType"
    cod: Union["CanonicalType", "Kind"]
    prepat: bool = False
    tag: object = field(default=None, compare=False, hash=False, repr=False)


@dataclass(frozen=True)
class Atomic(_Hashed):
    family: str
    spine: tuple = ()


@dataclass(frozen=True)
class TypeMeta:
    """Unknown type (elaboration only)."""

    id: int


CanonicalType = Union[Pi, Atomic, TypeMeta]
Kind = Union[Universe, Pi]


# --------------------------------------------------------------------------
# Declarations and signatures


@dataclass(frozen=True)
class TypeFamily:
    name: str
    kind: Kind
    span: object = field(default=None, compare=False)
    implicit: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Constructor:
    name: str
    type: CanonicalType
    span: object = field(default=None, compare=False)
    implicit: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RecDef:
    name: str
    type: CanonicalType
    body: Term
    span: object = field(default=None, compare=False)
    implicit: int = field(default=0, compare=False)


Decl = Union[TypeFamily, Constructor, RecDef]

RECURSIVE_BODY = "recursive-body"
ELSEWHERE = "elsewhere"


def target_family(a) -> Optional[str]:
    """Family at the tail of a Pi telescope, or None for a kind."""
    while isinstance(a, Pi):
        a = a.cod
    return a.family if isinstance(a, Atomic) else None


def kind_tail(k) -> Universe:
    while isinstance(k, Pi):
        k = k.cod
    return k


class Signature:
    """An ordered, immutable sequence of declarations."""

    def __init__(self, decls: Iterable[Decl] = ()):
        self.decls: tuple = tuple(decls)
        self.index: dict[str, int] = {}
        self._family_rank: dict[str, int] = {}
        for i, d in enumerate(self.decls):
            if d.name in self.index:
                raise SignatureError(f"duplicate declaration of {d.name}", d.span)
            self.index[d.name] = i
            if isinstance(d, TypeFamily):
                self._family_rank[d.name] = len(self._family_rank)

    def __len__(self):
        return len(self.decls)

    def __iter__(self) -> Iterator[Decl]:
        return iter(self.decls)

    def __contains__(self, name) -> bool:
        return name in self.index

    def lookup(self, name: str) -> Decl:
        try:
            return self.decls[self.index[name]]
        except KeyError:
            raise UnknownName(f"unknown constant {name}") from None

    def position(self, name: str) -> int:
        if name not in self.index:
            raise UnknownName(f"unknown constant {name}")
        return self.index[name]

    def definition(self, name: str) -> RecDef:
        d = self.lookup(name)
        if not isinstance(d, RecDef):
            raise UnknownName(f"{name} is not a recursion constant")
        return d

    def recdefs(self) -> list[RecDef]:
        return [d for d in self.decls if isinstance(d, RecDef)]

    def extend(self, decl: Decl) -> "Signature":
        return Signature(self.decls + (decl,))

    def replace(self, decl: Decl) -> "Signature":
        i = self.position(decl.name)
        return Signature(self.decls[:i] + (decl,) + self.decls[i + 1:])

    # priorities -------------------------------------------------------

    def family_of(self, name: str) -> str:
        d = self.lookup(name)
        if isinstance(d, TypeFamily):
            return d.name
        fam = target_family(d.type)
        if fam is None:
            raise SignatureError(f"{name} has no target type family")
        return fam

    def priority_of(self, name: str) -> int:
        """Declaration rank of a type family (later means higher)."""
        d = self.lookup(name)
        if not isinstance(d, TypeFamily):
            raise SignatureError(f"{name} is not a type family")
        return self._family_rank[name]

    def constructor_priority(self, name: str) -> int:
        return self.priority_of(self.family_of(name))

    def classify(self, name: str) -> str:
        """'inductive' or 'coinductive' for a type family or constructor."""
        fam = self.lookup(self.family_of(name))
        return "coinductive" if kind_tail(fam.kind).co else "inductive"

    def is_coinductive(self, name: str) -> bool:
        return self.classify(name) == "coinductive"

    # resolution -------------------------------------------------------

    def resolve(self, name: str, site: str = ELSEWHERE, position: Optional[int] = None) -> Decl:
        """Look ``name`` up as referenced from the declaration at ``position``.

        Only a recursion constant may be referenced from a recursive body at
        or before its own declaration.
        """
        d = self.lookup(name)
        if position is None:
            return d
        target = self.index[name]
        if target < position:
            return d
        if site == RECURSIVE_BODY and isinstance(d, RecDef):
            return d
        user = self.decls[position].name if position < len(self.decls) else f"#{position}"
        raise IllegalForwardReference(
            f"{user} (position {position}) refers to {name} (position {target}) "
            f"which is not declared before it")


def priority_of(sig: Signature, a: str) -> int:
    return sig.priority_of(a)


def classify(sig: Signature, name: str) -> str:
    return sig.classify(name)


def resolve(sig: Signature, name: str, site: str = ELSEWHERE, position: Optional[int] = None) -> Decl:
    return sig.resolve(name, site, position)


# --------------------------------------------------------------------------
# Contexts


@dataclass(frozen=True)
class Binding:
    name: str
    type: CanonicalType
    prepat: bool = False


class Context:
    """Ordered typing context; persistent (``extend`` returns a new one)."""

    __slots__ = ("entries", "_index")

    def __init__(self, entries: Iterable[Binding] = ()):
        self.entries = tuple(entries)
        self._index = {b.name: i for i, b in enumerate(self.entries)}

    def extend(self, name: str, type_, prepat: bool = False) -> "Context":
        if name in self._index:
            raise ValueError(f"variable {name} already bound in context")
        return Context(self.entries + (Binding(name, type_, prepat),))

    def lookup(self, name: str) -> Optional[Binding]:
        i = self._index.get(name)
        return None if i is None else self.entries[i]

    def __contains__(self, name) -> bool:
        return name in self._index

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def names(self) -> list[str]:
        return [b.name for b in self.entries]

    def __repr__(self):
        return "Context(" + ", ".join(
            f"{b.name} {':^' if b.prepat else ':'} {show(b.type)}" for b in self.entries) + ")"


# --------------------------------------------------------------------------
# Fresh names and free variables

_counter = itertools.count()


def fresh(base: str = "x") -> str:
    """A name that no parser-produced identifier can collide with."""
    base = base.split("@", 1)[0] or "x"
    return f"{base}@{next(_counter)}"


def free_vars(obj, acc: Optional[set] = None) -> set:
    """Free variables of any syntactic category (metas are opaque)."""
    if acc is None:
        acc = set()
    _fv(obj, frozenset(), acc)
    return acc


def _fv(obj, bound, acc):
    match obj:
        case Lam(var, body):
            _fv(body, bound | {var}, acc)
        case Neutral(head, spine):
            if isinstance(head, Var) and head.name not in bound:
                acc.add(head.name)
            for e in spine:
                _fv(e, bound, acc)
        case PrepatArg(var):
            if var not in bound:
                acc.add(var)
        case Pi(var, dom, cod):
            _fv(dom, bound, acc)
            _fv(cod, bound | {var}, acc)
        case Atomic(_, spine):
            for e in spine:
                _fv(e, bound, acc)
        case Universe() | TypeMeta():
            pass
        case tuple() | list():
            for e in obj:
                _fv(e, bound, acc)
        case _:
            raise TypeError(f"not syntax: {obj!r}")


def constants_of(obj, acc: Optional[set] = None) -> set:
    """Names of constants, families and recursion constants occurring in obj."""
    if acc is None:
        acc = set()
    match obj:
        case Lam(_, body):
            constants_of(body, acc)
        case Neutral(head, spine):
            if isinstance(head, (Const, RecConst)):
                acc.add(head.name)
            for e in spine:
                constants_of(e, acc)
        case Pi(_, dom, cod):
            constants_of(dom, acc)
            constants_of(cod, acc)
        case Atomic(fam, spine):
            acc.add(fam)
            for e in spine:
                constants_of(e, acc)
        case _:
            pass
    return acc


def has_metas(obj) -> bool:
    match obj:
        case Lam(_, body):
            return has_metas(body)
        case Neutral(head, spine):
            return isinstance(head, Meta) or any(has_metas(e) for e in spine)
        case Pi(_, dom, cod):
            return has_metas(dom) or has_metas(cod)
        case Atomic(_, spine):
            return any(has_metas(e) for e in spine)
        case TypeMeta():
            return True
        case RecDef(_, ty, body):
            return has_metas(ty) or has_metas(body)
        case Constructor(_, ty):
            return has_metas(ty)
        case TypeFamily(_, k):
            return has_metas(k)
        case _:
            return False


# --------------------------------------------------------------------------
# Alpha-equivalence


def alpha_equal(a, b) -> bool:
    """Syntactic equality up to renaming of bound variables."""
    return _alpha(a, b, {}, {})


def _alpha(a, b, la, lb) -> bool:
    # la/lb map bound names to binding depth
    match a, b:
        case Lam(x, m), Lam(y, n):
            d = len(la)
            return _alpha(m, n, {**la, x: d}, {**lb, y: d})
        case Neutral(h1, s1), Neutral(h2, s2):
            if len(s1) != len(s2):
                return False
            if isinstance(h1, Var) and isinstance(h2, Var):
                if la.get(h1.name, h1.name) != lb.get(h2.name, h2.name):
                    return False
            elif h1 != h2:
                return False
            return all(_alpha(e1, e2, la, lb) for e1, e2 in zip(s1, s2))
        case PrepatArg(x), PrepatArg(y):
            return la.get(x, x) == lb.get(y, y)
        case Pi(x, d1, c1, p1), Pi(y, d2, c2, p2):
            if p1 != p2 or not _alpha(d1, d2, la, lb):
                return False
            d = len(la)
            return _alpha(c1, c2, {**la, x: d}, {**lb, y: d})
        case Atomic(f1, s1), Atomic(f2, s2):
            return f1 == f2 and len(s1) == len(s2) and all(
                _alpha(e1, e2, la, lb) for e1, e2 in zip(s1, s2))
        case Universe(), Universe():
            return a == b
        case TypeMeta(), TypeMeta():
            return a == b
        case TypeFamily(n1, k1), TypeFamily(n2, k2):
            return n1 == n2 and _alpha(k1, k2, la, lb)
        case Constructor(n1, t1), Constructor(n2, t2):
            return n1 == n2 and _alpha(t1, t2, la, lb)
        case RecDef(n1, t1, m1), RecDef(n2, t2, m2):
            return n1 == n2 and _alpha(t1, t2, la, lb) and _alpha(m1, m2, la, lb)
    return False


# --------------------------------------------------------------------------
# Printing in the concrete syntax


def show(obj, annotate: bool = False) -> str:
    """Render syntax in the Twelf-style concrete syntax.

    With ``annotate`` the prepattern flavour is made visible as ``{x :^ A}``,
    ``^A -> B`` and ``^x``; that form is for diagnostics and does not re-parse.
    """
    return _show(obj, annotate, 0)


def _name(x: str) -> str:
    return x


def _show(obj, ann, prec) -> str:
    # prec: 0 = top, 1 = arrow lhs, 2 = application argument
    match obj:
        case Lam(var, body):
            s = f"[{_name(var)}] {_show(body, ann, 0)}"
            return f"({s})" if prec > 0 else s
        case Neutral(head, spine):
            h = _show_head(head)
            if not spine:
                return h
            s = " ".join([h] + [_show(e, ann, 2) for e in spine])
            return f"({s})" if prec >= 2 else s
        case PrepatArg(var):
            return f"^{var}" if ann else _name(var)
        case Pi(var, dom, cod, prepat):
            dependent = var in free_vars(cod)
            if prepat and ann and dependent:
                s = f"{{{_name(var)} :^ {_show(dom, ann, 0)}}} {_show(cod, ann, 0)}"
            elif prepat and ann:
                s = f"^{_show(dom, ann, 1)} -> {_show(cod, ann, 0)}"
            elif dependent:
                s = f"{{{_name(var)} : {_show(dom, ann, 0)}}} {_show(cod, ann, 0)}"
            else:
                s = f"{_show(dom, ann, 1)} -> {_show(cod, ann, 0)}"
            return f"({s})" if prec > 0 else s
        case Atomic(fam, spine):
            if not spine:
                return fam
            s = " ".join([fam] + [_show(e, ann, 2) for e in spine])
            return f"({s})" if prec >= 2 else s
        case Universe(co):
            return "cotype" if co else "type"
        case TypeMeta(i):
            return f"?T{i}"
        case TypeFamily(name, kind):
            return f"{name} : {_show(kind, ann, 0)}."
        case Constructor(name, ty):
            return f"{name} : {_show(ty, ann, 0)}."
        case RecDef(name, ty, body):
            return f"{name} : {_show(ty, ann, 0)} = {_show(body, ann, 0)}."
        case Signature():
            return "\n".join(_show(d, ann, 0) for d in obj.decls)
        case Context():
            return repr(obj)
    raise TypeError(f"cannot show {obj!r}")


def _show_head(h) -> str:
    match h:
        case Var(n) | Const(n) | RecConst(n):
            return _name(n)
        case Meta(i):
            return f"?{i}"
    raise TypeError(f"not a head: {h!r}")


def eta_expand(head: Head, ty, prefix: tuple = (), used: Optional[set] = None) -> Term:
    """Canonical (eta-long) form of ``head`` applied to ``prefix`` at type ``ty``.

    New binders get readable names distinct from ``used`` (default: the free
    variables of ``ty`` and ``prefix``) and from each other.
    """
    from .subst import rename  # local import: subst depends on this module

    if used is None:
        used = free_vars((ty, tuple(prefix)))
        if isinstance(head, Var):
            used.add(head.name)
    binders = []
    spine = list(prefix)
    while isinstance(ty, Pi):
        z = readable_name(ty.var, used)
        used.add(z)
        binders.append(z)
        if ty.prepat:
            spine.append(PrepatArg(z))
        else:
            spine.append(eta_expand(Var(z), ty.dom, (), used))
        ty = rename(z, ty.var, ty.cod)
    term: Term = Neutral(head, tuple(spine))
    for z in reversed(binders):
        term = Lam(z, term)
    return term


def readable_name(base: str, used) -> str:
    """``base`` without any freshness suffix, numbered apart from ``used``."""
    base = base.split("@", 1)[0]
    if base in ("", "_"):
        base = "x"
    name, k = base, 0
    while name in used:
        k += 1
        name = f"{base}{k}"
    return name
