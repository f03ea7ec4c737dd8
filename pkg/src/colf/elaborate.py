"""Elaboration of surface declarations into core syntax.

The elaborator is untrusted: its output is always re-checked by the kernel.
It performs four jobs.

* Free capitalised identifiers in a constant's classifier become leading
  implicit binders, and every use of the constant receives fresh holes for
  them.
* Holes (``_``, omitted binder types, implicit arguments) are solved by
  higher-order pattern unification; a hole applied to anything but distinct
  variables is postponed and reported if it never becomes solvable.
* Holes still unsolved in a constant's classifier are generalised into extra
  leading implicit binders.
* Binders are given their prepattern flavour.  The telescope of a recursive
  definition's type is prepattern.  When a variable bound by an ordinary
  binder is needed in a prepattern position, that binder is flipped and
  elaboration restarts; this repeats until nothing changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import parser as ps
from .equality import UNEQUAL, EqualityChecker
from .subst import STAR, Arrow, SubstError, hsubst, reduce_spine, rename, rename_many
from .syntax import (
    COTYPE, TYPE, Atomic, Const, Constructor, Lam, Meta, Neutral, Pi, PrepatArg,
    RecConst, RecDef, Signature, SignatureError, TypeFamily, TypeMeta, Universe,
    Var, fresh, free_vars, show,
)

MAX_UNFOLDS = 200


class ElabError(Exception):
    """Elaboration failure attributed to a source span."""

    verdict = "type-error"

    def __init__(self, message: str, span=None):
        super().__init__(message)
        self.message = message
        self.span = span


class PrepatternViolation(ElabError):
    verdict = "prepattern-error"


class _UnifyFail(Exception):
    pass


class _Postpone(BaseException):
    """The constraint is outside the pattern fragment for now."""


class _Flip(BaseException):
    """Restart elaboration with the binder ``tag`` made prepattern."""

    def __init__(self, tag):
        super().__init__(tag)
        self.tag = tag


# --------------------------------------------------------------------------
# Implicit binders


def free_capitals(e, constants=frozenset()) -> list:
    """Free capitalised identifiers of a surface expression, in order."""
    out: dict = {}

    def go(e, bound):
        match e:
            case ps.CapitalVar(name):
                if name not in bound and name not in constants:
                    out.setdefault(name, None)
            case ps.Application(items):
                for it in items:
                    go(it, bound)
            case ps.Arrow(lhs, rhs):
                go(lhs, bound)
                go(rhs, bound)
            case ps.PiBinder(var, ann, body) | ps.LamBinder(var, ann, body):
                if ann is not None:
                    go(ann, bound)
                go(body, bound | {var})
            case _:
                pass

    go(e, frozenset())
    return list(out)


def abstract_implicits(d: ps.SurfaceDecl, constants=frozenset()) -> ps.SurfaceDecl:
    """Bind every free capitalised identifier of the classifier with ``{X : _}``.

    Binders are added outermost-first in order of first occurrence; names that
    are declared constants are left alone.
    """
    caps = free_capitals(d.classifier, constants)
    e = d.classifier
    for name in reversed(caps):
        e = ps.PiBinder(name, ps.Underscore(), e, e.span)
    return ps.SurfaceDecl(d.name, e, d.body, d.span)


def is_kind_expr(e) -> bool:
    match e:
        case ps.PiBinder(_, _, body):
            return is_kind_expr(body)
        case ps.Arrow(_, rhs):
            return is_kind_expr(rhs)
        case ps.Type() | ps.Cotype():
            return True
    return False


# --------------------------------------------------------------------------
# State


@dataclass
class MetaInfo:
    scope: tuple  # (name, type, prepat) triples
    type: object
    hint: str
    span: object
    solution: Optional[object] = None


@dataclass
class TypeMetaInfo:
    scope: frozenset
    hint: str
    span: object
    solution: Optional[object] = None


@dataclass(frozen=True)
class Entry:
    name: str
    type: object
    prepat: bool
    tag: object


class ECtx:
    """Elaboration context: surface names mapped to core bindings."""

    __slots__ = ("entries", "by_surface")

    def __init__(self, entries=(), by_surface=None):
        self.entries = tuple(entries)
        self.by_surface = dict(by_surface or {})

    def lookup(self, surface_name: str) -> Optional[Entry]:
        return self.by_surface.get(surface_name)

    def names(self) -> tuple:
        return tuple(e.name for e in self.entries)

    def extend(self, surface_name: str, type_, prepat: bool, tag) -> tuple:
        used = {e.name for e in self.entries}
        base = surface_name.split("@", 1)[0]
        if base in ("", "_"):
            base = "x"
        name, k = base, 0
        while name in used:
            k += 1
            name = f"{base}_{k}"
        ent = Entry(name, type_, prepat, tag)
        by = dict(self.by_surface)
        by[surface_name] = ent
        return ECtx(self.entries + (ent,), by), name


@dataclass
class _Frame:
    index: int
    site: str  # 'classifier' or 'body'
    metas: list = field(default_factory=list)
    tmetas: list = field(default_factory=list)
    postponed: list = field(default_factory=list)


@dataclass
class ElabResult:
    signature: Signature
    errors: dict
    flips: frozenset
    order: list
    duplicates: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors and not self.duplicates


class _SigView:
    """What the equality checker needs: definitions, elaborated on demand."""

    def __init__(self, el: "Elaborator"):
        self.el = el

    def definition(self, name: str) -> RecDef:
        d = self.el.core.get(name)
        if not isinstance(d, RecDef):
            raise SignatureError(f"{name} is not an available recursion constant")
        body = self.el.body_if_available(name)
        if body is None:
            raise SignatureError(f"definition of {name} is not available yet")
        return RecDef(name, d.type, body)


# --------------------------------------------------------------------------
# The elaborator


class Elaborator:
    def __init__(self, surface, flips=frozenset()):
        self.surface = list(surface)
        self.flips = frozenset(flips)
        self.metas: dict = {}
        self.tmetas: dict = {}
        self.counter = 0
        self.core: dict = {}
        self.index: dict = {}
        self.kinds: dict = {}  # name -> 'family' | 'constructor' | 'recdef'
        self.bodies: dict = {}
        self.body_state: dict = {}
        self.errors: dict = {}
        self.duplicates: dict = {}  # source index -> error
        self.frames: list = []
        self.tag_seq = 0
        self.decl_name = ""
        self.view = _SigView(self)
        self._taus: dict = {}

    # driver -----------------------------------------------------------

    def run(self) -> ElabResult:
        for i, sd in enumerate(self.surface):
            if sd.name in self.index:
                self.duplicates[i] = ElabError(f"duplicate declaration of {sd.name}", sd.span)
                continue
            self.index[sd.name] = i
        for i, sd in enumerate(self.surface):
            if self.index.get(sd.name) != i or sd.name in self.errors:
                continue
            try:
                self.core[sd.name] = self.elab_classifier(i, sd)
            except ElabError as e:
                self.errors[sd.name] = e
        for i, sd in enumerate(self.surface):
            if sd.body is not None and sd.name in self.core and self.index.get(sd.name) == i:
                self.ensure_body(sd.name)
        decls = []
        for i, sd in enumerate(self.surface):
            if self.index.get(sd.name) != i or sd.name in self.errors:
                continue
            d = self.core.get(sd.name)
            if d is None:
                continue
            if isinstance(d, RecDef):
                d = RecDef(d.name, d.type, self.bodies[d.name], d.span, d.implicit)
            decls.append(d)
        return ElabResult(Signature(decls), self.errors, self.flips,
                          [sd.name for sd in self.surface], self.duplicates)

    def ensure_body(self, name: str):
        state = self.body_state.get(name)
        if state == "done":
            return self.bodies[name]
        if state in ("active", "failed"):
            return None
        self.body_state[name] = "active"
        i = self.index[name]
        sd = self.surface[i]
        d = self.core[name]
        saved = self.decl_name
        self.decl_name = name
        self.frames.append(_Frame(i, "body"))
        try:
            body = self.check(ECtx(), sd.body, d.type)
            self.retry(final=True)
            body = self.zonk(body)
            self.require_solved(body, sd.span)
        except ElabError as e:
            self.errors[name] = e
            self.body_state[name] = "failed"
            return None
        except SubstError as e:
            self.errors[name] = ElabError(f"ill-typed term: {e}", sd.span)
            self.body_state[name] = "failed"
            return None
        finally:
            self.frames.pop()
            self.decl_name = saved
        self.bodies[name] = body
        self.body_state[name] = "done"
        return body

    def body_if_available(self, name: str):
        if self.body_state.get(name) == "done":
            return self.bodies[name]
        if name in self.core and self.body_state.get(name) is None:
            return self.ensure_body(name)
        return None

    @property
    def frame(self) -> _Frame:
        return self.frames[-1]

    # declarations ------------------------------------------------------

    def elab_classifier(self, i: int, sd: ps.SurfaceDecl):
        self.decl_name = sd.name
        self.tag_seq = 0
        is_rec = sd.body is not None
        is_kind = is_kind_expr(sd.classifier)
        if is_rec and is_kind:
            raise ElabError(f"type family {sd.name} cannot have a definition", sd.span)
        n_caps = 0
        if not is_rec:
            earlier = {name for name, j in self.index.items() if j < i}
            caps = free_capitals(sd.classifier, earlier)
            n_caps = len(caps)
            sd = abstract_implicits(sd, earlier)
        self.frames.append(_Frame(i, "classifier"))
        try:
            if is_kind:
                cls = self.elab_kind(ECtx(), sd.classifier)
            else:
                cls = self.elab_type(ECtx(), sd.classifier, force_prepat=is_rec)
            self.retry(final=True)
            cls = self.zonk(cls)
            n_gen = 0
            if not is_rec:
                cls, n_gen = self.generalize(cls, sd)
            self.require_solved(cls, sd.span)
        except SubstError as e:
            raise ElabError(f"ill-typed classifier: {e}", sd.span) from None
        finally:
            self.frames.pop()
        implicit = n_caps + n_gen
        if is_kind:
            self.kinds[sd.name] = "family"
            return TypeFamily(sd.name, cls, sd.span, implicit)
        if is_rec:
            self.kinds[sd.name] = "recdef"
            return RecDef(sd.name, cls, None, sd.span, 0)
        self.kinds[sd.name] = "constructor"
        return Constructor(sd.name, cls, sd.span, implicit)

    def require_solved(self, obj, span):
        obj = self.zonk(obj)
        for n in _metas_in(obj):
            info = self.metas[n]
            raise ElabError(
                f"cannot infer implicit argument {info.hint}; requires explicit argument here",
                info.span or span)
        for n in _tmetas_in(obj):
            info = self.tmetas[n]
            raise ElabError(f"cannot infer the type of {info.hint}", info.span or span)

    # names -------------------------------------------------------------

    def new_tag(self):
        self.tag_seq += 1
        return (self.decl_name, self.tag_seq)

    def lookup(self, name: str, span):
        if name not in self.index:
            raise ElabError(f"unknown constant {name}", span)
        if name in self.errors and name not in self.core:
            raise ElabError(f"{name} refers to an ill-formed declaration", span)
        d = self.core.get(name)
        j = self.index[name]
        fr = self.frame
        if d is None:
            raise ElabError(f"{name} is used before its declaration", span)
        if j < fr.index:
            return d
        if fr.site == "body" and isinstance(d, RecDef):
            return d
        raise ElabError(f"{name} is used before its declaration", span)

    # kinds and types -------------------------------------------------

    def elab_kind(self, g: ECtx, e):
        match e:
            case ps.Type():
                return TYPE
            case ps.Cotype():
                return COTYPE
            case ps.PiBinder(var, ann, body):
                dom = self.elab_dom(g, var, ann, e)
                tag = self.new_tag()
                prepat = tag in self.flips
                g2, x = g.extend(var, dom, prepat, tag)
                return Pi(x, dom, self.elab_kind(g2, body), prepat, tag)
            case ps.Arrow(lhs, rhs):
                dom = self.elab_type(g, lhs)
                tag = self.new_tag()
                return Pi(fresh("_"), dom, self.elab_kind(g, rhs), tag in self.flips, tag)
        raise ElabError(f"expected a kind, found {ps.show_expr(e)}", e.span)

    def elab_dom(self, g, var, ann, node):
        if ann is None or isinstance(ann, ps.Underscore):
            return self.new_tmeta(g, var, node.span)
        return self.elab_type(g, ann)

    def elab_type(self, g: ECtx, e, force_prepat: bool = False):
        match e:
            case ps.PiBinder(var, ann, body):
                dom = self.elab_dom(g, var, ann, e)
                tag = self.new_tag()
                prepat = force_prepat or tag in self.flips
                g2, x = g.extend(var, dom, prepat, tag)
                return Pi(x, dom, self.elab_type(g2, body, force_prepat), prepat, tag)
            case ps.Arrow(lhs, rhs):
                dom = self.elab_type(g, lhs)
                tag = self.new_tag()
                prepat = force_prepat or tag in self.flips
                return Pi(fresh("_"), dom, self.elab_type(g, rhs, force_prepat), prepat, tag)
            case ps.Underscore():
                return self.new_tmeta(g, "_", e.span)
            case ps.Ident() | ps.CapitalVar() | ps.Application():
                head, args = _split(e)
                if not isinstance(head, (ps.Ident, ps.CapitalVar)):
                    raise ElabError(f"expected a type, found {ps.show_expr(e)}", e.span)
                if g.lookup(head.name) is not None:
                    raise ElabError(f"variable {head.name} used as a type family", head.span)
                d = self.lookup(head.name, head.span)
                if not isinstance(d, TypeFamily):
                    raise ElabError(f"{head.name} is not a type family", head.span)
                spine, k = self.elab_spine(g, d.kind, args, d.implicit, e)
                k = self.zonk(k)
                if not isinstance(k, Universe):
                    raise ElabError(f"type family {head.name} is not fully applied", e.span)
                return Atomic(head.name, tuple(spine))
        raise ElabError(f"expected a type, found {ps.show_expr(e)}", e.span)

    # spines ------------------------------------------------------------

    def elab_spine(self, g: ECtx, ty, args, implicit: int, node):
        entries = []
        for _ in range(implicit):
            ty = self.zonk(ty)
            if not isinstance(ty, Pi) or ty.prepat:
                raise ElabError("malformed implicit binder", node.span)
            m = self.new_meta(g, ty.dom, ty.var, node.span)
            entries.append(m)
            ty = self.inst(ty, m)
        for a in args:
            ty = self.zonk(ty)
            if isinstance(ty, TypeMeta):
                info = self.tmetas[ty.id]
                d = self._tmeta_like(info)
                c = self._tmeta_like(info)
                self.tmetas[ty.id].solution = Pi(fresh("_"), d, c)
                ty = self.zonk(ty)
            if not isinstance(ty, Pi):
                raise ElabError(f"too many arguments: {ps.show_expr(a)} is not expected here",
                                a.span)
            if ty.prepat:
                entry = self.prepat_arg(g, a, ty)
            else:
                entry = self.check(g, a, ty.dom)
            entries.append(entry)
            ty = self.inst(ty, entry)
        return entries, ty

    def prepat_arg(self, g: ECtx, a, pi: Pi):
        ent = g.lookup(a.name) if isinstance(a, (ps.Ident, ps.CapitalVar)) else None
        if ent is None:
            raise PrepatternViolation(
                f"{ps.show_expr(a)} is not a variable but stands in a prepattern position "
                "(argument of a recursion constant)", a.span)
        if not ent.prepat:
            if ent.tag is not None and ent.tag not in self.flips:
                raise _Flip(ent.tag)
            raise PrepatternViolation(
                f"variable {a.name} is not a prepattern variable", a.span)
        self.constrain_type(g.names(), ent.type, pi.dom, a.span)
        return PrepatArg(ent.name)

    def inst(self, pi: Pi, entry):
        if isinstance(entry, PrepatArg):
            return rename(entry.var, pi.var, pi.cod)
        return hsubst(entry, pi.var, self.erase(pi.dom), pi.cod)

    # terms -------------------------------------------------------------

    def check(self, g: ECtx, e, a):
        a = self.zonk(a)
        match e:
            case ps.LamBinder(var, ann, body):
                if not isinstance(a, Pi):
                    raise ElabError(
                        f"abstraction checked against non-function type {show(a)}", e.span)
                if ann is not None and not isinstance(ann, ps.Underscore):
                    self.constrain_type(g.names(), self.elab_type(g, ann), a.dom, ann.span)
                g2, x = g.extend(var, a.dom, a.prepat, a.tag)
                return Lam(x, self.check(g2, body, rename(x, a.var, a.cod)))
            case ps.Underscore():
                return self.new_meta(g, a, "_", e.span)
        return self.check_app(g, e, a)

    def check_app(self, g: ECtx, e, a):
        head, args = _split(e)
        if isinstance(head, ps.Underscore):
            raise ElabError("a hole cannot be applied; requires explicit argument here", head.span)
        if not isinstance(head, (ps.Ident, ps.CapitalVar)):
            raise ElabError(f"{ps.show_expr(head)} cannot be applied here", head.span)
        ent = g.lookup(head.name)
        if ent is not None:
            hd, ty, implicit = Var(ent.name), ent.type, 0
            ty0 = self.zonk(ty)
            if not args and isinstance(ty0, TypeMeta) and isinstance(a, Pi):
                self.constrain_type(g.names(), ty0, a, head.span)
        else:
            if isinstance(head, ps.CapitalVar) and head.name not in self.index:
                raise ElabError(f"unbound variable {head.name}", head.span)
            d = self.lookup(head.name, head.span)
            match d:
                case Constructor():
                    hd = Const(d.name)
                case RecDef():
                    hd = RecConst(d.name)
                case _:
                    raise ElabError(f"type family {head.name} used as a term", head.span)
            ty, implicit = d.type, d.implicit
        entries, ty = self.elab_spine(g, ty, args, implicit, e)
        binders = []
        gcur = g
        while True:
            ty = self.zonk(ty)
            if not isinstance(ty, Pi):
                break
            a = self.zonk(a)
            if isinstance(a, TypeMeta):
                self.constrain_type(gcur.names(), a, ty, e.span)
                a = self.zonk(a)
            if not isinstance(a, Pi):
                raise ElabError(
                    f"{ps.show_expr(e)} has type {show(ty)} but {show(a)} was expected "
                    "(not enough arguments)", e.span)
            if ty.prepat and not a.prepat:
                if a.tag is not None and a.tag not in self.flips:
                    raise _Flip(a.tag)
                raise PrepatternViolation(
                    f"{ps.show_expr(e)} expects a prepattern argument where an ordinary "
                    "one is supplied", e.span)
            self.constrain_type(gcur.names(), a.dom, ty.dom, e.span)
            gcur, z = gcur.extend(a.var, a.dom, a.prepat, a.tag)
            entry = PrepatArg(z) if ty.prepat else self.eta_var(z, a.dom)
            entries.append(entry)
            ty = self.inst(ty, entry)
            a = rename(z, a.var, a.cod)
            binders.append(z)
        a = self.zonk(a)
        if isinstance(a, Pi):
            raise ElabError(f"{ps.show_expr(e)} has type {show(ty)} but {show(a)} was expected",
                            e.span)
        self.constrain_type(gcur.names(), ty, a, e.span)
        term = Neutral(hd, tuple(entries))
        for z in reversed(binders):
            term = Lam(z, term)
        return term

    def eta_var(self, z: str, ty):
        ty = self.zonk(ty)
        if not isinstance(ty, Pi):
            return Neutral(Var(z), ())
        names = []
        spine = []
        body_ty = ty
        while isinstance(body_ty, Pi):
            w = fresh(body_ty.var)
            names.append(w)
            if body_ty.prepat:
                spine.append(PrepatArg(w))
            else:
                spine.append(self.eta_var(w, body_ty.dom))
            body_ty = self.zonk(rename(w, body_ty.var, body_ty.cod))
        term = Neutral(Var(z), tuple(spine))
        for w in reversed(names):
            term = Lam(w, term)
        return term

    # metavariables -----------------------------------------------------

    def new_meta(self, g: ECtx, a, hint: str, span):
        a = self.zonk(a)
        if isinstance(a, Pi):
            g2, z = g.extend(a.var, a.dom, a.prepat, a.tag)
            return Lam(z, self.new_meta(g2, rename(z, a.var, a.cod), hint, span))
        self.counter += 1
        n = self.counter
        scope = tuple((e.name, e.type, e.prepat) for e in g.entries)
        self.metas[n] = MetaInfo(scope, a, hint.split("@", 1)[0], span)
        if self.frames:
            self.frame.metas.append(n)
        args = tuple(PrepatArg(e.name) if e.prepat else self.eta_var(e.name, e.type)
                     for e in g.entries)
        return Neutral(Meta(n), args)

    def new_tmeta(self, g: ECtx, hint: str, span):
        self.counter += 1
        n = self.counter
        self.tmetas[n] = TypeMetaInfo(frozenset(g.names()), hint, span)
        if self.frames:
            self.frame.tmetas.append(n)
        return TypeMeta(n)

    def _tmeta_like(self, info: TypeMetaInfo):
        self.counter += 1
        self.tmetas[self.counter] = TypeMetaInfo(info.scope, info.hint, info.span)
        return TypeMeta(self.counter)

    def meta_tau(self, n: int):
        tau = self._taus.get(n)
        if tau is not None:
            return tau
        info = self.metas[n]
        tau = self.erase(info.type)
        for _, ty, prepat in reversed(info.scope):
            tau = Arrow(STAR if prepat else self.erase(ty), tau)
        if not _has_tmeta_free(self, info):
            self._taus[n] = tau
        return tau

    def erase(self, a):
        a = self.zonk(a)
        match a:
            case Pi(_, dom, cod, prepat):
                return Arrow(STAR if prepat else self.erase(dom), self.erase(cod))
        return STAR

    def zonk(self, obj):
        match obj:
            case Neutral(Meta(n), spine):
                spine2 = tuple(self.zonk(e) for e in spine)
                info = self.metas[n]
                if info.solution is None:
                    return obj if spine2 == spine else Neutral(obj.head, spine2)
                return self.zonk(reduce_spine(spine2, self.meta_tau(n), info.solution))
            case Neutral(head, spine):
                if not spine:
                    return obj
                spine2 = tuple(self.zonk(e) for e in spine)
                return obj if all(x is y for x, y in zip(spine, spine2)) else Neutral(head, spine2)
            case Lam(x, body):
                b2 = self.zonk(body)
                return obj if b2 is body else Lam(x, b2)
            case PrepatArg() | Universe():
                return obj
            case Atomic(fam, spine):
                spine2 = tuple(self.zonk(e) for e in spine)
                return obj if all(x is y for x, y in zip(spine, spine2)) else Atomic(fam, spine2)
            case Pi(x, dom, cod, prepat, tag):
                d2, c2 = self.zonk(dom), self.zonk(cod)
                return obj if (d2 is dom and c2 is cod) else Pi(x, d2, c2, prepat, tag)
            case TypeMeta(n):
                sol = self.tmetas[n].solution
                return obj if sol is None else self.zonk(sol)
        raise TypeError(f"cannot zonk {obj!r}")

    # constraints -------------------------------------------------------

    def constrain_type(self, theta, a1, a2, span):
        self._constrain(("type", tuple(theta), a1, a2, span))

    def constrain_term(self, theta, m1, m2, span):
        self._constrain(("term", tuple(theta), m1, m2, span))

    def _constrain(self, c):
        try:
            self._attempt(c)
        except _Postpone:
            self.frame.postponed.append(c)
            return
        if self.frame.postponed:
            self.retry()

    def _attempt(self, c):
        kind, theta, a, b, span = c
        self._budget = MAX_UNFOLDS
        try:
            if kind == "type":
                self.unify_type(theta, a, b)
            else:
                self.unify(theta, a, b)
        except _UnifyFail as e:
            raise ElabError(f"{e} (while unifying {show(self.zonk(a))} with {show(self.zonk(b))})",
                            span) from None

    def retry(self, final: bool = False):
        fr = self.frame
        progress = True
        while progress and fr.postponed:
            progress = False
            pending, fr.postponed = fr.postponed, []
            for c in pending:
                try:
                    self._attempt(c)
                    progress = True
                except _Postpone:
                    fr.postponed.append(c)
        if final and fr.postponed:
            kind, theta, a, b, span = fr.postponed[0]
            raise ElabError(
                f"cannot solve {show(self.zonk(a))} = {show(self.zonk(b))}: "
                "requires explicit argument here", span)

    # unification ---------------------------------------------------------

    def unify_type(self, theta, a, b):
        a, b = self.zonk(a), self.zonk(b)
        if a == b:
            return
        match a, b:
            case TypeMeta(n), _:
                self.solve_tmeta(n, b)
            case _, TypeMeta(n):
                self.solve_tmeta(n, a)
            case Atomic(f1, s1), Atomic(f2, s2):
                if f1 != f2 or len(s1) != len(s2):
                    raise _UnifyFail(f"type mismatch: {show(a)} vs {show(b)}")
                for x, y in zip(s1, s2):
                    self.unify_entry(theta, x, y)
            case Pi(x, d1, c1, p1, t1), Pi(y, d2, c2, p2, t2):
                if p1 != p2:
                    tag = t2 if p1 else t1
                    if tag is not None and tag not in self.flips:
                        raise _Flip(tag)
                    raise _UnifyFail(
                        f"prepattern flavour mismatch: {show(a, True)} vs {show(b, True)}")
                self.unify_type(theta, d1, d2)
                z = _fresh_in(theta, x)
                self.unify_type(theta + (z,), rename(z, x, c1), rename(z, y, c2))
            case Universe(), Universe():
                raise _UnifyFail(f"kind mismatch: {show(a)} vs {show(b)}")
            case _:
                raise _UnifyFail(f"type mismatch: {show(a)} vs {show(b)}")

    def unify_entry(self, theta, x, y):
        if isinstance(x, PrepatArg) and isinstance(y, PrepatArg):
            if x.var != y.var:
                raise _UnifyFail(f"prepattern arguments {x.var} and {y.var} differ")
            return
        if isinstance(x, PrepatArg):
            x = Neutral(Var(x.var))
        if isinstance(y, PrepatArg):
            y = Neutral(Var(y.var))
        self.unify(theta, x, y)

    def unify(self, theta, a, b):
        a, b = self.zonk(a), self.zonk(b)
        if a == b:
            return
        match a, b:
            case Lam(x, m), Lam(y, n):
                z = _fresh_in(theta, x)
                self.unify(theta + (z,), rename(z, x, m), rename(z, y, n))
                return
            case Neutral(Meta(), _), _:
                self.solve_flex(theta, a, b)
                return
            case _, Neutral(Meta(), _):
                self.solve_flex(theta, b, a)
                return
            case Neutral(), Neutral():
                pass
            case _:
                raise _UnifyFail(f"{show(a)} and {show(b)} differ")
        ma, mb = _has_meta(a), _has_meta(b)
        if not ma and not mb:
            res = EqualityChecker(self.view).equal_terms(a, b, theta)
            if res.verdict == UNEQUAL:
                raise _UnifyFail(f"{show(a)} and {show(b)} are not equal ({res.reason})")
            return  # equal, or undecidable here: the kernel decides
        if isinstance(a.head, RecConst):
            self.unify(theta, self.unfold(a), b)
            return
        if isinstance(b.head, RecConst):
            self.unify(theta, a, self.unfold(b))
            return
        if a.head != b.head or len(a.spine) != len(b.spine):
            raise _UnifyFail(f"{show(a)} and {show(b)} differ")
        for x, y in zip(a.spine, b.spine):
            self.unify_entry(theta, x, y)

    def unfold(self, r: Neutral):
        self._budget -= 1
        if self._budget < 0:
            raise _Postpone()
        body = self.body_if_available(r.head.name)
        if body is None:
            raise _Postpone()
        d = self.core[r.head.name]
        return reduce_spine(r.spine, self.erase(d.type), body)

    def solve_flex(self, theta, f: Neutral, t):
        n = f.head.id
        if isinstance(t, Neutral) and t.head == f.head:
            if len(t.spine) == len(f.spine) and all(
                    _as_var(x) is not None and _as_var(x) == _as_var(y)
                    for x, y in zip(f.spine, t.spine)):
                return
            raise _Postpone()
        vars_ = [_as_var(a) for a in f.spine]
        if any(v is None for v in vars_) or len(set(vars_)) != len(vars_):
            raise _Postpone()
        if n in _metas_in(t):
            raise _UnifyFail(f"occurs check: ?{self.metas[n].hint} occurs in {show(t)}")
        t = self.prune(t, set(vars_))
        info = self.metas[n]
        scope_names = [s[0] for s in info.scope]
        body = rename_many(dict(zip(vars_, scope_names)), t)
        sol = body
        for z in reversed(scope_names):
            sol = Lam(z, sol)
        info.solution = sol

    def solve_tmeta(self, n: int, a):
        info = self.tmetas[n]
        if n in _tmetas_in(a):
            raise _UnifyFail("occurs check on a type")
        a = self.prune(a, set(info.scope))
        info.solution = a

    def prune(self, t, allowed: set):
        """Make every free variable of t fall in ``allowed`` by pruning holes."""
        def go(t, bound):
            match t:
                case Lam(x, body):
                    go(body, bound | {x})
                case PrepatArg(x):
                    if x not in allowed and x not in bound:
                        raise _UnifyFail(f"variable {x} escapes its scope")
                case Neutral(Meta(m), spine):
                    keep = []
                    for i, e in enumerate(spine):
                        fv = free_vars(e)
                        if fv <= (allowed | bound):
                            keep.append(True)
                        elif _as_var(e) is not None and not (fv & bound):
                            keep.append(False)
                        else:
                            raise _Postpone()
                    if not all(keep):
                        self.prune_meta(m, keep)
                case Neutral(head, spine):
                    if isinstance(head, Var) and head.name not in allowed and head.name not in bound:
                        raise _UnifyFail(f"variable {head.name} escapes its scope")
                    for e in spine:
                        go(e, bound)
                case Atomic(_, spine):
                    for e in spine:
                        go(e, bound)
                case Pi(x, dom, cod):
                    go(dom, bound)
                    go(cod, bound | {x})
                case TypeMeta(m):
                    if not self.tmetas[m].scope <= (allowed | bound):
                        raise _Postpone()
                case _:
                    pass

        t = self.zonk(t)
        go(t, frozenset())
        return self.zonk(t)

    def prune_meta(self, m: int, keep: list):
        info = self.metas[m]
        kept = [s for s, k in zip(info.scope, keep) if k]
        dropped = {s[0] for s, k in zip(info.scope, keep) if not k}
        for _, ty, _ in kept:
            if free_vars(self.zonk(ty)) & dropped:
                raise _Postpone()
        if free_vars(self.zonk(info.type)) & dropped:
            raise _Postpone()
        self.counter += 1
        n2 = self.counter
        self.metas[n2] = MetaInfo(tuple(kept), info.type, info.hint, info.span)
        if self.frames:
            self.frame.metas.append(n2)
        args = tuple(PrepatArg(s[0]) if s[2] else self.eta_var(s[0], s[1]) for s in kept)
        sol = Neutral(Meta(n2), args)
        for s in reversed(info.scope):
            sol = Lam(s[0], sol)
        info.solution = sol

    # generalisation --------------------------------------------------

    def generalize(self, cls, sd):
        cls = self.zonk(cls)
        pending = _metas_in(cls)
        if not pending:
            return cls, 0
        order: list = []
        seen: set = set()

        def visit(n):
            if n in seen:
                return
            seen.add(n)
            info = self.metas[n]
            deps = _metas_in(self.zonk(info.type))
            for _, ty, _ in info.scope:
                deps += _metas_in(self.zonk(ty))
            for d in deps:
                visit(d)
            order.append(n)

        for n in pending:
            visit(n)
        used = _binder_names(cls) | free_vars(cls) | set(self.index)
        gens = []
        for n in order:
            info = self.metas[n]
            if info.solution is not None:
                continue
            base = info.hint if info.hint not in ("", "_") else "X"
            name, k = base, 0
            while name in used:
                k += 1
                name = f"{base}_{k}"
            used.add(name)
            bty = self.zonk(info.type)
            for sname, sty, sprep in reversed(info.scope):
                bty = Pi(sname, self.zonk(sty), bty, sprep)
            bty = self.zonk(bty)
            if _tmetas_in(bty):
                raise ElabError(f"cannot infer the type of implicit argument {info.hint}",
                                info.span or sd.span)
            args = tuple(PrepatArg(s[0]) if s[2] else self.eta_var(s[0], s[1]) for s in info.scope)
            sol = self.eta_var_applied(name, bty, args)
            for s in reversed(info.scope):
                sol = Lam(s[0], sol)
            info.solution = sol
            gens.append((name, bty))
        cls = self.zonk(cls)
        for i, (name, bty) in reversed(list(enumerate(gens))):
            cls = Pi(name, self.zonk(bty), cls, False, (self.decl_name, "gen", i))
        return cls, len(gens)

    def eta_var_applied(self, name, ty, args):
        """Eta-long form of variable ``name`` applied to ``args``."""
        for _ in args:
            ty = self.zonk(ty)
            ty = ty.cod if isinstance(ty, Pi) else ty
        head = Neutral(Var(name), tuple(args))
        ty = self.zonk(ty)
        if isinstance(ty, Pi):
            raise ElabError(f"cannot generalise a hole of function type ({name})")
        return head


# --------------------------------------------------------------------------
# Helpers


def _split(e):
    if isinstance(e, ps.Application):
        return e.items[0], tuple(e.items[1:])
    return e, ()


def _fresh_in(theta, base: str) -> str:
    base = base.split("@", 1)[0] or "x"
    if base not in theta:
        return base
    return fresh(base)


def _as_var(e) -> Optional[str]:
    """The variable an argument eta-contracts to, if any."""
    if isinstance(e, PrepatArg):
        return e.var
    lams = []
    while isinstance(e, Lam):
        lams.append(e.var)
        e = e.body
    if not isinstance(e, Neutral) or not isinstance(e.head, Var):
        return None
    if len(e.spine) != len(lams) or e.head.name in lams:
        return None
    for z, arg in zip(lams, e.spine):
        if _as_var(arg) != z:
            return None
    return e.head.name


def _metas_in(obj) -> list:
    out: dict = {}

    def go(o):
        match o:
            case Neutral(head, spine):
                if isinstance(head, Meta):
                    out.setdefault(head.id, None)
                for e in spine:
                    go(e)
            case Lam(_, body):
                go(body)
            case Atomic(_, spine):
                for e in spine:
                    go(e)
            case Pi(_, dom, cod):
                go(dom)
                go(cod)
            case _:
                pass

    go(obj)
    return list(out)


def _tmetas_in(obj) -> list:
    out: dict = {}

    def go(o):
        match o:
            case TypeMeta(n):
                out.setdefault(n, None)
            case Pi(_, dom, cod):
                go(dom)
                go(cod)
            case _:
                pass

    go(obj)
    return list(out)


def _has_meta(obj) -> bool:
    return bool(_metas_in(obj))


def _has_tmeta_free(el: Elaborator, info: MetaInfo) -> bool:
    if _tmetas_in(el.zonk(info.type)):
        return True
    return any(_tmetas_in(el.zonk(ty)) for _, ty, _ in info.scope)


def _binder_names(obj) -> set:
    out = set()

    def go(o):
        match o:
            case Pi(x, dom, cod):
                out.add(x)
                go(dom)
                go(cod)
            case Lam(x, body):
                out.add(x)
                go(body)
            case Neutral(_, spine) | Atomic(_, spine):
                for e in spine:
                    go(e)
            case _:
                pass

    go(obj)
    return out


# --------------------------------------------------------------------------
# Entry points


def infer_prepattern_flavor(surface, max_rounds: Optional[int] = None) -> ElabResult:
    """Elaborate to a fixed point of binder flavours.

    Every flip makes one more binder prepattern, so the loop ends after at
    most as many rounds as there are binders.
    """
    flips: set = set()
    rounds = 0
    while True:
        rounds += 1
        el = Elaborator(surface, flips)
        try:
            return el.run()
        except _Flip as f:
            if f.tag in flips or (max_rounds is not None and rounds >= max_rounds):
                raise ElabError(f"prepattern inference did not converge at binder {f.tag}") from None
            flips.add(f.tag)


def elaborate_signature(surface) -> ElabResult:
    """Surface declarations to a core signature plus per-declaration errors."""
    return infer_prepattern_flavor(list(surface))
