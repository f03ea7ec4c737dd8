"""Independent reference implementations used to freeze expected values.

None of these share code with the package beyond the data types: the
bisimulation check is the textbook pair-exploration algorithm for
first-order rational trees, and the unfolder works on surface syntax.
"""

from __future__ import annotations

import re

from colf import parser as ps
from colf.syntax import Const, Neutral, RecConst

BOTTOM = "_|_"


# --------------------------------------------------------------------------
# Lexing by regular expression


_TOKEN = re.compile(r"\s+|%[^\n]*|->|[:.=(){}\[\]]|[A-Za-z0-9_/'*]+")


def count_tokens(text: str) -> int:
    n = 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        assert m, f"oracle lexer stuck at {pos}"
        if not m.group().isspace() and not m.group().startswith("%"):
            n += 1
        pos = m.end()
    return n


# --------------------------------------------------------------------------
# First-order rational trees, on core terms


def _unfold_closed(sig, m):
    seen = 0
    while isinstance(m.head, RecConst):
        m = sig.definition(m.head.name).body
        seen += 1
        assert seen <= len(sig) + 1, "non-contractive"
    return m


def bisimilar(sig, m1, m2) -> bool:
    """Equality of closed first-order terms by exploring pairs of states."""
    todo = [(m1, m2)]
    seen = set()
    while todo:
        a, b = todo.pop()
        if (a, b) in seen:
            continue
        seen.add((a, b))
        a, b = _unfold_closed(sig, a), _unfold_closed(sig, b)
        if a.head != b.head or len(a.spine) != len(b.spine):
            return False
        todo.extend(zip(a.spine, b.spine))
    return True


# --------------------------------------------------------------------------
# Unfolding on surface syntax


class SurfaceUnfolder:
    """Depth-k trees of closed first-order definitions, read off the source."""

    def __init__(self, text: str):
        self.defs = {d.name: d.body for d in ps.parse_signature(text) if d.body is not None}
        self.intern: dict = {}
        self.memo: dict = {}

    def _node(self, t):
        return self.intern.setdefault(t, t)

    def expand(self, e, k: int):
        if k == 0:
            return BOTTOM
        key = (e, k)
        if key in self.memo:
            return self.memo[key]
        head, args = self._split(e)
        hops = 0
        while head in self.defs:
            head, args = self._split(self.defs[head])
            hops += 1
            assert hops <= len(self.defs) + 1
        out = self._node((head, tuple(self.expand(a, k - 1) for a in args)))
        self.memo[key] = out
        return out

    def expand_name(self, name: str, k: int):
        return self.expand(ps.Ident(name), k)

    @staticmethod
    def _split(e):
        if isinstance(e, ps.Application):
            return e.items[0].name, e.items[1:]
        return e.name, ()

    def from_approx(self, t, memo=None):
        """Convert a package approximant into this oracle's representation."""
        from colf.expansion import BHead, Bottom

        memo = {} if memo is None else memo
        if id(t) in memo:
            return memo[id(t)]
        if isinstance(t, Bottom):
            out = BOTTOM
        else:
            assert isinstance(t, BHead), t
            out = self._node((t.name, tuple(self.from_approx(a, memo) for a in t.args)))
        memo[id(t)] = out
        return out


def closed(name: str, sig) -> Neutral:
    d = sig.lookup(name)
    return Neutral(RecConst(name) if hasattr(d, "body") else Const(name))


# --------------------------------------------------------------------------
# Guardedness by enumerating simple cycles


def occurrence_edges(body, defs) -> list:
    """(target definition, constructors passed on the way) for each occurrence."""
    out = []

    def walk(e, seen):
        head, args = SurfaceUnfolder._split(e)
        if head in defs:
            out.append((head, seen))
            return
        for a in args:
            walk(a, seen | {head})

    walk(body, frozenset())
    return out


def guarded(name: str, defs: dict, rank: dict, coinductive: set) -> bool:
    """Every simple cycle from ``name`` back to itself has a coinductive maximum.

    ``defs`` maps definition names to surface bodies, ``rank`` maps
    constructors to the rank of their family.
    """
    edges = {d: occurrence_edges(b, defs) for d, b in defs.items()}

    def ok(labels):
        if not labels:
            return False
        top = max(labels, key=lambda c: rank[c])
        return top in coinductive

    def dfs(node, labels, visited):
        for target, seen in edges[node]:
            acc = labels | seen
            if target == name:
                if not ok(acc):
                    return False
            elif target not in visited:
                if not dfs(target, acc, visited | {target}):
                    return False
        return True

    return dfs(name, frozenset(), frozenset({name}))
