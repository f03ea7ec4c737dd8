"""Lexer and parser for the Twelf-style concrete syntax.

A file is a sequence of declarations, each terminated by a period::

    name : classifier.
    name : classifier = body.

``[x] M`` is an abstraction, ``{x : A} B`` (or ``{x} B``) a dependent
function space and ``A -> B`` a non-dependent one.  Free identifiers that start
with a capital letter are left for the elaborator to abstract.  ``%`` starts
a comment that runs to the end of the line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

RESERVED = {"type", "cotype"}
PUNCT = {":", ".", "=", "(", ")", "{", "}", "[", "]"}
MAX_DEPTH = 200


class ParseError(Exception):
    """A located syntax error."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class LexError(ParseError):
    pass


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self):
        return f"{self.line}:{self.col}-{self.end_line}:{self.end_col}"

    def join(self, other: "Span") -> "Span":
        return Span(self.line, self.col, other.end_line, other.end_col)


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'arrow', 'underscore', 'type', 'cotype' or the punctuation itself
    text: str
    span: Span


def _ident_char(ch: str) -> bool:
    return ch.isascii() and (ch.isalnum() or ch in "_/'*")


def tokenize(text: Union[str, bytes]) -> list[Token]:
    """Split source text into tokens; comments and whitespace are dropped."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            line = bytes(text[:e.start]).count(b"\n") + 1
            raise LexError("input is not valid UTF-8", line, 1) from None
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch in " \t\r\f\v":
            i, col = i + 1, col + 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "-" and text.startswith("->", i):
            tokens.append(Token("arrow", "->", Span(line, col, line, col + 2)))
            i, col = i + 2, col + 2
            continue
        if ch in PUNCT:
            tokens.append(Token(ch, ch, Span(line, col, line, col + 1)))
            i, col = i + 1, col + 1
            continue
        if _ident_char(ch):
            j = i
            while j < n and _ident_char(text[j]):
                j += 1
            word = text[i:j]
            kind = "ident"
            if word == "_":
                kind = "underscore"
            elif word in RESERVED:
                kind = word
            tokens.append(Token(kind, word, Span(line, col, line, col + len(word))))
            col += j - i
            i = j
            continue
        raise LexError(f"illegal character {ch!r}", line, col)
    return tokens


# --------------------------------------------------------------------------
# Surface syntax

_NOSPAN = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ident:
    name: str
    span: Optional[Span] = _NOSPAN


@dataclass(frozen=True)
class CapitalVar:
    """An identifier starting with an upper-case letter."""

    name: str
    span: Optional[Span] = _NOSPAN


@dataclass(frozen=True)
class Underscore:
    span: Optional[Span] = _NOSPAN


@dataclass(frozen=True)
class Type:
    span: Optional[Span] = _NOSPAN


@dataclass(frozen=True)
class Cotype:
    span: Optional[Span] = _NOSPAN


@dataclass(frozen=True)
class Application:
    items: tuple  # head followed by arguments, at least two entries
    span: Optional[Span] = _NOSPAN


@dataclass(frozen=True)
class Arrow:
    lhs: "SurfaceExpr"
    rhs: "SurfaceExpr"
    span: Optional[Span] = _NOSPAN


@dataclass(frozen=True)
class PiBinder:
    """``{x : A} B``; ``ann`` is None for the bare form ``{x} B``."""

    var: str
    ann: Optional["SurfaceExpr"]
    body: "SurfaceExpr"
    span: Optional[Span] = _NOSPAN


@dataclass(frozen=True)
class LamBinder:
    """``[x] M`` or ``[x : A] M``."""

    var: str
    ann: Optional["SurfaceExpr"]
    body: "SurfaceExpr"
    span: Optional[Span] = _NOSPAN


SurfaceExpr = Union[Ident, CapitalVar, Underscore, Type, Cotype, Application,
                    Arrow, PiBinder, LamBinder]


@dataclass(frozen=True)
class SurfaceDecl:
    name: str
    classifier: SurfaceExpr
    body: Optional[SurfaceExpr] = None
    span: Optional[Span] = _NOSPAN


def is_capital(name: str) -> bool:
    return name[:1].isupper()


def _ident(tok: Token):
    return CapitalVar(tok.text, tok.span) if is_capital(tok.text) else Ident(tok.text, tok.span)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0
        self.depth = 0

    def peek(self) -> Optional[Token]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1].span if self.toks else Span(1, 1, 1, 1)
            return ParseError(message + " (at end of input)", last.end_line, last.end_col)
        return ParseError(f"{message}, found {tok.text!r}", tok.span.line, tok.span.col)

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            raise self.error(f"expected {kind!r}")
        self.pos += 1
        return tok

    def decl(self) -> SurfaceDecl:
        name = self.expect("ident")
        self.expect(":")
        classifier = self.expr()
        body = None
        tok = self.peek()
        if tok is not None and tok.kind == "=":
            self.pos += 1
            body = self.expr()
        end = self.expect(".")
        return SurfaceDecl(name.text, classifier, body, name.span.join(end.span))

    def expr(self) -> SurfaceExpr:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise self.error("expression nested too deeply")
        try:
            tok = self.peek()
            if tok is not None and tok.kind in ("{", "["):
                return self.binder()
            lhs = self.app()
            tok = self.peek()
            if tok is not None and tok.kind == "arrow":
                self.pos += 1
                rhs = self.expr()
                return Arrow(lhs, rhs, _span(lhs).join(_span(rhs)))
            return lhs
        finally:
            self.depth -= 1

    def binder(self) -> SurfaceExpr:
        open_ = self.peek()
        close = "}" if open_.kind == "{" else "]"
        self.pos += 1
        var = self.expect("ident")
        ann = None
        tok = self.peek()
        if tok is not None and tok.kind == ":":
            self.pos += 1
            ann = self.expr()
        self.expect(close)
        body = self.expr()
        sp = open_.span.join(_span(body))
        cls = PiBinder if close == "}" else LamBinder
        return cls(var.text, ann, body, sp)

    def app(self) -> SurfaceExpr:
        items = [self.atom()]
        while True:
            tok = self.peek()
            if tok is None:
                break
            if tok.kind in ("ident", "underscore", "type", "cotype", "("):
                items.append(self.atom())
            elif tok.kind in ("{", "["):
                # a trailing binder argument extends as far right as possible
                items.append(self.expr())
                break
            else:
                break
        if len(items) == 1:
            return items[0]
        if isinstance(items[0], Application):
            items = list(items[0].items) + items[1:]
        return Application(tuple(items), _span(items[0]).join(_span(items[-1])))

    def atom(self) -> SurfaceExpr:
        tok = self.peek()
        if tok is None:
            raise self.error("expected an expression")
        match tok.kind:
            case "ident":
                self.pos += 1
                return _ident(tok)
            case "underscore":
                self.pos += 1
                return Underscore(tok.span)
            case "type":
                self.pos += 1
                return Type(tok.span)
            case "cotype":
                self.pos += 1
                return Cotype(tok.span)
            case "(":
                self.pos += 1
                self.depth += 1
                if self.depth > MAX_DEPTH:
                    raise self.error("expression nested too deeply")
                inner = self.expr()
                self.depth -= 1
                self.expect(")")
                return inner
        raise self.error("expected an expression")


def _span(e) -> Span:
    return e.span if e.span is not None else Span(0, 0, 0, 0)


def parse_signature(text: Union[str, bytes]) -> list[SurfaceDecl]:
    """Parse a whole file; raises :class:`ParseError` at the first error."""
    p = _Parser(tokenize(text))
    decls = []
    while p.peek() is not None:
        decls.append(p.decl())
    return decls


def parse_expr(text: str) -> SurfaceExpr:
    p = _Parser(tokenize(text))
    e = p.expr()
    if p.peek() is not None:
        raise p.error("trailing input")
    return e


@dataclass(frozen=True)
class BadDecl:
    """A declaration that failed to parse; ``name`` is a best guess."""

    name: str
    error: ParseError
    span: Optional[Span] = None


def parse_signature_recovering(text: Union[str, bytes]) -> list:
    """Parse declaration by declaration, skipping to the next period on error.

    Returns a list of :class:`SurfaceDecl` and :class:`BadDecl` in source order.
    A lexical error ends the file because token boundaries are lost.
    """
    try:
        toks = tokenize(text)
    except LexError as e:
        return [BadDecl("<file>", e, Span(e.line, e.col, e.line, e.col))]
    p = _Parser(toks)
    out = []
    while p.peek() is not None:
        start = p.pos
        try:
            out.append(p.decl())
        except ParseError as e:
            first = toks[start]
            name = first.text if first.kind == "ident" else f"<decl@{first.span.line}>"
            p.pos = max(p.pos, start)
            p.depth = 0
            while p.peek() is not None and p.peek().kind != ".":
                p.pos += 1
            end = p.peek()
            if end is not None:
                p.pos += 1
            sp = first.span.join(end.span if end is not None else toks[-1].span)
            out.append(BadDecl(name, e, sp))
    return out


# --------------------------------------------------------------------------
# Printing


def show_expr(e: SurfaceExpr) -> str:
    return _show(e, 0)


def _show(e, prec: int) -> str:
    # prec 0: anywhere; 1: left of an arrow or application head; 2: argument
    match e:
        case Ident(name) | CapitalVar(name):
            return name
        case Underscore():
            return "_"
        case Type():
            return "type"
        case Cotype():
            return "cotype"
        case Application(items):
            s = " ".join([_show(items[0], 1)] + [_show(a, 2) for a in items[1:]])
            return f"({s})" if prec >= 2 else s
        case Arrow(lhs, rhs):
            s = f"{_show(lhs, 1)} -> {_show(rhs, 0)}"
            return f"({s})" if prec >= 1 else s
        case PiBinder(var, ann, body) | LamBinder(var, ann, body):
            o, c = ("{", "}") if isinstance(e, PiBinder) else ("[", "]")
            a = "" if ann is None else f" : {_show(ann, 0)}"
            s = f"{o}{var}{a}{c} {_show(body, 0)}"
            return f"({s})" if prec >= 1 else s
    raise TypeError(f"not a surface expression: {e!r}")


def show_decl(d: SurfaceDecl) -> str:
    s = f"{d.name} : {show_expr(d.classifier)}"
    if d.body is not None:
        s += f" = {show_expr(d.body)}"
    return s + "."


def show_signature(decls) -> str:
    return "".join(show_decl(d) + "\n" for d in decls)
