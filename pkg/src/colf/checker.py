"""End-to-end checking of a source file: parse, elaborate, then kernel check.

Every declaration receives exactly one report.  A declaration rejected by
the parser or the elaborator never reaches the kernel; everything the
elaborator produced is re-checked by the kernel from scratch.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from . import parser as ps
from .elaborate import ElabError, ElabResult, elaborate_signature
from .equality import DEFAULT_MEMO_CAP
from .syntax import Signature
from .typecheck import OK, PARSE_ERROR, TYPE_ERROR, CheckResult, DeclReport, check_signature

RECURSION_LIMIT = 8000


def _raise_recursion_limit() -> None:
    if sys.getrecursionlimit() < RECURSION_LIMIT:
        sys.setrecursionlimit(RECURSION_LIMIT)


@dataclass
class FileResult:
    """Reports in source order, plus the artefacts of each stage."""

    reports: list
    signature: Signature = field(default_factory=Signature)
    elaboration: Optional[ElabResult] = None
    kernel: Optional[CheckResult] = None

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.reports)

    def report(self, name: str) -> DeclReport:
        for r in self.reports:
            if r.name == name:
                return r
        raise KeyError(name)

    def verdicts(self) -> dict:
        return {r.name: r.verdict for r in self.reports}

    def failures(self) -> list:
        return [r for r in self.reports if not r.ok]

    @property
    def max_delta(self) -> int:
        return self.kernel.max_delta if self.kernel else 0

    @property
    def cap_hit(self) -> bool:
        return bool(self.kernel and self.kernel.cap_hit)


def check_text(text: Union[str, bytes], memo_cap: int = DEFAULT_MEMO_CAP,
               record: bool = False) -> FileResult:
    _raise_recursion_limit()
    items = ps.parse_signature_recovering(text)
    slots: list = []  # one report (or surface index) per source declaration
    surface = []
    for it in items:
        if isinstance(it, ps.BadDecl):
            slots.append(DeclReport(it.name, PARSE_ERROR, str(it.error), "parse", it.span))
        else:
            slots.append(len(surface))
            surface.append(it)

    def finish(fill) -> list:
        return [s if isinstance(s, DeclReport) else fill(s) for s in slots]

    try:
        el = elaborate_signature(surface)
    except ElabError as e:
        err = e
        return FileResult(finish(lambda i: DeclReport(
            surface[i].name, err.verdict, err.message, "elaborate", surface[i].span)))
    kern = check_signature(el.signature, memo_cap, record)
    by_name = {r.name: r for r in kern.reports}

    def fill(i: int) -> DeclReport:
        d = surface[i]
        err = el.duplicates.get(i) or el.errors.get(d.name)
        if err is not None:
            return DeclReport(d.name, err.verdict, err.message, "elaborate", err.span or d.span)
        return by_name.get(d.name) or DeclReport(d.name, TYPE_ERROR, "not checked", "elaborate", d.span)

    return FileResult(finish(fill), el.signature, el, kern)


def check_file(path: Union[str, Path], memo_cap: int = DEFAULT_MEMO_CAP,
               record: bool = False) -> FileResult:
    return check_text(Path(path).read_bytes(), memo_cap, record)


def format_span(span) -> str:
    if span is None:
        return "-"
    return str(span)


def diagnostic(path: str, r: DeclReport) -> str:
    """One human-readable line per failed declaration."""
    loc = f"{r.span.line}:{r.span.col}" if r.span is not None else "?"
    judgment = f" [{r.judgment}]" if r.judgment else ""
    return f"{path}:{loc}: {r.name}: {r.verdict}{judgment}: {r.message}"


def machine_record(r: DeclReport) -> str:
    """Tab-separated record: name, verdict, span."""
    return f"{r.name}\t{r.verdict}\t{format_span(r.span)}"


def read_expectations(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {n}: expected name<TAB>verdict")
        out[parts[0]] = parts[1]
    return out


__all__ = [
    "FileResult", "check_text", "check_file", "diagnostic", "machine_record",
    "read_expectations", "OK",
]
