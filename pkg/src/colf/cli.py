"""Command-line driver.

    colf check FILE... [--machine] [--expect FILE] [--memo-cap N] [--jobs N]
    colf eq FILE C1 C2 [--memo-cap N]
    colf expand FILE C [--depth K] [--one-line]

Exit status: ``check`` 0 when every declaration is accepted (or, with
``--expect``, when every verdict matches), otherwise 1.  ``eq`` 0 when equal,
1 when unequal, 2 on error.  Usage and I/O errors exit with 64.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .checker import (
    FileResult, check_text, diagnostic, machine_record, read_expectations,
)
from .equality import DEFAULT_MEMO_CAP, EQUAL, UNEQUAL, equal_constants, rough_bound_log10
from .expansion import ExpansionError, expand, show_approx, show_tree
from .subst import SubstError
from .syntax import Const, RecConst, RecDef, SignatureError, TypeFamily, eta_expand

EXIT_USAGE = 64
DEFAULT_DEPTH = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _nonneg(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text}")
    return v


def _positive(text: str) -> int:
    v = _nonneg(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="colf", description="Check CoLF signatures.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="check every declaration of one or more files")
    c.add_argument("files", nargs="+", type=Path)
    c.add_argument("--machine", action="store_true",
                   help="print one name<TAB>verdict<TAB>span record per declaration")
    c.add_argument("--expect", type=Path,
                   help="expectations file (name<TAB>verdict per line) to compare against")
    c.add_argument("--memo-cap", type=_positive, default=DEFAULT_MEMO_CAP)
    c.add_argument("--jobs", type=_positive, default=1, help="check files in parallel")

    e = sub.add_parser("eq", help="decide equality of two declared constants")
    e.add_argument("file", type=Path)
    e.add_argument("c1")
    e.add_argument("c2")
    e.add_argument("--memo-cap", type=_positive, default=DEFAULT_MEMO_CAP)

    x = sub.add_parser("expand", help="print the depth-k approximant of a constant")
    x.add_argument("file", type=Path)
    x.add_argument("const")
    x.add_argument("--depth", type=_nonneg, default=DEFAULT_DEPTH)
    x.add_argument("--one-line", action="store_true")
    x.add_argument("--memo-cap", type=_positive, default=DEFAULT_MEMO_CAP)
    return p


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror or e}") from None


def _check_one(args) -> FileResult:
    data, memo_cap = args
    return check_text(data, memo_cap)


# --------------------------------------------------------------------------
# Subcommands


def cmd_check(ns, out) -> int:
    datas = [_read(f) for f in ns.files]
    expected = None
    if ns.expect is not None:
        try:
            expected = read_expectations(_read(ns.expect).decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as e:
            raise UsageError(f"bad expectations file {ns.expect}: {e}") from None
    jobs = [(d, ns.memo_cap) for d in datas]
    if ns.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_check_one, jobs))
    else:
        results = [_check_one(j) for j in jobs]
    status = 0
    many = len(ns.files) > 1
    for path, res in zip(ns.files, results):
        if ns.machine:
            if many:
                print(f"# {path}", file=out)
            for r in res.reports:
                print(machine_record(r), file=out)
        elif expected is None:
            for r in res.failures():
                print(diagnostic(str(path), r), file=out)
        if res.cap_hit:
            print(f"{path}: warning: equality memo cap {ns.memo_cap} reached", file=sys.stderr)
        if expected is None:
            if not res.ok:
                status = 1
            continue
        got = res.verdicts()
        for name in sorted(set(got) | set(expected)):
            if got.get(name) != expected.get(name):
                print(f"{path}: {name}: expected {expected.get(name, '<absent>')}, "
                      f"got {got.get(name, '<absent>')}", file=out)
                status = 1
    return status


def _usable(res: FileResult, name: str):
    """The elaborated declaration of ``name`` if it and the file are usable."""
    verdicts = res.verdicts()
    if name not in verdicts:
        raise SignatureError(f"unknown constant {name}")
    if verdicts[name] != "ok" or name not in res.signature:
        raise SignatureError(f"{name} was rejected ({verdicts[name]})")
    return res.signature.lookup(name)


def cmd_eq(ns, out) -> int:
    res = check_text(_read(ns.file), ns.memo_cap)
    try:
        for name in (ns.c1, ns.c2):
            _usable(res, name)
    except SignatureError as e:
        print(f"error: {e}", file=out)
        return 2
    result = equal_constants(res.signature, ns.c1, ns.c2, ns.memo_cap)
    bound = rough_bound_log10(res.signature)
    detail = f"max |delta| = {result.max_delta}, unfolds = {result.unfolds}, " \
             f"log10 rough bound = {bound:.1f}"
    if result.verdict == EQUAL:
        print(f"equal ({detail})", file=out)
        return 0
    if result.verdict == UNEQUAL:
        print(f"unequal: {result.reason} ({detail})", file=out)
        return 1
    print(f"error: {result.reason}", file=out)
    return 2


def cmd_expand(ns, out) -> int:
    res = check_text(_read(ns.file), ns.memo_cap)
    try:
        d = _usable(res, ns.const)
    except SignatureError as e:
        print(f"error: {e}", file=out)
        return 2
    if isinstance(d, TypeFamily):
        print(f"error: {ns.const} is a type family, not a term", file=out)
        return 2
    head = RecConst(d.name) if isinstance(d, RecDef) else Const(d.name)
    try:
        tree = expand(res.signature, eta_expand(head, d.type), ns.depth)
    except (ExpansionError, SubstError, SignatureError) as e:
        print(f"error: {e}", file=out)
        return 2
    print(show_approx(tree) if ns.one_line else show_tree(tree), file=out)
    return 0


COMMANDS = {"check": cmd_check, "eq": cmd_eq, "expand": cmd_expand}


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    ns = build_parser().parse_args(argv)
    try:
        return COMMANDS[ns.command](ns, out)
    except UsageError as e:
        print(f"colf: {e}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
