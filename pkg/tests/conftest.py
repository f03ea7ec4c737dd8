import re
import sys
from pathlib import Path

import pytest

sys.setrecursionlimit(max(sys.getrecursionlimit(), 8000))

CORPUS = Path(__file__).resolve().parents[1] / "src" / "colf" / "corpus"

# criterion label -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: (int(re.match(r"\d+", s).group()), s)):
        ok, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
