import functools
import pathlib

import pytest

from smartml.progen import random_program
from smartml.resolve import load
from smartml.typesys import check_program

ROOT = pathlib.Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


def corpus_text(*names):
    return "\n".join((CORPUS / n).read_text() for n in names)


def load_corpus(*names):
    return load(corpus_text(*names))


def accepted(program) -> bool:
    return all(r.ok for r in check_program(program).values())


@functools.lru_cache(maxsize=None)
def fuzz_programs(n=200, start=0):
    """``[(seed, source, resolved, accepted)]`` for ``n`` generated programs."""
    out = []
    for seed in range(start, start + n):
        src = random_program(seed)
        r = load(src)
        out.append((seed, src, r, accepted(r)))
    return out


@pytest.fixture(scope="session")
def fuzz_corpus():
    return fuzz_programs()


@pytest.fixture(scope="session")
def accepted_corpus(fuzz_corpus):
    return [entry for entry in fuzz_corpus if entry[3]]


ACCEPTANCE = {}


def record(criterion, ok, detail=""):
    """Note an acceptance-criterion outcome for the end-of-run summary."""
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
