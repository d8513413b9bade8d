import time
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from deskcoref.encoder import tokenize

settings.register_profile("deskcoref", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("deskcoref")

API_TEXT = ("We are so happy to see you using our coref package. "
            "This package is very fast!")

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def api_doc():
    return tokenize(API_TEXT, "api")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion(request):
    """Context manager timing one acceptance criterion and recording PASS/FAIL.

    ``with criterion(3, "title", limit_s) as notes:`` - append strings to
    ``notes`` to have them shown next to the result.
    """
    results = request.config.stash.setdefault(_ACCEPTANCE, {})

    @contextmanager
    def run(number: int, title: str, limit_s: float):
        notes: list[str] = []
        start = time.perf_counter()
        status = "FAIL"
        try:
            yield notes
            status = "PASS"
        finally:
            elapsed = time.perf_counter() - start
            if status == "PASS" and elapsed > limit_s:
                status = "FAIL"
                notes.append(f"runtime {elapsed:.1f}s exceeds {limit_s:g}s")
            detail = "; ".join(notes)
            line = f"criterion {number:>2} {status}  {title} [{elapsed:.2f}s / limit {limit_s:g}s]"
            results[number] = line + (f" - {detail}" if detail else "")
            print(results[number])
        if elapsed > limit_s:
            pytest.fail(f"criterion {number} took {elapsed:.1f}s, limit {limit_s:g}s")

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
