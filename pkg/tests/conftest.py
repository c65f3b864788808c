import time
from contextlib import contextmanager

import numpy as np
import pytest

_ACCEPTANCE = []


def correlated_views(rng, n, dx, dy, coupling=0.8, noise=1.0):
    """Two views sharing ``min(dx, dy)`` latent directions."""
    z = rng.normal(size=(n, min(dx, dy)))
    x = z @ rng.normal(size=(z.shape[1], dx)) + noise * rng.normal(size=(n, dx))
    y = coupling * z @ rng.normal(size=(z.shape[1], dy)) + noise * rng.normal(size=(n, dy))
    return x, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@contextmanager
def _criterion(number, title, time_limit=None):
    info = {"detail": ""}
    start = time.perf_counter()
    ok = False
    try:
        yield info
        elapsed = time.perf_counter() - start
        if time_limit is not None and elapsed > time_limit:
            info["detail"] += f" [runtime {elapsed:.1f}s exceeds {time_limit:.0f}s]"
            raise AssertionError(f"criterion {number} took {elapsed:.1f}s > {time_limit}s")
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        line = f"[{number}] {'PASS' if ok else 'FAIL'} {title}: {info['detail'].strip()} ({elapsed:.1f}s)"
        _ACCEPTANCE.append((number, line))
        print(line)


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
