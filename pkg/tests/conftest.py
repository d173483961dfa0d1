import os
import tempfile
from functools import lru_cache

import pytest

# isolate the radial-integral cache before the package creates its default
_CACHE_DIR = tempfile.mkdtemp(prefix="rydqed-test-cache-")
os.environ["RYDQED_CACHE_DIR"] = _CACHE_DIR

from rydqed import abraham  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str):
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        # lines start with a zero-padded criterion id, so text order is numeric order
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@lru_cache(maxsize=None)
def kappa(channel: str, n: int, m_sign: int = 1, E0: float = abraham.DEFAULT_E0):
    """Shared kappa evaluations; each (channel, n) is expensive."""
    if channel == "k2":
        return abraham.kappa2(n, E0=E0, m_sign=m_sign)
    if channel == "k1b":
        return abraham.kappa1b(n, E0=E0, m_sign=m_sign)
    return abraham.kappa1a(n, E0=E0, m_sign=m_sign)


@pytest.fixture(scope="session")
def kappa_fn():
    return kappa
