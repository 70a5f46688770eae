import numpy as np
import pytest

from hopfharm import gallery as G
from hopfharm.geometry import JordanDomain
from hopfharm.mesh import triangulate


@pytest.fixture(scope="session")
def disk():
    return G.unit_disk()


@pytest.fixture(scope="session")
def disk_mesh(disk):
    return triangulate(disk, 0.1)


@pytest.fixture(scope="session")
def square():
    return JordanDomain(np.array([0, 1, 1 + 1j, 1j]), name="square")


@pytest.fixture(scope="session")
def heart():
    return G.heart_setup(256)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, checks, details)``; the summary prints one line each."""

    def record(number: int, title: str, checks: dict, details: str = "") -> None:
        _ACCEPTANCE[number] = (title, all(checks.values()), [k for k, v in checks.items() if not v], details)
        failed = [k for k, v in checks.items() if not v]
        assert not failed, f"criterion {number} failed checks: {failed}; {details}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok, failed, details = _ACCEPTANCE[n]
        status = "PASS" if ok else "FAIL"
        extra = f" (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {n} {status}: {title}{extra} | {details}")
