import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from catekit.dataset import DGPConfig, generate_synthetic

settings.register_profile(
    "catekit",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    max_examples=50,
)
settings.load_profile("catekit")

# acceptance report lines, printed at the end of the session regardless of capture
ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """``report(number, ok, detail)`` records one PASS/FAIL line and returns ``ok``."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append(line)
        print(line)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_nonlinear():
    return generate_synthetic(DGPConfig(n=400, d=5, dgp_kind="nonlinear_effect", seed=7))
