import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def heat():
    from heisenkit.kernels import default_heat_kernel
    return default_heat_kernel()


@pytest.fixture(scope="session")
def stable_solution():
    """Descent-selected Allen-Cahn solution with odd trace tanh(2 x1 + x2 x3)."""
    from heisenkit.verify import descent_solution
    return descent_solution((13, 13, 13, 9))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_log(request):
    """Record ``(criterion, passed, detail)``; the summary prints one line per criterion."""
    log = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(n, passed, detail=""):
        line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}"
        log[n] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE_KEY, {})
    if log:
        terminalreporter.section("acceptance criteria")
        for n in sorted(log):
            terminalreporter.write_line(log[n])
