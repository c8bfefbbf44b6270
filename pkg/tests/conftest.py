import numpy as np
import pytest

from monopoisson.coupling import UniformStream
from monopoisson.kernel import MonotoneKernel
from monopoisson.models import build_birth_death, build_discrete_lindley, build_lindley, build_reflected_ar1

_ACCEPTANCE_LINES = []


def record_criterion(label, passed, detail=""):
    _ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def stream():
    return UniformStream(12345)


@pytest.fixture(scope="session")
def two_state():
    return MonotoneKernel.from_matrix([[0.5, 0.5], [0.5, 0.5]], name="two_state")


@pytest.fixture(scope="session")
def flip():
    return MonotoneKernel.from_matrix([[0.0, 1.0], [1.0, 0.0]], name="flip")


@pytest.fixture(scope="session")
def bd():
    return build_birth_death(0.3, 20)


@pytest.fixture(scope="session")
def dlindley():
    return build_discrete_lindley(0.2, 2, -1, 40)


@pytest.fixture(scope="session")
def mm1():
    return build_lindley(0.5, 1.0)


@pytest.fixture(scope="session")
def ar1():
    from scipy import stats

    return build_reflected_ar1(0.5, stats.norm(-0.5, 0.25))


@pytest.fixture(scope="session")
def mm1_split():
    from monopoisson.split import SplitConfig, lindley_minorization

    _, phi = lindley_minorization(0.5, 1.0, 1.0)
    return SplitConfig(1.0, 0.7, phi, v1=lambda x: 6 * np.asarray(x, dtype=float),
                       v2=lambda x: np.asarray(x, dtype=float) ** 2 + 30 * np.asarray(x, dtype=float))


@pytest.fixture(scope="session")
def dlindley_split(dlindley):
    from monopoisson.split import SplitConfig, matrix_minorization

    _, phi = matrix_minorization(dlindley, 1)
    return SplitConfig(1.0, 0.6, phi, v1=lambda x: 3 * np.asarray(x, dtype=float),
                       v2=lambda x: 2 * np.asarray(x, dtype=float) ** 2 + 10 * np.asarray(x, dtype=float))
