import numpy as np
import pytest

from nldirichlet.bc1d import OperatorSpec
from nldirichlet.kernel import ScaledKernel, builtin_constant, builtin_linear


@pytest.fixture(scope="session")
def constant():
    return builtin_constant()


@pytest.fixture(scope="session")
def linear():
    return builtin_linear()


@pytest.fixture(params=["constant", "linear"], scope="session")
def builtin(request):
    return builtin_constant() if request.param == "constant" else builtin_linear()


def make_spec(profile, delta=0.1, method="nonlocal_gradient", data=(0.0, 0.0)):
    return OperatorSpec(ScaledKernel(profile, delta), method, tuple(data))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record ``(number, passed, detail)`` for the end-of-run acceptance summary."""

    def record(number, passed, detail):
        line = f"ACCEPTANCE {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
