import numpy as np
import pytest

from pgconv import _kernels_py


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def _backends():
    out = [pytest.param(_kernels_py, id="python")]
    try:
        from pgconv import _kernels
        out.append(pytest.param(_kernels, id="cython"))
    except ImportError:
        out.append(pytest.param(None, id="cython", marks=pytest.mark.skip(reason="extension not built")))
    return out


BACKENDS = _backends()


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance.RESULTS[n].line())
