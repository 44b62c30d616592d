import numpy as np
import pytest

from latent_profiler import PointCloud
from latent_profiler._parallel import blas_single_thread, set_threads

# filled by test_acceptance: criterion number -> (passed, detail)
ACCEPTANCE_RESULTS = {}


@pytest.fixture(autouse=True)
def _single_blas():
    with blas_single_thread():
        yield
    set_threads(None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cloud(rng):
    return PointCloud(rng.standard_normal((400, 6)), label="small")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
