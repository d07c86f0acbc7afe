import numpy as np
import pytest

from embedded_spectra import _backend
from embedded_spectra.potentials import make_example5
from embedded_spectra.spectral import (band_scan, eigenfunction, find_embedded_eigenvalue)

KERNELS = sorted(_backend.KERNELS)

_ACCEPTANCE = []


def mathieu_vp(x):
    return 2.0 * np.cos(2.0 * x)


@pytest.fixture(params=KERNELS)
def kernel(request):
    return request.param


@pytest.fixture(scope="session")
def mathieu_bands():
    return band_scan(mathieu_vp, np.pi, (-1.0, 4.5), samples=221)


@pytest.fixture(scope="session")
def lam0(mathieu_bands):
    return mathieu_bands.midpoint(0)


@pytest.fixture(scope="session")
def ex5(lam0):
    return make_example5(lam0)


@pytest.fixture(scope="session")
def cand0(ex5, lam0):
    return find_embedded_eigenvalue(ex5.potential, lam0)


@pytest.fixture(scope="session")
def ef0(cand0):
    return eigenfunction(cand0)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.get_closest_marker("acceptance"):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _ACCEPTANCE.append((item.name, rep.passed, doc))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, doc in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {doc}")
