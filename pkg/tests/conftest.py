import time

import pytest

from engel_spectra.engel_group import GaussHermiteFunction
from engel_spectra.frequency_space import FrequencyWindow, fourier_table, heat_kernel_at
from engel_spectra.spectral_sums import TruncationSpec, spectrum_table

_ACCEPTANCE = []
# wall-clock seconds spent building shared fixtures, charged to the criteria that use them
BUILD_SECONDS = {}


def record(criterion, title, passed, detail):
    """Store one acceptance line and echo it immediately."""
    line = f"criterion {criterion:>2} {title}: {'PASS' if passed else 'FAIL'} ({detail})"
    _ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: takes longer than a few seconds")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_trunc():
    return TruncationSpec()


@pytest.fixture(scope="session")
def default_table(default_trunc):
    start = time.perf_counter()
    table = spectrum_table(default_trunc)
    BUILD_SECONDS["default_table"] = time.perf_counter() - start
    return table


@pytest.fixture(scope="session")
def gaussian():
    return GaussHermiteFunction.gaussian()


# a window reaching further into the mode and frequency tails; reconstructs u(0) within 2%
WIDE_WINDOW = dict(modes=12, nu_max=16.0, lam_min=0.005, lam_max=10.0)


@pytest.fixture(scope="session")
def gaussian_table(gaussian):
    start = time.perf_counter()
    table = fourier_table(gaussian, FrequencyWindow())
    BUILD_SECONDS["gaussian_table"] = time.perf_counter() - start
    return table


@pytest.fixture(scope="session")
def wide_table(gaussian):
    return fourier_table(gaussian, FrequencyWindow(**WIDE_WINDOW))


class _HeatValues:
    """Heat kernel evaluations shared between test modules."""

    def __init__(self, trunc):
        self.trunc = trunc
        self._cache = {}

    def __call__(self, t, x):
        key = (t, tuple(x))
        if key not in self._cache:
            self._cache[key] = heat_kernel_at(t, x, self.trunc)
        return self._cache[key]


@pytest.fixture(scope="session")
def heat(default_trunc):
    return _HeatValues(default_trunc)
