"""Shared fixtures: decompositions of the worked examples are expensive, so build them once."""

import pytest

from ttkl.kernels import SpectralSeries, SquaredExponential, TripleExponential
from ttkl.klmodes import modes_1d, modes_2d
from ttkl.nurbs import bilinear_saddle, pullback_kernel, unit_interval
from ttkl.ttcross import CrossConfig, auxiliary_function, cross_decompose

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class Example:
    """Geometry, pulled-back kernels and auxiliary functions of one worked example."""

    def __init__(self, geom, k2, k3):
        self.geom = geom
        self.m = geom.dim_param
        self.cov = pullback_kernel(geom, k2)
        self.cum3 = pullback_kernel(geom, k3)
        self.G2 = auxiliary_function(self.cov, self.m, 2)
        self.G3 = auxiliary_function(self.cum3, self.m, 3)


@pytest.fixture(scope="session")
def interval_example():
    return Example(unit_interval(), SpectralSeries(80, 2), SpectralSeries(80, 3))


@pytest.fixture(scope="session")
def saddle_example():
    return Example(bilinear_saddle(), SquaredExponential(), TripleExponential())


@pytest.fixture(scope="session")
def interval_cov(interval_example):
    return cross_decompose(interval_example.G2, 2, CrossConfig(tol=1e-6, mk=400, seed=0))


@pytest.fixture(scope="session")
def interval_modes(interval_cov):
    return modes_1d(interval_cov[0])


@pytest.fixture(scope="session")
def interval_cum3(interval_example):
    return cross_decompose(interval_example.G3, 3, CrossConfig(tol=1e-6, mk=800, seed=0))


@pytest.fixture(scope="session")
def saddle_cov(saddle_example):
    return cross_decompose(saddle_example.G2, 4, CrossConfig(tol=1e-6, mk=800, seed=2))


@pytest.fixture(scope="session")
def saddle_modes(saddle_cov):
    return modes_2d(saddle_cov[0])


@pytest.fixture(scope="session")
def saddle_cum3(saddle_example):
    return cross_decompose(saddle_example.G3, 6, CrossConfig(tol=1e-5, mk=800, seed=2))
