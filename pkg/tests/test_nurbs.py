import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttkl.errors import ConfigError, IndexOutOfRange
from ttkl.kernels import SpectralSeries, SquaredExponential, TripleExponential, make_kernel
from ttkl.nurbs import (
    NurbsGeometry,
    basis_matrix,
    bilinear_saddle,
    bspline_basis,
    find_span,
    pullback_kernel,
    spherical_shell_octant,
    unit_interval,
)


def _cox_de_boor(knots, p, i, x):
    """Textbook recursion, 0-based index, used as an independent reference."""
    if p == 0:
        if knots[i] <= x < knots[i + 1]:
            return 1.0
        # close the last nonempty span at the right end
        if x == knots[-1] and knots[i] < knots[i + 1] == knots[-1]:
            return 1.0
        return 0.0
    out = 0.0
    if knots[i + p] > knots[i]:
        out += (x - knots[i]) / (knots[i + p] - knots[i]) * _cox_de_boor(knots, p - 1, i, x)
    if knots[i + p + 1] > knots[i + 1]:
        out += (knots[i + p + 1] - x) / (knots[i + p + 1] - knots[i + 1]) * _cox_de_boor(knots, p - 1, i + 1, x)
    return out


def test_basis_matches_recursive_definition():
    knots = np.array([0, 0, 0, 0.3, 0.5, 0.5, 1, 1, 1])
    p = 2
    xs = np.linspace(0, 1, 41)
    B = basis_matrix(knots, p, xs)
    ref = np.array([[_cox_de_boor(knots, p, i, x) for i in range(knots.size - p - 1)] for x in xs])
    assert np.allclose(B, ref, atol=1e-14)


def test_last_knot_in_last_span():
    knots = [0, 0, 0, 1, 1, 1]
    assert find_span(knots, 2, 1.0) == 2
    assert bspline_basis(knots, 2, 3, 1.0) == pytest.approx(1.0)


def test_basis_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        bspline_basis([0, 0, 1, 1], 1, 3, 0.5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 0.99), min_size=0, max_size=4), st.integers(1, 3), st.floats(0, 1))
def test_partition_of_unity(interior, p, x):
    knots = np.concatenate([np.zeros(p + 1), np.sort(interior), np.ones(p + 1)])
    assert abs(basis_matrix(knots, p, [x]).sum() - 1.0) <= 1e-13


def test_rational_partition_of_unity_on_shell():
    geom = spherical_shell_octant()
    pts = np.random.default_rng(0).random((200, 3))
    R = geom.rational_basis(pts).reshape(200, -1)
    assert np.max(np.abs(R.sum(axis=1) - 1.0)) <= 1e-13


def test_saddle_corners_and_formula():
    geom = bilinear_saddle()
    assert np.allclose(geom.map([0.0, 0.0]), [-0.5, -0.5, 0.0])
    assert np.allclose(geom.map([1.0, 0.0]), [-0.5, 0.5, 1.0])
    u = np.random.default_rng(1).random((50, 2))
    xi, eta = u[:, 0], u[:, 1]
    ref = np.stack([eta - 0.5, xi - 0.5, xi + eta - 2 * xi * eta], axis=1)
    assert np.allclose(geom.map(u), ref, atol=1e-14)


def test_shell_points_lie_between_radii():
    geom = spherical_shell_octant(1.0, 1.2)
    u = np.random.default_rng(2).random((300, 3))
    r = np.linalg.norm(geom.map(u), axis=1)
    # exact circles: radius is affine in the radial parameter
    assert np.allclose(r, 1.0 + 0.2 * u[:, 0], atol=1e-13)
    assert np.all(geom.map(u) >= -1e-14)


def test_interval_is_identity():
    x = np.linspace(0, 1, 9)[:, None]
    assert np.allclose(unit_interval().map(x), x)


def test_invalid_geometry_rejected():
    with pytest.raises(ConfigError):
        NurbsGeometry((1,), ([0, 0, 1, 1],), np.zeros((3, 1)), np.ones(3))
    with pytest.raises(ConfigError):
        NurbsGeometry((1,), ([0, 0, 1, 1],), np.zeros((2, 1)), np.array([1.0, -1.0]))


def test_pullback_evaluates_physical_kernel():
    geom = bilinear_saddle()
    k = SquaredExponential()
    pulled = pullback_kernel(geom, k)
    u, v = np.random.default_rng(3).random((2, 10, 2))
    assert np.allclose(pulled(u, v), k(geom.map(u), geom.map(v)))


def test_kernels_and_registry():
    x = np.zeros((1, 3))
    assert SquaredExponential()(x, x)[0] == pytest.approx(1.0)
    assert TripleExponential(sigma=2.0)(x, x, x)[0] == pytest.approx(8.0)
    s = SpectralSeries(terms=200)
    # the full series sums to min(x, y) (Brownian covariance on [0, 1])
    a, b = np.array([[0.3]]), np.array([[0.7]])
    assert s(a, b)[0] == pytest.approx(0.3, abs=2e-3)
    assert make_kernel({"type": "spectral_series", "terms": 5}, 3).order == 3
    with pytest.raises(ConfigError):
        make_kernel({"type": "squared_exponential"}, 3)
    with pytest.raises(ConfigError):
        make_kernel({"type": "nope"}, 2)
    with pytest.raises(ConfigError):
        make_kernel({"type": "squared_exponential", "sigma": -1.0}, 2)
