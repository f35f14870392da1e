import numpy as np
import pytest

from ttkl.errors import QuadratureNotConverged, ZeroReference
from ttkl.kernels import SpectralSeries
from ttkl.validate import (
    dense_cumulant3_oracle,
    global_relative_error,
    nystrom_oracle,
    relative_rms,
    sample_points,
    tensor_gauss,
)


BROWNIAN_SPECTRUM = 4 / (np.pi**2 * (2 * np.arange(1, 81) - 1) ** 2)


def brownian(x, y):
    return np.minimum(x[:, 0], y[:, 0])


def smooth(u):
    return np.exp(u.sum(axis=1))


def test_identical_functions_have_zero_error():
    r = global_relative_error(smooth, smooth, 3, 200, 5)
    assert r.value == 0.0 and r.N == 200 and r.seed == 5 and r.metric == "eps_g"
    assert set(r.as_dict()) == {"metric", "N", "value", "seed", "elapsed"}


def test_uniform_scaling_error():
    r = global_relative_error(smooth, lambda u: 1.01 * smooth(u), 2, 300, 0)
    assert r.value == pytest.approx(0.01, rel=1e-12)


def test_scale_equivariance():
    u = sample_points(2, 500, 3)
    ref, approx = smooth(u), smooth(u) + np.sin(u[:, 0]) * 1e-3
    base = relative_rms(ref, approx)
    for c in (1e-8, 3.0, 1e6):
        assert abs(relative_rms(c * ref, c * approx) - base) <= 1e-13 * base


def test_zero_reference_rejected():
    with pytest.raises(ZeroReference):
        relative_rms(np.zeros(4), np.ones(4))


def test_sample_points_deterministic_and_in_cube():
    a, b = sample_points(3, 100, 7), sample_points(3, 100, 7)
    assert np.array_equal(a, b) and a.shape == (100, 3)
    assert np.all((a >= 0) & (a < 1))
    assert not np.array_equal(a, sample_points(3, 100, 8))


def test_tensor_gauss_integrates_monomials():
    nodes, w = tensor_gauss(6, 2)
    assert w @ (nodes[:, 0] ** 3 * nodes[:, 1] ** 4) == pytest.approx(1 / 20, rel=1e-14)


def test_nystrom_truncated_series_spectrum():
    kernel = SpectralSeries(80, 2)
    res = nystrom_oracle(kernel, 1, order=200)
    assert res.eigenvalues[0] == pytest.approx(4 / np.pi**2, rel=1e-8)
    assert np.allclose(res.eigenvalues[:80], BROWNIAN_SPECTRUM[:80], rtol=1e-8)


def test_nystrom_convergence_rate_on_kinked_kernel():
    # min(x, y) has a kink on the diagonal: second-order convergence, error ratio 4 per halving
    errs = [np.abs(nystrom_oracle(brownian, 1, order=o).eigenvalues[:10] - BROWNIAN_SPECTRUM[:10])
            for o in (100, 200)]
    ratio = errs[0] / errs[1]
    assert np.all((ratio > 3.5) & (ratio < 4.5))


def test_nystrom_smooth_kernel_exact():
    # rank-one kernel (1 + x)(1 + y): single eigenvalue 7/3
    res = nystrom_oracle(lambda x, y: (1 + x[:, 0]) * (1 + y[:, 0]), 1, order=20)
    assert res.eigenvalues[0] == pytest.approx(7 / 3, rel=1e-13)
    assert np.all(np.abs(res.eigenvalues[1:]) < 1e-12)
    pts = np.array([[0.0], [0.5], [1.0]])
    assert np.allclose(res.eigenfunctions(pts, 1)[:, 0], (1 + pts[:, 0]) / np.sqrt(7 / 3), atol=1e-12)


def test_dense_cumulant_rank_one():
    kern = lambda x, y, z: (1 + x[:, 0]) * (1 + y[:, 0]) * (1 + z[:, 0])  # noqa: E731
    F = lambda u: np.stack([np.ones(len(u)), u[:, 0]], axis=1)  # noqa: E731
    C = dense_cumulant3_oracle(kern, F, 1, order=4)
    v = np.array([1.5, 0.5 + 1 / 3])  # integrals of (1 + x) against 1 and x
    assert np.allclose(C, np.einsum("i,j,k->ijk", v, v, v), rtol=1e-13)


def test_dense_cumulant_reports_unresolved_quadrature():
    kern = lambda x, y, z: np.abs(x[:, 0] - 0.3) ** 0.5 * np.ones(len(y))  # noqa: E731
    F = lambda u: np.ones((len(u), 1))  # noqa: E731
    with pytest.raises(QuadratureNotConverged):
        dense_cumulant3_oracle(kern, F, 1, order=4, rtol=1e-14, max_order=16)
