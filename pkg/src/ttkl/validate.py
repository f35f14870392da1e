"""Global random tests and brute-force reference solutions.

The references here share no code with the tensor-train path: they work on
tensorized Gauss-Legendre grids in the parametric cube.
"""

import time
from dataclasses import dataclass

import numpy as np

from .chebapprox import gauss_legendre
from .errors import QuadratureNotConverged, ZeroReference
from .sampling import as_rng, halton


@dataclass
class ErrorReport:
    metric: str
    N: int
    value: float
    seed: int
    elapsed: float

    def as_dict(self):
        return {"metric": self.metric, "N": self.N, "value": self.value, "seed": self.seed, "elapsed": self.elapsed}


def sample_points(a, N, seed):
    """N scrambled Halton points in [0, 1]^a."""
    return halton(N, a, as_rng(seed))


def relative_rms(ref, approx):
    ref = np.asarray(ref, dtype=float)
    denom = np.sqrt(np.mean(ref**2))
    if denom == 0.0:
        raise ZeroReference("reference vanishes on every test point")
    return float(np.sqrt(np.mean((ref - np.asarray(approx, dtype=float)) ** 2)) / denom)


def global_relative_error(reference, approx, a, N=1000, seed=0, metric="eps_g"):
    """Relative RMS discrepancy of two callables on N quasi-random points of [0, 1]^a."""
    start = time.perf_counter()
    u = sample_points(a, N, seed)
    value = relative_rms(reference(u), approx(u))
    return ErrorReport(metric, int(N), value, int(seed), time.perf_counter() - start)


def final_cumulant_error(fe, order, reference, N=1000, seed=0):
    """Error of the final expansion's order-2 or order-3 cumulant against the parametric kernel.

    ``reference`` takes ``order`` arrays of parametric points, each (npts, m).
    """
    m = fe.m
    if order == 2:
        approx = fe.covariance
    elif order == 3:
        approx = fe.cumulant3
    else:
        raise ValueError("order must be 2 or 3")

    def split(fn):
        return lambda u: fn(*(u[:, i * m : (i + 1) * m] for i in range(order)))

    return global_relative_error(split(reference), split(approx), order * m, N, seed, f"eps_gf{order}")


# ---------------------------------------------------------------------------
# Reference eigen-solve
# ---------------------------------------------------------------------------

def tensor_gauss(order, m):
    """Tensor Gauss-Legendre grid on [0, 1]^m: nodes (order^m, m) and weights."""
    x, w = gauss_legendre(order)
    nodes = np.array(np.meshgrid(*([x] * m), indexing="ij")).reshape(m, -1).T
    weights = np.prod(np.array(np.meshgrid(*([w] * m), indexing="ij")).reshape(m, -1), axis=0)
    return nodes, weights


def _fast_kernel(kernel, nodes):
    """Evaluate pullbacks through precomputed physical nodes; plain kernels as given."""
    geom = getattr(kernel, "geometry", None)
    if geom is None:
        return nodes, kernel
    return geom.map(nodes), kernel.kernel


@dataclass
class NystromResult:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # eigenfunction values at the nodes, L2-normalized under the quadrature
    nodes: np.ndarray
    weights: np.ndarray
    kernel: object

    def eigenfunctions(self, points, count=None):
        """Nystrom interpolation of the leading ``count`` eigenfunctions at points (npts, m)."""
        count = count or self.eigenvalues.size
        pts = np.atleast_2d(points)
        K = np.stack([self.kernel(np.repeat(p[None, :], len(self.nodes), 0), self.nodes) for p in pts])
        return (K * self.weights) @ self.vectors[:, :count] / self.eigenvalues[:count]


def nystrom_oracle(kernel, m, order=40):
    """Eigenpairs of the integral operator of ``kernel`` on [0, 1]^m by Gauss-Nystrom.

    ``kernel`` takes two arrays of parametric points (npts, m).
    """
    nodes, w = tensor_gauss(order, m)
    pts, kern = _fast_kernel(kernel, nodes)
    Q = len(nodes)
    K = kern(np.repeat(pts, Q, axis=0), np.tile(pts, (Q, 1))).reshape(Q, Q)
    K = 0.5 * (K + K.T)
    sw = np.sqrt(w)
    ev, V = np.linalg.eigh(sw[:, None] * K * sw[None, :])
    order_desc = np.argsort(ev)[::-1]
    ev, V = ev[order_desc], V[:, order_desc]
    vecs = V / sw[:, None]
    peak = vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])]
    vecs = vecs * np.where(peak < 0, -1.0, 1.0)
    return NystromResult(ev, vecs, nodes, w, kernel)


# ---------------------------------------------------------------------------
# Reference third cumulant of the latent factors
# ---------------------------------------------------------------------------

def _dense_cumulant3(kernel, F, m, order):
    nodes, w = tensor_gauss(order, m)
    pts, kern = _fast_kernel(kernel, nodes)
    FW = F(nodes) * w[:, None]  # (Q, n)
    Q, n = FW.shape
    first = np.repeat(pts, Q, axis=0)
    second = np.tile(pts, (Q, 1))
    C = np.zeros((n, n, n))
    for p in range(Q):
        vals = kern(np.broadcast_to(pts[p], first.shape), first, second).reshape(Q, Q)
        C += np.einsum("i,jk->ijk", FW[p], FW.T @ vals @ FW)
    return C


def dense_cumulant3_oracle(kernel, F, m, order=8, rtol=1e-6, max_order=32):
    """Latent third cumulant by brute-force tensor Gauss quadrature.

    ``F`` maps parametric points (npts, m) to mode values (npts, n) with
    small n.  The grid order doubles until two successive results agree to
    ``rtol`` relative to the largest entry.
    """
    prev = _dense_cumulant3(kernel, F, m, order)
    while order * 2 <= max_order:
        order *= 2
        cur = _dense_cumulant3(kernel, F, m, order)
        scale = np.abs(cur).max()
        if scale == 0.0 or np.abs(cur - prev).max() <= rtol * scale:
            return cur
        prev = cur
    raise QuadratureNotConverged(f"third-cumulant quadrature unresolved at order {order}")
