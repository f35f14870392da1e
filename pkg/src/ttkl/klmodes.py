"""Directional K-L modes from a tensor train of the parametric covariance.

The covariance train uses the mirrored core order (xi, eta, zeta, zeta',
eta', xi').  Modes are extracted one direction at a time: each step builds a
separable bivariate kernel ``M_left(s) @ M_right(t)`` from the cores and the
modes already found, and diagonalizes it with two quasimatrix QRs and a
small SVD.  From the second direction on, the kernel is block valued and
its pieces are handled through joined supports.
"""

from dataclasses import dataclass

import numpy as np

from .chebapprox import FunctionMatrix, chebpts, integrate_product, qr
from .errors import ShapeMismatch

EIG_DROP_TOL = 1e-13


@dataclass
class KernelFactors:
    """Separable kernel ``K(s, t) = M_left(s) @ M_right(t)``.

    ``M_left`` is B x r and ``M_right`` is r x B.  With B > 1 the rows of
    ``M_left`` (columns of ``M_right``) are the pieces of functions on the
    joined interval ``[0, B]``, piece i carrying block index i.
    """

    M_left: FunctionMatrix
    M_right: FunctionMatrix

    def __post_init__(self):
        if self.M_left.cols != self.M_right.rows:
            raise ShapeMismatch(f"inner dimensions {self.M_left.shape} and {self.M_right.shape} disagree")
        if self.M_left.rows != self.M_right.cols:
            raise ShapeMismatch("left and right factors must have the same number of blocks")

    @property
    def blocks(self):
        return self.M_left.rows

    def __call__(self, s, t):
        """Block matrix K(s, t) of shape (B, B) for scalar s, t in [0, 1]."""
        return self.M_left(s) @ self.M_right(t)


@dataclass
class DirectionalModes:
    """Orthonormal directional modes and their eigenvalues.

    ``f`` is 1 x n1, ``g`` is n1 x n2 (block column i of g multiplies
    f_i), ``h`` is n2 x n3.  Missing directions are ``None``.
    """

    f: FunctionMatrix
    eig_f: np.ndarray
    g: FunctionMatrix = None
    eig_g: np.ndarray = None
    h: FunctionMatrix = None
    eig_h: np.ndarray = None

    @property
    def m(self):
        return 1 + (self.g is not None) + (self.h is not None)

    @property
    def counts(self):
        return tuple(M.cols for M in self.chain)

    @property
    def chain(self):
        return [M for M in (self.f, self.g, self.h) if M is not None]

    @property
    def eigenvalues(self):
        """Eigenvalues attached to the last direction (the latent variances)."""
        return [self.eig_f, self.eig_g, self.eig_h][self.m - 1]

    def product_modes(self, points):
        """Values of F = f g h at points of shape (npts, m); returns (npts, n_last)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.m:
            raise ShapeMismatch(f"points have {pts.shape[1]} coordinates, modes have {self.m}")
        v = self.f(pts[:, 0])[0].T  # (npts, n1)
        for k, M in enumerate(self.chain[1:], start=1):
            v = np.einsum("ni,ijn->nj", v, M(pts[:, k]), optimize=True)
        return v


def _orient(Q):
    """Flip each (joined) column so its value of largest magnitude is positive."""
    x = chebpts(max(2 * Q.length + 1, 33))
    V = Q(x)  # (blocks, cols, N)
    flat = V.transpose(1, 0, 2).reshape(Q.cols, -1)
    peak = flat[np.arange(Q.cols), np.argmax(np.abs(flat), axis=1)]
    signs = np.where(peak < 0, -1.0, 1.0)
    return FunctionMatrix(Q.coeffs * signs[None, :, None], Q.domain)


def eigpairs_bivariate(kf, qr_method="householder", energy_tol=None):
    """Eigenpairs of a separable symmetric kernel.

    Both factor quasimatrices are orthogonalized, ``R_L @ R_R.T`` is
    diagonalized by SVD, and singular values below 1e-13 of the largest are
    dropped with their modes.  ``energy_tol`` optionally truncates further to
    the smallest leading set holding ``1 - energy_tol`` of the total.

    Returns ``(eigenvalues, modes)`` where modes is B x n.
    """
    QL, RL = qr(kf.M_left, qr_method, allow_rank_deficient=True)
    QR, RR = qr(kf.M_right.T, qr_method, allow_rank_deficient=True)
    U, s, _ = np.linalg.svd(RL @ RR.T)
    keep = s >= EIG_DROP_TOL * s[0] if s.size and s[0] > 0 else np.zeros(s.size, dtype=bool)
    n = int(np.count_nonzero(keep))
    if energy_tol is not None and n:
        frac = np.cumsum(s[:n]) / s[:n].sum()
        n = int(np.searchsorted(frac, 1.0 - energy_tol) + 1)
        n = min(n, int(np.count_nonzero(keep)))
    modes = _orient(QL @ U[:, :n])
    return s[:n], modes


def _check_cores(train, ncores):
    if train.ndim != ncores:
        raise ShapeMismatch(f"expected a train with {ncores} cores, got {train.ndim}")


def marginal_kernel_1d(train):
    _check_cores(train, 2)
    G1, G2 = train.cores
    return KernelFactors(G1, G2)


def marginal_kernel_2d(train):
    """Kernel in (xi, xi') after integrating eta out of the mirrored 4-core train."""
    _check_cores(train, 4)
    G1, G2, G3, G4 = train.cores
    return KernelFactors(G1 @ integrate_product(G2, G3), G4)


def marginal_kernel_3d(train):
    """Kernel in (xi, xi') after integrating eta and zeta out of the 6-core train."""
    _check_cores(train, 6)
    G1, G2, G3, G4, G5, G6 = train.cores
    P34 = integrate_product(G3, G4)
    return KernelFactors(G1 @ integrate_product(G2 @ P34, G5), G6)


def second_kernel_2d(train, f):
    """Block kernel in (eta, eta') after projecting xi and xi' onto ``f``."""
    _check_cores(train, 4)
    G1, G2, G3, G4 = train.cores
    left = integrate_product(f.T, G1)  # n1 x r1
    right = integrate_product(G4, f)  # r3 x n1
    return KernelFactors(left @ G2, G3 @ right)


def second_kernel_3d(train, f):
    """Block kernel in (eta, eta') of the 6-core train, zeta integrated out."""
    _check_cores(train, 6)
    G1, G2, G3, G4, G5, G6 = train.cores
    left = integrate_product(f.T, G1)
    right = integrate_product(G6, f)
    P34 = integrate_product(G3, G4)
    return KernelFactors((left @ G2) @ P34, G5 @ right)


def third_kernel_3d(train, f, g):
    """Block kernel in (zeta, zeta') after projecting xi and eta onto f and g."""
    _check_cores(train, 6)
    G1, G2, G3, G4, G5, G6 = train.cores
    left = integrate_product(f.T, G1)
    right = integrate_product(G6, f)
    lg = integrate_product(g.T, left @ G2)  # n2 x r2
    rg = integrate_product(G5 @ right, g)  # r4 x n2
    return KernelFactors(lg @ G3, G4 @ rg)


def modes_1d(train, qr_method="householder", energy_tol=None):
    lam, f = eigpairs_bivariate(marginal_kernel_1d(train), qr_method, energy_tol)
    return DirectionalModes(f=f, eig_f=lam)


def modes_2d(train, qr_method="householder", energy_tol=None):
    lam, f = eigpairs_bivariate(marginal_kernel_2d(train), qr_method)
    mu, g = eigpairs_bivariate(second_kernel_2d(train, f), qr_method, energy_tol)
    return DirectionalModes(f=f, eig_f=lam, g=g, eig_g=mu)


def modes_3d(train, qr_method="householder", energy_tol=None):
    _check_cores(train, 6)
    lam, f = eigpairs_bivariate(marginal_kernel_3d(train), qr_method)
    mu, g = eigpairs_bivariate(second_kernel_3d(train, f), qr_method)
    nu, h = eigpairs_bivariate(third_kernel_3d(train, f, g), qr_method, energy_tol)
    return DirectionalModes(f=f, eig_f=lam, g=g, eig_g=mu, h=h, eig_h=nu)


def compute_modes(train, m, qr_method="householder", energy_tol=None):
    solver = {1: modes_1d, 2: modes_2d, 3: modes_3d}.get(m)
    if solver is None:
        raise ValueError(f"parametric dimension {m} not in 1..3")
    return solver(train, qr_method, energy_tol)


def reconstruct_covariance(modes, eigenvalues, x, y, transform=None):
    """Reconstructed covariance ``F(x) Lambda F(y)^T`` at paired points.

    ``eigenvalues`` may be a vector (diagonal latent covariance) or a full
    matrix.  ``transform`` (n_last x n) is applied to F first when the latent
    space is compressed.
    """
    Fx = modes.product_modes(x)
    Fy = modes.product_modes(y)
    if transform is not None:
        Fx, Fy = Fx @ transform, Fy @ transform
    C = np.asarray(eigenvalues, dtype=float)
    if C.ndim == 1:
        return np.einsum("nk,k,nk->n", Fx, C, Fy)
    return np.einsum("nk,kl,nl->n", Fx, C, Fy)
