"""Third-order cumulant of the latent factors, HOSVD truncation and the final expansion.

The third-cumulant train keeps the three points as consecutive blocks of m
cores each.  Projecting block I onto the product modes F = f g h turns it
into a third-order tensor A_I (left rank x n_latent x right rank), and the
latent cumulant tensor is the contracted chain A_1 A_2 A_3.  Everything
below works on that chain and never forms the dense n^3 tensor unless asked.
"""

from dataclasses import dataclass, field

import numpy as np

from .chebapprox import gauss_legendre
from .errors import NoneRetained, ShapeMismatch


@dataclass
class LatentCumulant3:
    """Chain of three cores, each (left rank, n_latent, right rank)."""

    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray

    def __post_init__(self):
        A1, A2, A3 = (np.asarray(A, dtype=float) for A in (self.A1, self.A2, self.A3))
        if A1.shape[0] != 1 or A3.shape[2] != 1:
            raise ShapeMismatch("boundary ranks must be 1")
        if A1.shape[2] != A2.shape[0] or A2.shape[2] != A3.shape[0]:
            raise ShapeMismatch(f"cores {A1.shape}, {A2.shape}, {A3.shape} do not chain")
        if not A1.shape[1] == A2.shape[1] == A3.shape[1]:
            raise ShapeMismatch("cores disagree on the latent dimension")
        self.A1, self.A2, self.A3 = A1, A2, A3

    @property
    def cores(self):
        return (self.A1, self.A2, self.A3)

    @property
    def n_latent(self):
        return self.A1.shape[1]

    @property
    def ranks(self):
        return (self.A1.shape[2], self.A2.shape[2])

    def dense(self):
        """Full n x n x n tensor; only for small n."""
        return np.einsum("ia,ajb,bk->ijk", self.A1[0], self.A2, self.A3[:, :, 0], optimize=True)

    def contract(self, V1, V2, V3):
        """Multiply every latent axis by a vector: rows of V_i (npts, n) give (npts,) values."""
        left = np.einsum("nl,lb->nb", V1, self.A1[0])
        mid = np.einsum("nl,alb->nab", V2, self.A2, optimize=True)
        right = V3 @ self.A3[:, :, 0].T  # (npts, r2)
        return np.einsum("na,nab,nb->n", left, mid, right, optimize=True)


@dataclass
class Compression:
    U3: np.ndarray
    tol3: float
    lambda2: np.ndarray
    lambda3: np.ndarray
    basis: np.ndarray = None  # full orthogonal eigenbasis of the mode-1 Gram matrix

    @property
    def n(self):
        return self.U3.shape[1]

    @property
    def cum2(self):
        C = self.U3.T @ (self.lambda2[:, None] * self.U3)
        return 0.5 * (C + C.T)


def identity_compression(lambda2):
    lambda2 = np.asarray(lambda2, dtype=float)
    n = lambda2.size
    return Compression(np.eye(n), 1.0, lambda2, np.zeros(n), np.eye(n))


@dataclass
class FinalExpansion:
    """alpha(xi) ~ F(xi) gamma with F = f g h U3, Cum2 and Cum3 of gamma given."""

    modes: object
    U3: np.ndarray
    cum2: np.ndarray
    cum3: LatentCumulant3 = None
    geometry: object = None
    metadata: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.modes.m

    @property
    def n(self):
        return self.U3.shape[1]

    def F(self, points):
        """Final mode row at parametric points (npts, m); returns (npts, n)."""
        return self.modes.product_modes(points) @ self.U3

    def covariance(self, x, y):
        Fx, Fy = self.F(x), self.F(y)
        return np.einsum("nk,kl,nl->n", Fx, self.cum2, Fy)

    def cumulant3(self, x, y, z):
        if self.cum3 is None:
            raise ValueError("expansion carries no third cumulant")
        return self.cum3.contract(self.F(x), self.F(y), self.F(z))


def _project_block(cores, chain):
    """A (left, n_latent, right) for one point block of the third-cumulant train.

    Carries T[p, j, c] = integral of the product of the mode chain so far
    against the product of the block's cores, and folds in one direction at
    a time.
    """
    r_left = cores[0].rows
    T = np.eye(r_left)[None, :, :]
    for core, M in zip(cores, chain):
        x, w = gauss_legendre((core.length + M.length) // 2 + 1)
        Gx = core(x)  # (b, c, N)
        Mx = M(x)  # (p, l, N)
        T = np.einsum("pln,pjb,bcn,n->ljc", Mx, T, Gx, w, optimize=True)
    return T.transpose(1, 0, 2)


def project_third_cumulant(train3, modes):
    """Latent third cumulant of ``F = f g h`` against a block-ordered third-cumulant train."""
    m = modes.m
    if train3.ndim != 3 * m:
        raise ShapeMismatch(f"third-cumulant train has {train3.ndim} cores, expected {3 * m}")
    chain = modes.chain
    A = [_project_block(train3.cores[i * m : (i + 1) * m], chain) for i in range(3)]
    return LatentCumulant3(*A)


def gram_mode1(lc):
    """Mode-1 unfolding times its transpose, by decoupled sums over the chain."""
    A3 = lc.A3[:, :, 0]
    W3 = A3 @ A3.T  # (r2, r2)
    W2 = np.einsum("ajb,bc,djc->ad", lc.A2, W3, lc.A2, optimize=True)
    A1 = lc.A1[0]
    G = A1 @ W2 @ A1.T
    return 0.5 * (G + G.T)


def _retention_ratios(U, lambda2, lambda3, n):
    """Energy kept by the leading ``n`` basis vectors, for both cumulant orders.

    The mode-1 spectrum ``lambda3`` lives on the HOSVD basis itself, so its
    projected norm is that of the leading ``n`` values.
    """
    U3 = U[:, :n]
    r2 = np.linalg.norm(U3.T @ (lambda2[:, None] * U3)) / np.linalg.norm(lambda2)
    total = np.linalg.norm(lambda3)
    r3 = np.linalg.norm(lambda3[:n]) / total if total > 0 else 1.0
    return r2, r3


def hosvd_truncate(gram, lambda2, tol3):
    """Smallest leading HOSVD basis keeping both energy ratios above ``tol3``.

    Norms are Frobenius.  ``lambda3`` are the mode-1 singular values of the
    latent tensor (square roots of the clipped Gram eigenvalues).  The
    order-2 ratio projects the latent covariance onto the basis; the order-3
    ratio is the fraction of mode-1 energy on the leading ``n`` vectors.
    """
    if not 0.0 < tol3 < 1.0:
        raise ValueError("tol3 must lie in (0, 1)")
    lambda2 = np.asarray(lambda2, dtype=float)
    ev, U = np.linalg.eigh(0.5 * (gram + gram.T))
    order = np.argsort(-ev, kind="stable")
    ev, U = ev[order], U[:, order]
    lambda3 = np.sqrt(np.clip(ev, 0.0, None))
    for n in range(1, U.shape[1] + 1):
        if min(_retention_ratios(U, lambda2, lambda3, n)) > tol3:
            return Compression(U[:, :n].copy(), tol3, lambda2, lambda3, U)
    raise NoneRetained(f"no basis size satisfies tol3={tol3}")


def transform_cores(lc, U3):
    """Rotate the latent axis of every core: A'[:, :, :] = A x_2 U3^T."""
    U3 = np.asarray(U3, dtype=float)
    if U3.shape[0] != lc.n_latent:
        raise ShapeMismatch(f"U3 has {U3.shape[0]} rows, latent dimension is {lc.n_latent}")
    return LatentCumulant3(*(np.einsum("alb,lk->akb", A, U3) for A in lc.cores))


def assemble_final(geom, modes, compression, lc=None, metadata=None):
    cum3 = transform_cores(lc, compression.U3) if lc is not None else None
    meta = dict(metadata or {})
    meta.setdefault("mode_counts", list(modes.counts))
    meta.setdefault("n_latent", int(compression.U3.shape[0]))
    meta.setdefault("n_retained", int(compression.n))
    return FinalExpansion(modes, compression.U3, compression.cum2, cum3, geom, meta)


def eval_cumulant3_reduced(fe, x, y, z):
    return fe.cumulant3(x, y, z)


def supersymmetry_defect(T):
    """Largest deviation of a dense third-order tensor from its index permutations."""
    perms = [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    return max(float(np.abs(T - T.transpose(p)).max()) for p in perms)


def symmetrize(T):
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    return sum(T.transpose(p) for p in perms) / 6.0
