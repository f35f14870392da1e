"""Adaptive Chebyshev representation of univariate functions and quasimatrices.

Two containers live here:

* :class:`AdaptiveFunction` -- one smooth function on a finite interval,
  stored as a trimmed vector of Chebyshev coefficients.
* :class:`FunctionMatrix` -- a rows x cols array of such functions sharing
  one interval.  Entries share a common (zero padded) coefficient length so
  evaluation and quadrature vectorize over the whole matrix.

A FunctionMatrix with ``B`` rows can also be read as a quasimatrix whose
columns are vector valued; the column inner product then sums over rows,
which is exactly the inner product of the columns after their supports are
joined onto ``[0, B]`` (see :func:`join_supports`).  The QR factorizations
use that reading, so joined and ordinary quasimatrices share one code path.
"""

from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy.fft import dct
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf

from .errors import BlockMismatch, DomainMismatch, NonConvergent, RankDeficient, ShapeMismatch

DEFAULT_TOL = 1e-14
TRIM_TOL = 1e-14
MIN_LOG2 = 4
MAX_LOG2 = 13
QR_RANK_TOL = 1e-14
# Cholesky works on the Gram matrix, so its diagonal carries sqrt(eps) noise.
CHOLESKY_RANK_TOL = 1e-7


# ---------------------------------------------------------------------------
# Chebyshev points, transforms and weights
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _chebpts_ref(n):
    if n == 1:
        return np.zeros(1)
    return np.cos(np.pi * np.arange(n) / (n - 1))


def chebpts(n, domain=(0.0, 1.0)):
    """Chebyshev points of the second kind on ``domain`` (descending order)."""
    a, b = domain
    return 0.5 * (b - a) * _chebpts_ref(n) + 0.5 * (a + b)


def vals2coeffs(values):
    """Chebyshev coefficients from samples at :func:`chebpts` along the last axis."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    if n == 1:
        return values.copy()
    c = dct(values, type=1, axis=-1) / (n - 1)
    c[..., 0] *= 0.5
    c[..., -1] *= 0.5
    return c


@lru_cache(maxsize=64)
def _intweights_ref(n):
    k = np.arange(n)
    w = np.zeros(n)
    even = k % 2 == 0
    w[even] = 2.0 / (1.0 - k[even] ** 2)
    return w


@lru_cache(maxsize=32)
def _cc_weights_ref(n):
    # weights w with sum_j w_j v_j == integral of the degree n-1 interpolant
    return vals2coeffs(np.eye(n)) @ _intweights_ref(n)


def clenshaw_curtis(n, domain=(0.0, 1.0)):
    a, b = domain
    return chebpts(n, domain), 0.5 * (b - a) * _cc_weights_ref(n)


@lru_cache(maxsize=64)
def _gauss_ref(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n, domain=(0.0, 1.0)):
    a, b = domain
    x, w = _gauss_ref(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _to_ref(x, domain):
    a, b = domain
    return (2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a)


def _trim(coeffs, scale):
    """Drop trailing coefficients below ``TRIM_TOL * scale`` along the last axis."""
    if scale == 0.0:
        return coeffs[..., :1] * 0.0
    mag = np.abs(coeffs).reshape(-1, coeffs.shape[-1]).max(axis=0)
    keep = np.nonzero(mag > TRIM_TOL * scale)[0]
    n = keep[-1] + 1 if keep.size else 1
    return coeffs[..., :n]


def _check_domain(domain):
    a, b = float(domain[0]), float(domain[1])
    if not (np.isfinite(a) and np.isfinite(b) and b > a):
        raise DomainMismatch(f"invalid interval [{a}, {b}]")
    return (a, b)


# ---------------------------------------------------------------------------
# Containers
# ---------------------------------------------------------------------------

class AdaptiveFunction:
    """A smooth real function on ``[a, b]`` in Chebyshev coefficient form."""

    __slots__ = ("coeffs", "domain")

    def __init__(self, coeffs, domain=(0.0, 1.0)):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ShapeMismatch("coefficients must be a non-empty vector")
        scale = np.abs(c).max()
        self.coeffs = _trim(c, scale) if scale > 0 else c[:1] * 0.0
        self.domain = _check_domain(domain)

    def __call__(self, x):
        return npcheb.chebval(_to_ref(x, self.domain), self.coeffs)

    def __len__(self):
        return self.coeffs.size

    @property
    def degree(self):
        return self.coeffs.size - 1

    def __repr__(self):
        return f"AdaptiveFunction(length={len(self)}, domain={self.domain})"


class FunctionMatrix:
    """Rectangular array of functions on one interval.

    Parameters
    ----------
    coeffs : array_like, shape (rows, cols, n)
        Chebyshev coefficients, last axis is the polynomial index.
    domain : tuple of float
    """

    __slots__ = ("coeffs", "domain")
    __array_ufunc__ = None  # make ndarray @ FunctionMatrix defer to __rmatmul__

    def __init__(self, coeffs, domain=(0.0, 1.0)):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 3 or c.shape[2] == 0:
            raise ShapeMismatch(f"expected (rows, cols, n) coefficients, got {c.shape}")
        self.coeffs = c
        self.domain = _check_domain(domain)

    @classmethod
    def from_functions(cls, entries):
        """Build from a nested list of :class:`AdaptiveFunction`."""
        rows = len(entries)
        cols = len(entries[0])
        domain = entries[0][0].domain
        n = max(len(e) for row in entries for e in row)
        c = np.zeros((rows, cols, n))
        for i, row in enumerate(entries):
            if len(row) != cols:
                raise ShapeMismatch("ragged entry list")
            for j, e in enumerate(row):
                if e.domain != domain:
                    raise DomainMismatch("entries must share one domain")
                c[i, j, : len(e)] = e.coeffs
        return cls(c, domain)

    @classmethod
    def constant(cls, values, domain=(0.0, 1.0)):
        v = np.atleast_2d(np.asarray(values, dtype=float))
        return cls(v[:, :, None], domain)

    @property
    def shape(self):
        return self.coeffs.shape[:2]

    @property
    def rows(self):
        return self.coeffs.shape[0]

    @property
    def cols(self):
        return self.coeffs.shape[1]

    @property
    def length(self):
        return self.coeffs.shape[2]

    def __getitem__(self, idx):
        i, j = idx
        return AdaptiveFunction(self.coeffs[i, j], self.domain)

    def __call__(self, x):
        """Evaluate; scalar ``x`` gives (rows, cols), array ``x`` gives (rows, cols, N)."""
        y = _to_ref(x, self.domain)
        if np.ndim(y) == 0:
            return npcheb.chebval(y, np.moveaxis(self.coeffs, 2, 0))
        # Vandermonde product keeps large matrices on BLAS
        V = npcheb.chebvander(np.ravel(y), self.length - 1)  # (N, n)
        rows, cols = self.shape
        vals = V @ self.coeffs.reshape(rows * cols, -1).T
        return vals.T.reshape((rows, cols) + np.shape(y))

    @property
    def T(self):
        return FunctionMatrix(self.coeffs.transpose(1, 0, 2), self.domain)

    def __matmul__(self, other):
        other = np.asarray(other, dtype=float)
        if other.ndim != 2 or other.shape[0] != self.cols:
            raise ShapeMismatch(f"cannot multiply {self.shape} by {other.shape}")
        return FunctionMatrix(np.einsum("ijn,jk->ikn", self.coeffs, other), self.domain)

    def __rmatmul__(self, other):
        other = np.asarray(other, dtype=float)
        if other.ndim != 2 or other.shape[1] != self.rows:
            raise ShapeMismatch(f"cannot multiply {other.shape} by {self.shape}")
        return FunctionMatrix(np.einsum("ki,ijn->kjn", other, self.coeffs), self.domain)

    def trimmed(self):
        scale = np.abs(self.coeffs).max()
        return FunctionMatrix(_trim(self.coeffs, scale), self.domain)

    def integrate(self):
        """Entrywise integral over the domain, shape (rows, cols)."""
        a, b = self.domain
        return 0.5 * (b - a) * (self.coeffs @ _intweights_ref(self.length))

    def __repr__(self):
        return f"FunctionMatrix(shape={self.shape}, length={self.length}, domain={self.domain})"


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def _call_vectorized(f, x):
    try:
        v = np.asarray(f(x), dtype=float)
        if v.shape == x.shape:
            return v
    except (TypeError, ValueError):
        pass
    return np.array([float(f(xi)) for xi in x])


def approximate(f, domain=(0.0, 1.0), tol=DEFAULT_TOL):
    """Adaptively resolve a scalar function on ``domain``.

    Samples on Chebyshev grids of 2**k + 1 points, k = 4..13, and accepts the
    first grid whose upper half of coefficients is below ``tol`` relative to
    the largest coefficient.
    """
    domain = _check_domain(domain)
    if tol < 1e-15:
        raise ValueError("tol must be >= 1e-15")
    for k in range(MIN_LOG2, MAX_LOG2 + 1):
        n = 2**k + 1
        x = chebpts(n, domain)
        v = _call_vectorized(f, x)
        if not np.all(np.isfinite(v)):
            raise NonConvergent("function returned non-finite samples")
        c = vals2coeffs(v)
        scale = np.abs(c).max()
        if scale == 0.0:
            return AdaptiveFunction([0.0], domain)
        if np.abs(c[n // 2 :]).max() <= tol * scale:
            return AdaptiveFunction(c, domain)
    raise NonConvergent(f"not resolved with {2**MAX_LOG2 + 1} points at tol={tol:g}")


def approximate_matrix(F, shape, domain=(0.0, 1.0), tol=DEFAULT_TOL):
    """Resolve every entry of a matrix-valued function at once.

    ``F`` maps an array of N points to values of shape ``shape + (N,)``.  The
    acceptance test is relative to the largest coefficient of the whole
    matrix, so entries that are tiny compared to the rest do not stall
    refinement on round-off.
    """
    domain = _check_domain(domain)
    rows, cols = shape
    for k in range(MIN_LOG2, MAX_LOG2 + 1):
        n = 2**k + 1
        x = chebpts(n, domain)
        v = np.asarray(F(x), dtype=float)
        if v.shape != (rows, cols, n):
            raise ShapeMismatch(f"F returned {v.shape}, expected {(rows, cols, n)}")
        if not np.all(np.isfinite(v)):
            raise NonConvergent("function returned non-finite samples")
        c = vals2coeffs(v)
        scale = np.abs(c).max()
        if scale == 0.0:
            return FunctionMatrix(np.zeros((rows, cols, 1)), domain)
        if np.abs(c[..., n // 2 :]).max() <= tol * scale:
            return FunctionMatrix(_trim(c, scale), domain)
    raise NonConvergent(f"matrix not resolved with {2**MAX_LOG2 + 1} points at tol={tol:g}")


# ---------------------------------------------------------------------------
# Calculus
# ---------------------------------------------------------------------------

def integrate(g):
    """Integral of an AdaptiveFunction (or entrywise for a FunctionMatrix)."""
    if isinstance(g, FunctionMatrix):
        return g.integrate()
    a, b = g.domain
    return float(0.5 * (b - a) * (g.coeffs @ _intweights_ref(g.coeffs.size)))


def inner_product(g1, g2):
    """Exact integral of ``g1 * g2`` via Clenshaw-Curtis on enough points."""
    if g1.domain != g2.domain:
        raise DomainMismatch(f"{g1.domain} != {g2.domain}")
    n = len(g1) + len(g2)
    x, w = clenshaw_curtis(n, g1.domain)
    return float(w @ (g1(x) * g2(x)))


def _product_nodes(len_a, len_b, domain):
    # Gauss-Legendre with n nodes is exact up to degree 2n - 1
    return gauss_legendre((len_a + len_b) // 2 + 1, domain)


def integrate_product(A, B):
    """Matrix integral of ``A(x) @ B(x)`` over the shared domain."""
    if A.domain != B.domain:
        raise DomainMismatch(f"{A.domain} != {B.domain}")
    if A.cols != B.rows:
        raise ShapeMismatch(f"cannot multiply {A.shape} by {B.shape}")
    x, w = _product_nodes(A.length, B.length, A.domain)
    return np.einsum("pqn,qsn,n->ps", A(x), B(x), w, optimize=True)


def column_gram(M):
    """Gram matrix of the (joined) columns of ``M``: sum over rows of entry products."""
    M = _as_blocks(M)
    x, w = _product_nodes(M.length, M.length, M.domain)
    V = M(x)
    return np.einsum("bin,bjn,n->ij", V, V, w, optimize=True)


# ---------------------------------------------------------------------------
# Joined supports
# ---------------------------------------------------------------------------

class JoinedMatrix:
    """Pieces of a FunctionMatrix concatenated onto ``[0, nblocks]``.

    With ``axis=0`` the rows are joined: the result behaves as a 1 x cols
    row of functions on ``[0, rows]`` whose piece j (occupying [j, j+1])
    is row j of ``blocks``.  With ``axis=1`` the columns are joined into a
    rows x 1 column on ``[0, cols]``.
    """

    __slots__ = ("blocks", "axis")

    def __init__(self, blocks, axis=0):
        if axis not in (0, 1):
            raise ValueError("axis must be 0 or 1")
        if blocks.domain != (0.0, 1.0):
            raise DomainMismatch("joined pieces must live on [0, 1]")
        self.blocks = blocks
        self.axis = axis

    @property
    def nblocks(self):
        return self.blocks.shape[self.axis]

    @property
    def domain(self):
        return (0.0, float(self.nblocks))

    @property
    def shape(self):
        r, c = self.blocks.shape
        return (1, c) if self.axis == 0 else (r, 1)

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        j = np.clip(np.floor(s).astype(int), 0, self.nblocks - 1)
        t = s - j
        vals = self.blocks(t)  # (rows, cols, N)
        idx = np.arange(s.size)
        if self.axis == 0:
            return vals[j, :, idx].T[None, :, :]
        return vals[:, j, idx][:, None, :]

    def gram(self):
        if self.axis == 0:
            return column_gram(self.blocks)
        return column_gram(self.blocks.T)


def join_supports(M, axis=0):
    """Concatenate the rows (``axis=0``) or columns (``axis=1``) of ``M`` by unit shifts."""
    if isinstance(M, JoinedMatrix):
        raise ShapeMismatch("matrix is already joined")
    return JoinedMatrix(M, axis)


def disjoin_supports(g, blocks):
    """Split a joined matrix back into ``blocks`` pieces on [0, 1].

    Returns the block FunctionMatrix with piece i of joined column j at
    entry (i, j) (rows joined) or (j, i) (columns joined).
    """
    if not isinstance(g, JoinedMatrix):
        raise ShapeMismatch("expected a JoinedMatrix")
    if g.nblocks != blocks:
        raise BlockMismatch(f"joined domain has {g.nblocks} unit blocks, asked for {blocks}")
    return g.blocks


def _as_blocks(M):
    if isinstance(M, JoinedMatrix):
        return M.blocks if M.axis == 0 else M.blocks.T
    return M


def _rewrap(M, Q):
    if isinstance(M, JoinedMatrix):
        return JoinedMatrix(Q if M.axis == 0 else Q.T, M.axis)
    return Q


# ---------------------------------------------------------------------------
# QR of quasimatrices
# ---------------------------------------------------------------------------

def _check_rank(R, rtol, Q, allow_rank_deficient):
    d = np.abs(np.diag(R))
    if d.size == 0 or allow_rank_deficient:
        return
    bad = np.nonzero(d < rtol * d.max())[0]
    if bad.size:
        raise RankDeficient(int(bad[0]) + 1, Q, R)


def qr_householder(M, allow_rank_deficient=False):
    """Householder QR of the columns of a quasimatrix.

    The columns are sampled on a Clenshaw-Curtis grid fine enough that the
    weighted discrete inner product is exact for the polynomial columns;
    the weighted sample matrix is triangularized with LAPACK Householder
    reflections and the orthonormal factor is mapped back to coefficients.

    Returns ``(Q, R)`` with ``diag(R) >= 0``.  Raises :class:`RankDeficient`
    (carrying Q and R) when a diagonal of R drops below 1e-14 times the
    largest one, unless ``allow_rank_deficient``.
    """
    B = _as_blocks(M)
    nb, nc, L = B.coeffs.shape
    npts = max(2 * L - 1, 2)
    x, w = clenshaw_curtis(npts, B.domain)
    sw = np.sqrt(w)
    A = (B(x) * sw).transpose(0, 2, 1).reshape(nb * npts, nc)
    Qd, R = np.linalg.qr(A)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Qd = Qd * signs
    R = signs[:, None] * R
    vals = (Qd.reshape(nb, npts, nc) / sw[None, :, None]).transpose(0, 2, 1)
    Q = _rewrap(M, FunctionMatrix(vals2coeffs(vals)[..., :L], B.domain))
    _check_rank(R, QR_RANK_TOL, Q, allow_rank_deficient)
    return Q, R


def qr_cholesky(M, allow_rank_deficient=False):
    """QR through the Cholesky factor of the column Gram matrix.

    Cheaper than :func:`qr_householder`; reliable while the Gram matrix
    condition number stays below about 1e12.  Rank is judged with a 1e-7
    relative threshold on diag(R) because R carries sqrt(eps) noise here.
    """
    B = _as_blocks(M)
    G = column_gram(B)
    G = 0.5 * (G + G.T)
    U, info = dpotrf(G, lower=0, clean=1)
    if info != 0:
        if allow_rank_deficient:
            return qr_householder(M, allow_rank_deficient=True)
        raise RankDeficient(int(info))
    R = U
    d = np.abs(np.diag(R))
    if not allow_rank_deficient and np.any(d < CHOLESKY_RANK_TOL * d.max()):
        col = int(np.nonzero(d < CHOLESKY_RANK_TOL * d.max())[0][0]) + 1
        raise RankDeficient(col, None, R)
    nb, nc, L = B.coeffs.shape
    flat = B.coeffs.transpose(0, 2, 1).reshape(nb * L, nc)
    Qc = solve_triangular(R, flat.T, trans="T", lower=False).T  # flat @ inv(R)
    Q = FunctionMatrix(Qc.reshape(nb, L, nc).transpose(0, 2, 1), B.domain)
    return _rewrap(M, Q), R


def qr(M, method="householder", allow_rank_deficient=False):
    if method == "householder":
        return qr_householder(M, allow_rank_deficient)
    if method == "cholesky":
        return qr_cholesky(M, allow_rank_deficient)
    raise ValueError(f"unknown QR method {method!r}")
