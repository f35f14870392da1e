"""Rank-revealing continuous tensor-train cross approximation.

A function ``G`` on ``[0, 1]^a`` is approximated by a chain of function
matrices (cores), built from fibers of ``G`` through nested interpolation
sets that are enriched one pivot at a time by a greedy residual search on
quasi-random samples.

``G`` is always vectorized: it receives an (npts, a) array and returns an
(npts,) array.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .chebapprox import FunctionMatrix, approximate_matrix
from .errors import AllZero, NotConverged, ShapeMismatch, SingularCrossMatrix
from .sampling import as_rng, halton


@dataclass
class CrossConfig:
    """Knobs of the cross approximation.

    ``mk`` is the number of quasi-random samples in each pivot search (the
    bivariate variant calls it m1).
    """

    tol: float = 1e-6
    maxswp: int = 500
    m0: int = 1000
    mk: int = 800
    seed: int = 0
    fiber_tol: float = 1e-13
    cond_max: float = 1e13

    def __post_init__(self):
        for name in ("maxswp", "m0", "mk"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")


@dataclass
class CrossDiagnostics:
    errdm: np.ndarray
    sweeps_used: int
    pivot_history: list = field(default_factory=list)
    converged: bool = False
    frozen: list = field(default_factory=list)
    evaluations: int = 0


class InterpolationSets:
    """Nested left/right index sets for each interface k = 1..a-1.

    ``left[k]`` is an (r_k, k) array of prefixes and ``right[k]`` an
    (r_k, a-k) array of suffixes.  ``left[0]`` and ``right[a]`` hold the
    single empty prefix/suffix, so boundary interfaces need no special case.
    """

    def __init__(self, a, left, right):
        self.a = a
        self.left = list(left)
        self.right = list(right)

    @classmethod
    def from_pivot(cls, u0):
        u0 = np.asarray(u0, dtype=float)
        a = u0.size
        left = [u0[:k][None, :] for k in range(a)] + [None]
        right = [None] + [u0[k:][None, :] for k in range(1, a + 1)]
        left[0] = np.empty((1, 0))
        right[a] = np.empty((1, 0))
        return cls(a, left, right)

    def copy(self):
        return InterpolationSets(self.a, self.left, self.right)

    def rank(self, k):
        if k == 0 or k == self.a:
            return 1
        return self.left[k].shape[0]

    @property
    def ranks(self):
        return tuple(self.rank(k) for k in range(1, self.a))

    def is_nested(self, atol=0.0):
        """Two-sided nestedness of every interface."""
        for k in range(1, self.a):
            L, R = self.left[k], self.right[k]
            if L.shape[0] != R.shape[0]:
                return False
            if k > 1 and not _rows_in(L[:, :-1], self.left[k - 1], atol):
                return False
            if k < self.a - 1 and not _rows_in(R[:, 1:], self.right[k + 1], atol):
                return False
        return True


def _rows_in(rows, table, atol):
    return all(np.any(np.all(np.abs(table - r) <= atol, axis=1)) for r in rows)


class FunctionTrain:
    """Continuous tensor train: core k is an r_{k-1} x r_k FunctionMatrix on [0, 1]."""

    def __init__(self, cores):
        cores = list(cores)
        if cores[0].rows != 1 or cores[-1].cols != 1:
            raise ShapeMismatch("boundary ranks must be 1")
        for A, B in zip(cores[:-1], cores[1:]):
            if A.cols != B.rows:
                raise ShapeMismatch(f"core shapes {A.shape} and {B.shape} do not chain")
        self.cores = cores

    @property
    def ndim(self):
        return len(self.cores)

    @property
    def ranks(self):
        return tuple(c.cols for c in self.cores[:-1])

    def evaluate(self, u):
        """Values at points ``u`` of shape (npts, a) (or a single point)."""
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        u = np.atleast_2d(u)
        if u.shape[1] != self.ndim:
            raise ShapeMismatch(f"points have {u.shape[1]} coordinates, train has {self.ndim}")
        v = np.ones((u.shape[0], 1))
        for k, core in enumerate(self.cores):
            v = np.einsum("nr,rsn->ns", v, core(u[:, k]), optimize=True)
        out = v[:, 0]
        return float(out[0]) if single else out

    __call__ = evaluate


def evaluate(train, u):
    return train.evaluate(u)


# ---------------------------------------------------------------------------
# Pivot search
# ---------------------------------------------------------------------------

class _CountingFunction:
    def __init__(self, G):
        self.G = G
        self.count = 0

    def __call__(self, pts):
        self.count += pts.shape[0]
        return np.asarray(self.G(pts), dtype=float)


def _eval_grid(G, *blocks):
    """Evaluate G on the broadcast concatenation of coordinate blocks.

    Each block has shape (..., width); leading axes broadcast against each
    other and the widths are concatenated into full points.
    """
    lead = np.broadcast_shapes(*(b.shape[:-1] for b in blocks))
    parts = [np.broadcast_to(b, lead + (b.shape[-1],)) for b in blocks]
    pts = np.concatenate(parts, axis=-1).reshape(-1, sum(b.shape[-1] for b in blocks))
    return G(pts).reshape(lead)


def cross_matrix(G, sets, k):
    L, R = sets.left[k], sets.right[k]
    return _eval_grid(G, L[:, None, :], R[None, :, :])


def initial_pivot(G, a, m0, seed=0):
    """Point of largest |G| among ``m0`` scrambled Halton samples."""
    u = halton(m0, a, as_rng(seed))
    vals = np.abs(np.asarray(G(u), dtype=float))
    i = int(np.argmax(vals))
    if vals[i] == 0.0:
        raise AllZero("G vanishes on every initial sample")
    return u[i]


def expand_interpolation_set(k, sets, G, config, rng=None):
    """One greedy enrichment of interface ``k``.

    Samples the joined residual surface ``G_st - G_s inv(G(I<=k, I>k)) G_t``
    on ``config.mk`` quasi-random points of ``[0, r_{k-1}] x [0, r_{k+1}]``.
    Returns ``(sets', errmax)``; the pivot at the maximum is added when
    ``errmax >= config.tol``.  Raises :class:`SingularCrossMatrix` (with the
    sets untouched) if the enlarged cross matrix is numerically singular.
    """
    rng = as_rng(config.seed if rng is None else rng)
    a = sets.a
    if not 1 <= k <= a - 1:
        raise ValueError(f"interface {k} outside 1..{a - 1}")
    Lprev, Lk = sets.left[k - 1], sets.left[k]
    Rk, Rnext = sets.right[k], sets.right[k + 1]
    r_prev, r_next = Lprev.shape[0], Rnext.shape[0]

    A = cross_matrix(G, sets, k)
    lu = lu_factor(A, check_finite=False)

    st = halton(config.mk, 2, rng) * np.array([r_prev, r_next])
    i = np.minimum(np.floor(st[:, 0]).astype(int), r_prev - 1)
    j = np.minimum(np.floor(st[:, 1]).astype(int), r_next - 1)
    s = (st[:, 0] - i)[:, None]
    t = (st[:, 1] - j)[:, None]

    g_st = _eval_grid(G, Lprev[i], s, t, Rnext[j])
    g_s = _eval_grid(G, Lprev[i][:, None, :], s[:, None, :], Rk[None, :, :])  # (mk, r_k)
    g_t = _eval_grid(G, Lk[None, :, :], t[:, None, :], Rnext[j][:, None, :])  # (mk, r_k)
    z = lu_solve(lu, g_t.T, check_finite=False)
    resid = g_st - np.einsum("mr,rm->m", g_s, z)

    best = int(np.argmax(np.abs(resid)))
    errmax = float(abs(resid[best]))
    if errmax < config.tol:
        return sets, errmax

    new_left = np.concatenate([Lprev[i[best]], s[best]])
    new_right = np.concatenate([t[best], Rnext[j[best]]])
    out = sets.copy()
    out.left[k] = np.vstack([Lk, new_left])
    out.right[k] = np.vstack([Rk, new_right])

    row = _eval_grid(G, new_left[None, :], out.right[k])
    col = _eval_grid(G, Lk, new_right[None, :])
    A2 = np.block([[A, col[:, None]], [row[None, :]]])
    cond = np.linalg.cond(A2)
    if not np.isfinite(cond) or cond > config.cond_max:
        raise SingularCrossMatrix(k, cond)
    return out, errmax


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

def extract_cores(G, sets, fiber_tol=1e-13):
    """Resolve the fibers of G through the interpolation sets as function matrices."""
    a = sets.a
    cores = []
    for k in range(1, a + 1):
        L, R = sets.left[k - 1], sets.right[k] if k < a else sets.right[a]
        rows, cols = L.shape[0], R.shape[0]

        def fibers(x, L=L, R=R):
            return _eval_grid(G, L[:, None, None, :], x[None, None, :, None], R[None, :, None, :])

        core = approximate_matrix(fibers, (rows, cols), tol=fiber_tol)
        if k < a:
            lu = lu_factor(cross_matrix(G, sets, k), check_finite=False)
            flat = core.coeffs.transpose(0, 2, 1).reshape(-1, cols)
            flat = lu_solve(lu, flat.T, trans=1, check_finite=False).T
            core = FunctionMatrix(flat.reshape(rows, core.length, cols).transpose(0, 2, 1))
        cores.append(core)
    return FunctionTrain(cores)


def _pivot_point(sets, k):
    return np.concatenate([sets.left[k][-1], sets.right[k][-1]])


def _visit(k, sets, G, config, rng, errd, diag):
    try:
        new, err = expand_interpolation_set(k, sets, G, config, rng)
    except SingularCrossMatrix as exc:
        diag.frozen.append((k, exc.cond))
        errd[k - 1] = 0.0
        return sets
    errd[k - 1] = err
    if new is not sets:
        diag.pivot_history.append((k, _pivot_point(new, k), err))
    return new


def cross_decompose(G, a, config=None):
    """Adaptive TT-cross of ``G`` on [0, 1]^a with alternating half-sweeps.

    Interfaces whose stored error is already below ``tol`` are skipped; a
    stored error is refreshed only when its interface is visited.  Returns
    ``(train, sets, diagnostics)``.
    """
    config = config or CrossConfig()
    if a < 2:
        raise ValueError("need at least two variables")
    if a == 2:
        return cross_decompose_bivariate(G, config)
    Gc = _CountingFunction(G)
    rng = as_rng(config.seed)
    sets = InterpolationSets.from_pivot(initial_pivot(Gc, a, config.m0, rng))
    errd = np.ones(a - 1)
    diag = CrossDiagnostics(errdm=np.empty((a - 1, 0)), sweeps_used=0)
    history = []
    S = 0
    while S < config.maxswp:
        S += 1
        for k in range(1, a):
            if errd[k - 1] < config.tol:
                continue
            sets = _visit(k, sets, Gc, config, rng, errd, diag)
        history.append(errd.copy())
        if errd.max() < config.tol:
            break
        S += 1
        for k in range(a - 1, 0, -1):
            if errd[k - 1] < config.tol:
                continue
            sets = _visit(k, sets, Gc, config, rng, errd, diag)
        history.append(errd.copy())
        if errd.max() < config.tol:
            break
    diag.errdm = np.array(history).T
    diag.sweeps_used = S
    diag.converged = bool(errd.max() < config.tol)
    if not diag.converged:
        diag.evaluations = Gc.count
        raise NotConverged(diag)
    train = extract_cores(Gc, sets, config.fiber_tol)
    diag.evaluations = Gc.count
    return train, sets, diag


def cross_decompose_bivariate(G, config=None):
    """Greedy cross of a bivariate function; one pivot per iteration."""
    config = config or CrossConfig()
    Gc = _CountingFunction(G)
    rng = as_rng(config.seed)
    sets = InterpolationSets.from_pivot(initial_pivot(Gc, 2, config.m0, rng))
    errd = np.ones(1)
    diag = CrossDiagnostics(errdm=np.empty((1, 0)), sweeps_used=0)
    history = []
    for S in range(1, config.maxswp + 1):
        sets = _visit(1, sets, Gc, config, rng, errd, diag)
        history.append(errd.copy())
        diag.sweeps_used = S
        if errd[0] < config.tol:
            break
    diag.errdm = np.array(history).T
    diag.converged = bool(errd[0] < config.tol)
    if not diag.converged:
        diag.evaluations = Gc.count
        raise NotConverged(diag)
    train = extract_cores(Gc, sets, config.fiber_tol)
    diag.evaluations = Gc.count
    return train, sets, diag


def auxiliary_function(param_kernel, m, order):
    """Reorder a parametric cumulant function into G on [0, 1]^(m * order).

    Order 2 uses the mirrored layout (xi, eta, zeta, zeta', eta', xi') so the
    two copies of each direction meet symmetrically around the middle core.
    Order 3 keeps the three points as consecutive blocks.
    """

    def G(u):
        u = np.asarray(u, dtype=float)
        if order == 2:
            return param_kernel(u[:, :m], u[:, m:][:, ::-1])
        return param_kernel(*(u[:, i * m : (i + 1) * m] for i in range(order)))

    return G
