"""NURBS geometry maps from the unit parametric cube to physical space."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IndexOutOfRange


def find_span(knots, p, xi):
    """Knot span index (0-based, Piegl-Tiller convention) for each ``xi``.

    ``xi`` equal to the last knot is put in the last nonvanishing span.
    """
    knots = np.asarray(knots, dtype=float)
    n = knots.size - p - 1
    xi = np.asarray(xi, dtype=float)
    span = np.searchsorted(knots, xi, side="right") - 1
    return np.clip(span, p, n - 1)


def basis_funs(knots, p, xi):
    """Nonzero B-spline basis values at each point.

    Returns ``(span, N)`` where ``N[:, r]`` is the value of basis function
    ``span - p + r`` (0-based).  Triangular table evaluation, O(p^2) per point.
    """
    knots = np.asarray(knots, dtype=float)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    span = find_span(knots, p, xi)
    npts = xi.size
    N = np.zeros((npts, p + 1))
    N[:, 0] = 1.0
    left = np.zeros((npts, p + 1))
    right = np.zeros((npts, p + 1))
    for j in range(1, p + 1):
        left[:, j] = xi - knots[span + 1 - j]
        right[:, j] = knots[span + j] - xi
        saved = np.zeros(npts)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            with np.errstate(divide="ignore", invalid="ignore"):
                temp = np.where(denom != 0.0, N[:, r] / denom, 0.0)
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    return span, N


def basis_matrix(knots, p, xi):
    """Dense (npts, n) matrix of all B-spline basis values."""
    knots = np.asarray(knots, dtype=float)
    n = knots.size - p - 1
    span, N = basis_funs(knots, p, xi)
    out = np.zeros((N.shape[0], n))
    rows = np.arange(N.shape[0])[:, None]
    out[rows, span[:, None] - p + np.arange(p + 1)] = N
    return out


def bspline_basis(knots, p, i, xi):
    """Value of the i-th (1-based) degree-p B-spline at ``xi`` (Cox-de Boor)."""
    n = len(knots) - p - 1
    if not 1 <= i <= n:
        raise IndexOutOfRange(f"basis index {i} outside 1..{n}")
    vals = basis_matrix(knots, p, np.atleast_1d(xi))[:, i - 1]
    return vals if np.ndim(xi) else float(vals[0])


@dataclass(frozen=True)
class NurbsGeometry:
    """Tensor-product NURBS map x(xi) from [0,1]^m into R^d.

    ``control_points`` has shape ``(n1, ..., nm, d)`` and ``weights`` shape
    ``(n1, ..., nm)``; index order follows the parametric directions.
    """

    degrees: tuple
    knots: tuple
    control_points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        m = len(self.degrees)
        if m not in (1, 2, 3) or len(self.knots) != m:
            raise ConfigError("need one degree and one knot vector per parametric direction (1..3)")
        cp = np.asarray(self.control_points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "knots", tuple(np.asarray(k, dtype=float) for k in self.knots))
        object.__setattr__(self, "degrees", tuple(int(p) for p in self.degrees))
        counts = []
        for kv, p in zip(self.knots, self.degrees):
            if np.any(np.diff(kv) < 0) or kv[0] != 0.0 or kv[-1] != 1.0:
                raise ConfigError(f"knot vector {kv.tolist()} must be non-decreasing from 0 to 1")
            counts.append(kv.size - p - 1)
        if cp.ndim != m + 1 or cp.shape[:m] != tuple(counts):
            raise ConfigError(f"control grid {cp.shape[:-1]} inconsistent with knots {tuple(counts)}")
        if w.shape != tuple(counts):
            raise ConfigError("weights grid must match control grid")
        if np.any(w <= 0):
            raise ConfigError("weights must be positive")
        d = cp.shape[-1]
        if not m <= d <= 3:
            raise ConfigError(f"physical dimension {d} must satisfy m <= d <= 3")

    @property
    def dim_param(self):
        return len(self.degrees)

    @property
    def dim_phys(self):
        return self.control_points.shape[-1]

    @classmethod
    def from_flat(cls, degrees, knots, control_points, weights):
        """Build from a flattened control grid, first parametric index fastest."""
        counts = tuple(len(k) - p - 1 for k, p in zip(knots, degrees))
        cp = np.asarray(control_points, dtype=float)
        if cp.ndim == 1:
            cp = cp[:, None]
        w = np.asarray(weights, dtype=float)
        if cp.shape[0] != int(np.prod(counts)) or w.size != cp.shape[0]:
            raise ConfigError(f"expected {int(np.prod(counts))} control points and weights")
        cp = cp.reshape(counts + (cp.shape[1],), order="F")
        return cls(tuple(degrees), tuple(knots), cp, w.reshape(counts, order="F"))

    def rational_basis(self, xi):
        """Rational basis values R_I(xi), shape (npts, n1, ..., nm)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        mats = [basis_matrix(k, p, xi[:, a]) for a, (k, p) in enumerate(zip(self.knots, self.degrees))]
        prod = mats[0]
        for B in mats[1:]:
            prod = prod[..., None] * B.reshape((B.shape[0],) + (1,) * (prod.ndim - 1) + (B.shape[1],))
        weighted = prod * self.weights
        denom = weighted.reshape(weighted.shape[0], -1).sum(axis=1)
        return weighted / denom.reshape((-1,) + (1,) * self.dim_param)

    def map(self, xi):
        """Physical coordinates of parametric points ``xi`` with shape (npts, m)."""
        xi = np.asarray(xi, dtype=float)
        single = xi.ndim == 1 and xi.size == self.dim_param
        pts = xi.reshape(-1, self.dim_param)
        R = self.rational_basis(pts).reshape(pts.shape[0], -1)
        x = R @ self.control_points.reshape(-1, self.dim_phys)
        return x[0] if single else x


def map_points(geom, xi):
    return geom.map(xi)


def pullback_kernel(geom, C):
    """Parametric kernel ``C~(xi_1, ..., xi_K) = C(x(xi_1), ..., x(xi_K))``.

    The returned callable takes K arrays of parametric points, each
    (npts, m), and returns an (npts,) array.
    """

    def pulled(*params):
        return C(*(geom.map(np.reshape(p, (-1, geom.dim_param))) for p in params))

    pulled.geometry = geom
    pulled.kernel = C
    return pulled


# ---------------------------------------------------------------------------
# Geometries used in the worked examples
# ---------------------------------------------------------------------------

def unit_interval():
    """x = xi on [0, 1]."""
    return NurbsGeometry.from_flat((1,), ([0, 0, 1, 1],), [[0.0], [1.0]], [1.0, 1.0])


def bilinear_saddle():
    """Bilinear surface through (+-0.5, +-0.5) with alternating heights 0 and 1."""
    # B[i, j] with i along xi, j along eta
    cp = np.array(
        [
            [[-0.5, -0.5, 0.0], [0.5, -0.5, 1.0]],
            [[-0.5, 0.5, 1.0], [0.5, 0.5, 0.0]],
        ]
    )
    return NurbsGeometry((1, 1), ([0, 0, 1, 1], [0, 0, 1, 1]), cp, np.ones((2, 2)))


def spherical_shell_octant(r_inner=1.0, r_outer=1.2):
    """Octant of a thick spherical shell; xi radial, eta and zeta quadratic arcs."""
    s = 1.0 / np.sqrt(2.0)
    cp = np.zeros((2, 3, 3, 3))
    w = np.zeros((2, 3, 3))
    arc_w = np.array([1.0, s, 1.0])
    for i, R in enumerate((r_inner, r_outer)):
        grid = {
            (0, 0): (R, 0, 0), (1, 0): (R, R, 0), (2, 0): (0, R, 0),
            (0, 1): (R, 0, R), (1, 1): (R, R, R), (2, 1): (0, R, R),
            (0, 2): (0, 0, R), (1, 2): (0, 0, R), (2, 2): (0, 0, R),
        }
        for (j, k), p in grid.items():
            cp[i, j, k] = p
            w[i, j, k] = arc_w[j] * arc_w[k]
    knots = ([0, 0, 1, 1], [0, 0, 0, 1, 1, 1], [0, 0, 0, 1, 1, 1])
    return NurbsGeometry((1, 2, 2), knots, cp, w)


PRESETS = {
    "unit_interval": unit_interval,
    "bilinear_saddle": bilinear_saddle,
    "spherical_shell_octant": spherical_shell_octant,
}
