"""Registry of physical-space cumulant functions.

Each kernel is a callable taking K arrays of physical points, each of shape
(npts, d), and returning an (npts,) array.  Order-2 kernels are covariance
functions, order-3 kernels third-order cumulant functions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def _sqdist(x, y):
    d = x - y
    return np.einsum("nd,nd->n", d, d)


@dataclass(frozen=True)
class SquaredExponential:
    """sigma^2 exp(-|x - y|^2 / (b L)^2)."""

    sigma: float = 1.0
    b: float = 1.0
    L: float = 1.0
    order: int = 2

    def __call__(self, x, y):
        return self.sigma**2 * np.exp(-_sqdist(x, y) / (self.b * self.L) ** 2)


@dataclass(frozen=True)
class TripleExponential:
    """sigma^3 exp(-(|x-y|^2 + |x-z|^2 + |y-z|^2) / (b L)^2)."""

    sigma: float = 1.0
    b: float = 1.0
    L: float = 1.0
    order: int = 3

    def __call__(self, x, y, z):
        s = _sqdist(x, y) + _sqdist(x, z) + _sqdist(y, z)
        return self.sigma**3 * np.exp(-s / (self.b * self.L) ** 2)


@dataclass(frozen=True)
class SpectralSeries:
    """sum_k lam_k prod_j f_k(x_j) with lam_k = 4 / (pi^2 (2k-1)^2), f_k = sqrt(2) sin(x / sqrt(lam_k)).

    The same eigenpairs serve the covariance (order 2) and the third-order
    cumulant (order 3).  Only the first physical coordinate is used.
    """

    terms: int = 80
    order: int = 2

    @property
    def eigenvalues(self):
        k = np.arange(1, self.terms + 1)
        return 4.0 / (np.pi**2 * (2 * k - 1) ** 2)

    def eigenfunctions(self, x):
        """(npts, terms) matrix of f_k(x)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        freq = (2 * np.arange(1, self.terms + 1) - 1) * (np.pi / 2)
        return np.sqrt(2.0) * np.sin(np.outer(x, freq))

    def __call__(self, *points):
        if len(points) != self.order:
            raise ValueError(f"kernel of order {self.order} got {len(points)} points")
        # Cross sampling repeats coordinates heavily; evaluate sines once per distinct value.
        coords = [np.asarray(p, dtype=float)[:, 0] for p in points]
        uniq, inv = np.unique(np.concatenate(coords), return_inverse=True)
        phi = self.eigenfunctions(uniq)
        idx = np.split(inv, np.cumsum([c.size for c in coords])[:-1])
        acc = phi[idx[0]] * self.eigenvalues
        for ix in idx[1:-1]:
            acc *= phi[ix]
        return np.einsum("nk,nk->n", acc, phi[idx[-1]])


REGISTRY = {
    "squared_exponential": SquaredExponential,
    "triple_exponential": TripleExponential,
    "spectral_series": SpectralSeries,
}


def make_kernel(spec, order):
    """Build a kernel from a config mapping with a ``type`` key."""
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind not in REGISTRY:
        raise ConfigError(f"unknown kernel type {kind!r}; choose from {sorted(REGISTRY)}")
    cls = REGISTRY[kind]
    if kind == "spectral_series":
        spec["order"] = order
    elif cls.order != order:
        raise ConfigError(f"kernel {kind!r} has order {cls.order}, expected {order}")
    for key in ("sigma", "b", "L", "terms"):
        if key in spec and not spec[key] > 0:
            raise ConfigError(f"kernel parameter {key} must be positive")
    try:
        return cls(**spec)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for kernel {kind!r}: {exc}") from None
