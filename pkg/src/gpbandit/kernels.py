"""Covariance functions, Gram matrices, and empirical eigenspectra.

Three kernel families are supported: linear, squared exponential, and
Matern with smoothness in {1/2, 3/2, 5/2} (the closed-form cases, so no
Bessel functions are needed). All types are immutable after construction
and safe to share across concurrent runs.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, InputError

LINEAR = "linear"
SQUARED_EXPONENTIAL = "squared_exponential"
MATERN = "matern"

KERNEL_FAMILIES = (LINEAR, SQUARED_EXPONENTIAL, MATERN)
MATERN_NU_VALUES = (0.5, 1.5, 2.5)

# eigenvalues below this fraction of the largest are treated as numerically zero
EFFECTIVE_RANK_RTOL = 1e-10


def as_point(x, dim=None):
    """Coerce `x` to a finite 1-D float array, optionally checking its length."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"point must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError("point must have at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise InputError("point coordinates must be finite")
    if dim is not None and arr.size != dim:
        raise InputError(f"point has dimension {arr.size}, expected {dim}")
    return arr


def as_pool(points):
    """Coerce a collection of points to a finite 2-D (n, d) float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"pool must be 2-D (n points, d coords), got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InputError("pool must contain at least one point")
    if arr.shape[1] == 0:
        raise InputError("pool points must have at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise InputError("pool coordinates must be finite")
    return arr


@dataclass(frozen=True)
class Kernel:
    """A covariance function with fixed hyperparameters.

    Parameters
    ----------
    family : str
        One of "linear", "squared_exponential", "matern".
    lengthscale : float
        Positive lengthscale; used by the stationary families only.
    nu : float, optional
        Matern smoothness, one of 0.5, 1.5, 2.5. Required for the Matern
        family and rejected for the others.
    signal_variance : float
        Positive multiplier; the prior variance k(x, x) for the
        stationary families.
    """

    family: str
    lengthscale: float = 1.0
    nu: Optional[float] = None
    signal_variance: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ConfigError(
                f"unknown kernel family {self.family!r}; expected one of {KERNEL_FAMILIES}"
            )
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise ConfigError("signal_variance must be a positive finite real")
        if self.family == MATERN:
            if self.nu not in MATERN_NU_VALUES:
                raise ConfigError(f"matern nu must be one of {MATERN_NU_VALUES}, got {self.nu}")
        elif self.nu is not None:
            raise ConfigError(f"nu is only valid for the matern family, not {self.family!r}")
        if self.family != LINEAR:
            if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
                raise ConfigError("lengthscale must be a positive finite real")

    @classmethod
    def linear(cls, signal_variance=1.0):
        return cls(family=LINEAR, signal_variance=signal_variance)

    @classmethod
    def squared_exponential(cls, lengthscale=1.0, signal_variance=1.0):
        return cls(
            family=SQUARED_EXPONENTIAL,
            lengthscale=lengthscale,
            signal_variance=signal_variance,
        )

    @classmethod
    def matern(cls, nu, lengthscale=1.0, signal_variance=1.0):
        return cls(
            family=MATERN, nu=nu, lengthscale=lengthscale, signal_variance=signal_variance
        )


def cross_covariance(kernel, xs, ys):
    """Covariance matrix k(xs, ys) of shape (len(xs), len(ys)).

    `xs` and `ys` must share the coordinate dimension. This is the single
    evaluation path behind `kernel_value` and `gram`, so the three agree
    bit for bit.
    """
    xs = as_pool(xs)
    ys = as_pool(ys)
    if xs.shape[1] != ys.shape[1]:
        raise InputError(
            f"dimension mismatch: points of dimension {xs.shape[1]} vs {ys.shape[1]}"
        )
    s2 = kernel.signal_variance
    if kernel.family == LINEAR:
        return s2 * (xs @ ys.T)
    if kernel.family == SQUARED_EXPONENTIAL:
        sq = cdist(xs, ys, "sqeuclidean")
        return s2 * np.exp(-sq / (2.0 * kernel.lengthscale**2))
    # Matern closed forms
    r = cdist(xs, ys, "euclidean") / kernel.lengthscale
    if kernel.nu == 0.5:
        return s2 * np.exp(-r)
    if kernel.nu == 1.5:
        sr = np.sqrt(3.0) * r
        return s2 * (1.0 + sr) * np.exp(-sr)
    sr = np.sqrt(5.0) * r
    return s2 * (1.0 + sr + (5.0 / 3.0) * r**2) * np.exp(-sr)


def kernel_value(kernel, x, y):
    """Evaluate k(x, y) for a single pair of points."""
    x = as_point(x)
    y = as_point(y, dim=x.size)
    return float(cross_covariance(kernel, x[None, :], y[None, :])[0, 0])


def prior_variance(kernel, xs):
    """Diagonal k(x, x) for each row of `xs`."""
    xs = as_pool(xs)
    if kernel.family == LINEAR:
        return kernel.signal_variance * np.einsum("ij,ij->i", xs, xs)
    return np.full(xs.shape[0], kernel.signal_variance)


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric covariance matrix over an ordered pool of points."""

    matrix: np.ndarray
    pool: np.ndarray

    @property
    def size(self):
        return self.matrix.shape[0]


def gram(kernel, pool):
    """Build the Gram matrix of `kernel` over `pool`.

    The result is explicitly symmetrized to remove BLAS round-off
    asymmetry. Rank deficiency from duplicate points is allowed here;
    consumers that factorize apply their own jitter policy.
    """
    pts = as_pool(pool)
    k = cross_covariance(kernel, pts, pts)
    k = (k + k.T) / 2.0
    k.flags.writeable = False
    pts = pts.copy()
    pts.flags.writeable = False
    return GramMatrix(matrix=k, pool=pts)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a Gram matrix, sorted descending, round-off clamped.

    `trace` is the trace of the raw matrix; `effective_rank` counts
    eigenvalues at least EFFECTIVE_RANK_RTOL times the largest.
    """

    eigenvalues: np.ndarray
    trace: float
    effective_rank: int


def spectrum(g):
    """Empirical eigenspectrum of a Gram matrix.

    Negative eigenvalues from round-off are clamped to zero; the raw
    matrix inside `g` is never modified.
    """
    m = g.matrix
    if not np.all(np.isfinite(m)):
        raise InputError("Gram matrix entries must be finite")
    eig = np.linalg.eigvalsh(m)[::-1]
    eig = np.maximum(eig, 0.0)
    eig.flags.writeable = False
    lam_max = eig[0] if eig.size else 0.0
    if lam_max <= 0.0:
        rank = 0
    else:
        rank = int(np.sum(eig >= EFFECTIVE_RANK_RTOL * lam_max))
    return Spectrum(eigenvalues=eig, trace=float(np.trace(m)), effective_rank=rank)
