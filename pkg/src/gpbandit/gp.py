"""Exact GP regression over finite pools with incremental Cholesky updates.

Posteriors are immutable snapshots: `update` returns a new value and never
touches its input, so retrospective queries (regret accounting, replay
checks) stay valid. The standard formulas apply throughout:

    mean(x) = k_t(x)' (K_t + noise I)^-1 y
    var(x)  = k(x, x) - k_t(x)' (K_t + noise I)^-1 k_t(x)
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ConfigError, NumericalError
from .kernels import Kernel, as_point, as_pool, cross_covariance, gram, kernel_value, prior_variance

# round-off below this is clamped to zero; anything worse is a genuine failure
VARIANCE_CLAMP = -1e-10

JITTER_INITIAL = 1e-10
JITTER_MAX = 1e-4
JITTER_GROWTH = 10.0


def _readonly(arr):
    arr = np.asarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GpPosterior:
    """Posterior state after t noisy observations.

    `chol` is the lower Cholesky factor of K_t + noise_variance * I and
    `alpha` solves (K_t + noise_variance * I) alpha = y.
    """

    kernel: Kernel
    noise_variance: float
    train_x: np.ndarray
    train_y: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray

    @property
    def num_observations(self):
        return self.train_y.shape[0]


def empty_posterior(kernel, noise_variance):
    """Prior state: no observations, mean 0 and variance k(x, x) everywhere."""
    if not (np.isfinite(noise_variance) and noise_variance > 0):
        raise ConfigError("noise_variance must be a positive finite real")
    empty = _readonly(np.zeros((0, 0)))
    return GpPosterior(
        kernel=kernel,
        noise_variance=float(noise_variance),
        train_x=empty,
        train_y=_readonly(np.zeros(0)),
        chol=empty,
        alpha=_readonly(np.zeros(0)),
    )


def update(posterior, x, y):
    """Condition on one more observation (x, y) via Cholesky rank extension.

    Raises NumericalError carrying the failing pivot index when the
    extended factorization breaks down; callers retry with the jitter
    policy (see `batch_posterior`).
    """
    p = posterior
    t = p.num_observations
    x = as_point(x, dim=p.train_x.shape[1] if t > 0 else None)
    y = float(y)
    if not np.isfinite(y):
        raise ConfigError("observation value must be finite")

    kxx = kernel_value(p.kernel, x, x) + p.noise_variance
    if t == 0:
        if kxx <= 0.0:
            raise NumericalError(
                f"non-positive pivot {kxx:.3e} at index 0", pivot_index=0
            )
        chol_new = np.array([[np.sqrt(kxx)]])
        x_new = x[None, :]
        y_new = np.array([y])
    else:
        k_vec = cross_covariance(p.kernel, p.train_x, x[None, :])[:, 0]
        w = solve_triangular(p.chol, k_vec, lower=True)
        pivot_sq = kxx - w @ w
        if pivot_sq <= 0.0:
            raise NumericalError(
                f"non-positive pivot {pivot_sq:.3e} at index {t}", pivot_index=t
            )
        chol_new = np.zeros((t + 1, t + 1))
        chol_new[:t, :t] = p.chol
        chol_new[t, :t] = w
        chol_new[t, t] = np.sqrt(pivot_sq)
        x_new = np.vstack([p.train_x, x[None, :]])
        y_new = np.append(p.train_y, y)

    alpha = cho_solve((chol_new, True), y_new)
    return GpPosterior(
        kernel=p.kernel,
        noise_variance=p.noise_variance,
        train_x=_readonly(x_new),
        train_y=_readonly(y_new),
        chol=_readonly(chol_new),
        alpha=_readonly(alpha),
    )


def _clamped_variance(raw, context):
    if raw < VARIANCE_CLAMP:
        raise NumericalError(f"negative posterior variance {raw:.3e} at {context}")
    return max(raw, 0.0)


def predict(posterior, x):
    """Posterior (mean, variance) at a single point."""
    p = posterior
    if p.num_observations == 0:
        x = as_point(x)
        return 0.0, kernel_value(p.kernel, x, x)
    x = as_point(x, dim=p.train_x.shape[1])
    k_vec = cross_covariance(p.kernel, p.train_x, x[None, :])[:, 0]
    mean = float(k_vec @ p.alpha)
    v = solve_triangular(p.chol, k_vec, lower=True)
    var = kernel_value(p.kernel, x, x) - float(v @ v)
    return mean, _clamped_variance(var, "predict")


def predict_batch(posterior, xs):
    """Posterior means and variances for every row of `xs` at once."""
    p = posterior
    xs = as_pool(xs)
    diag = prior_variance(p.kernel, xs)
    if p.num_observations == 0:
        return np.zeros(xs.shape[0]), diag
    k_cross = cross_covariance(p.kernel, p.train_x, xs)
    means = p.alpha @ k_cross
    v = solve_triangular(p.chol, k_cross, lower=True)
    variances = diag - np.einsum("ij,ij->j", v, v)
    low = variances.min()
    if low < VARIANCE_CLAMP:
        raise NumericalError(f"negative posterior variance {low:.3e} in batch predict")
    return means, np.maximum(variances, 0.0)


def cholesky_with_jitter(matrix):
    """Lower Cholesky factor of a PSD matrix, with escalating diagonal jitter.

    Jitter starts at 1e-10 * mean(diag) and grows tenfold per retry up to
    1e-4 * mean(diag). Returns (factor, jitter_used); raises NumericalError
    once the ladder is exhausted.
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    scale = float(np.trace(m)) / n
    if scale <= 0.0:
        scale = 1.0
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(m + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter = JITTER_INITIAL * scale if jitter == 0.0 else jitter * JITTER_GROWTH
            if jitter > JITTER_MAX * scale * (1.0 + 1e-12):
                raise NumericalError(
                    f"Cholesky failed after max jitter {JITTER_MAX * scale:.3e}"
                ) from None


def batch_posterior(kernel, noise_variance, xs, ys):
    """Fit a posterior from scratch, applying the jitter policy on breakdown.

    This is the fallback callers use when incremental `update` reports a
    non-positive pivot, and the reference path for equivalence tests.
    """
    if not (np.isfinite(noise_variance) and noise_variance > 0):
        raise ConfigError("noise_variance must be a positive finite real")
    xs = as_pool(xs)
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 1 or ys.shape[0] != xs.shape[0]:
        raise ConfigError("observation values must be a 1-D sequence matching the points")
    if not np.all(np.isfinite(ys)):
        raise ConfigError("observation values must be finite")
    k = gram(kernel, xs).matrix + noise_variance * np.eye(xs.shape[0])
    chol, _ = cholesky_with_jitter(k)
    alpha = cho_solve((chol, True), ys)
    return GpPosterior(
        kernel=kernel,
        noise_variance=float(noise_variance),
        train_x=_readonly(xs.copy()),
        train_y=_readonly(ys.copy()),
        chol=_readonly(chol),
        alpha=_readonly(alpha),
    )


def sample_function(kernel, pool, rng_seed):
    """Draw one function from N(0, K) over the pool, deterministically per seed."""
    pts = as_pool(pool)
    k = gram(kernel, pts).matrix
    chol, _ = cholesky_with_jitter(k)
    z = np.random.default_rng(rng_seed).standard_normal(pts.shape[0])
    return chol @ z
