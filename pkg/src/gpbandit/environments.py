"""Ground-truth environments and the bandit interaction loop.

Three environment variants: a function sampled from a known GP over the
pool, a low-RKHS-norm combination of kernel translates, and a tabular
dataset of (point, value) rows standing in for field data. The loop plays
one of the acquisition rules against the environment for a horizon of
rounds and records regret and information gain per round.

Noise draws use a counter-based generator keyed by the run seed, so round
t's draw depends only on (seed, t): traces replay exactly no matter how
the rounds are evaluated, and the environment seed stream is untouched.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .acquisition import UCB, beta, select
from .errors import ConfigError, InputError, NumericalError
from .gp import batch_posterior, empty_posterior, predict, sample_function, update
from .kernels import as_pool, cross_covariance, gram

SAMPLED_GP = "sampled_gp"
RKHS_FUNCTION = "rkhs"
TABULAR = "tabular"


@dataclass(frozen=True)
class Environment:
    """A fixed truth over a pool plus an observation noise level."""

    variant: str
    pool: np.ndarray
    truth: np.ndarray
    noise_variance: float
    best_value: float
    best_index: int
    rkhs_norm: Optional[float] = None


def _finalize_env(variant, pool, truth, noise_variance, rkhs_norm=None):
    truth = np.asarray(truth, dtype=float)
    if not np.all(np.isfinite(truth)):
        raise InputError("environment truth values must be finite")
    if not (np.isfinite(noise_variance) and noise_variance >= 0.0):
        raise ConfigError("observation noise_variance must be a nonnegative finite real")
    best_index = int(np.argmax(truth))
    pool = pool.copy()
    pool.flags.writeable = False
    truth = truth.copy()
    truth.flags.writeable = False
    return Environment(
        variant=variant,
        pool=pool,
        truth=truth,
        noise_variance=float(noise_variance),
        best_value=float(truth[best_index]),
        best_index=best_index,
        rkhs_norm=rkhs_norm,
    )


def make_sampled_gp_env(kernel, pool, noise_variance, seed):
    """Truth drawn from N(0, K) over the pool; deterministic per seed."""
    pts = as_pool(pool)
    truth = sample_function(kernel, pts, seed)
    return _finalize_env(SAMPLED_GP, pts, truth, noise_variance)


@dataclass(frozen=True)
class RkhsSpec:
    """A kernel-translate combination f(x) = sum_j coefficients[j] * k(x, center_j).

    Centers index into the pool. The squared RKHS norm of f is the
    quadratic form coefficients' K_cc coefficients.
    """

    centers: tuple
    coefficients: tuple
    norm_bound: Optional[float] = None

    def __post_init__(self):
        if len(self.centers) == 0:
            raise ConfigError("rkhs spec needs at least one center")
        if len(self.centers) != len(self.coefficients):
            raise ConfigError(
                f"{len(self.centers)} centers vs {len(self.coefficients)} coefficients"
            )
        if len(set(self.centers)) != len(self.centers):
            raise ConfigError("rkhs centers must be distinct")
        if self.norm_bound is not None and not (
            np.isfinite(self.norm_bound) and self.norm_bound >= 0.0
        ):
            raise ConfigError("norm_bound must be a nonnegative finite real")


def rkhs_norm(kernel, pool, spec):
    """RKHS norm of the combination described by `spec` over `pool`."""
    pts = as_pool(pool)
    centers = list(spec.centers)
    for c in centers:
        if not 0 <= c < pts.shape[0]:
            raise ConfigError(f"rkhs center {c} out of range for pool of size {pts.shape[0]}")
    coef = np.asarray(spec.coefficients, dtype=float)
    k_cc = cross_covariance(kernel, pts[centers], pts[centers])
    sq = float(coef @ k_cc @ coef)
    return math.sqrt(max(sq, 0.0))


def make_rkhs_env(kernel, pool, spec, noise_variance):
    """Truth built from kernel translates; rejects specs over their norm bound."""
    pts = as_pool(pool)
    norm = rkhs_norm(kernel, pts, spec)
    if spec.norm_bound is not None and norm > spec.norm_bound * (1.0 + 1e-12):
        raise ConfigError(
            f"rkhs norm {norm:.6g} exceeds the configured bound {spec.norm_bound:.6g}"
        )
    coef = np.asarray(spec.coefficients, dtype=float)
    truth = cross_covariance(kernel, pts, pts[list(spec.centers)]) @ coef
    return _finalize_env(RKHS_FUNCTION, pts, truth, noise_variance, rkhs_norm=norm)


def make_tabular_env(points, values, noise_variance):
    """Truth read off a table. Duplicate points are kept as separate arms."""
    pts = as_pool(points)
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] != pts.shape[0]:
        raise InputError("table values must be a 1-D sequence matching the points")
    return _finalize_env(TABULAR, pts, values, noise_variance)


@dataclass(frozen=True)
class RunTrace:
    """Per-round record of one bandit run. Arrays share the round axis."""

    chosen_index: np.ndarray
    chosen_x: np.ndarray
    y_observed: np.ndarray
    f_true: np.ndarray
    regret_inst: np.ndarray
    regret_cum: np.ndarray
    regret_avg: np.ndarray
    beta: np.ndarray
    info_gain_step: np.ndarray
    info_gain_cum: np.ndarray

    @property
    def horizon(self):
        return self.chosen_index.shape[0]


def _observation_noise(seed, t, noise_variance):
    """Round t's noise draw, derived from the run seed by counter."""
    if noise_variance == 0.0:
        return 0.0
    rng = np.random.Generator(np.random.Philox(key=seed, counter=t))
    return rng.standard_normal() * math.sqrt(noise_variance)


def run(env, rule, kernel, model_noise_variance, horizon, seed):
    """Play `rule` against `env` for `horizon` rounds.

    The model kernel and noise may differ from the environment's (that is
    the agnostic setting). Selection at round t uses only the posterior
    from rounds before t. A numerical failure that survives the jitter
    fallback aborts the run with the failing round in the message.
    """
    if not (isinstance(horizon, (int, np.integer)) and horizon >= 1):
        raise ConfigError(f"horizon must be a positive integer, got {horizon}")
    n = env.pool.shape[0]
    chosen = np.zeros(horizon, dtype=int)
    y_obs = np.zeros(horizon)
    f_true = np.zeros(horizon)
    r_inst = np.zeros(horizon)
    r_cum = np.zeros(horizon)
    r_avg = np.zeros(horizon)
    betas = np.zeros(horizon)
    gain_step = np.zeros(horizon)
    gain_cum = np.zeros(horizon)

    posterior = empty_posterior(kernel, model_noise_variance)
    cum_regret = 0.0
    cum_gain = 0.0
    for t in range(1, horizon + 1):
        i = t - 1
        try:
            index, _ = select(rule, posterior, env.pool, t, info_gain=cum_gain)
            x = env.pool[index]
            _, var_before = predict(posterior, x)
            noise = _observation_noise(seed, t, env.noise_variance)
            y = float(env.truth[index]) + noise
            try:
                posterior = update(posterior, x, y)
            except NumericalError:
                posterior = batch_posterior(
                    kernel,
                    model_noise_variance,
                    np.vstack([posterior.train_x, x[None, :]])
                    if posterior.num_observations
                    else x[None, :],
                    np.append(posterior.train_y, y),
                )
        except NumericalError as exc:
            raise NumericalError(f"run aborted at round {t}: {exc}") from exc

        chosen[i] = index
        y_obs[i] = y
        f_true[i] = env.truth[index]
        r_inst[i] = env.best_value - env.truth[index]
        cum_regret += r_inst[i]
        r_cum[i] = cum_regret
        r_avg[i] = cum_regret / t
        # same beta the selection saw: cum_gain still excludes this round
        betas[i] = (
            beta(rule.schedule, t, info_gain=cum_gain) if rule.kind == UCB else math.nan
        )
        gain_step[i] = 0.5 * math.log1p(var_before / model_noise_variance)
        cum_gain += gain_step[i]
        gain_cum[i] = cum_gain

    for arr in (chosen, y_obs, f_true, r_inst, r_cum, r_avg, betas, gain_step, gain_cum):
        arr.flags.writeable = False
    xs = env.pool[chosen].copy()
    xs.flags.writeable = False
    return RunTrace(
        chosen_index=chosen,
        chosen_x=xs,
        y_observed=y_obs,
        f_true=f_true,
        regret_inst=r_inst,
        regret_cum=r_cum,
        regret_avg=r_avg,
        beta=betas,
        info_gain_step=gain_step,
        info_gain_cum=gain_cum,
    )
