"""Selection rules over a candidate pool: UCB plus the usual competitors.

The UCB rule picks argmax of mean + sqrt(beta_t) * std, with beta_t coming
from a swappable confidence schedule. Expected improvement, probability of
improvement, pure variance maximization, and pure mean maximization are
provided for head-to-head regret comparisons. All ties break to the lowest
pool index so runs replay identically everywhere.
"""

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.stats import norm

from .errors import ConfigError, InputError, NumericalError
from .gp import predict, predict_batch
from .kernels import as_pool

UCB = "ucb"
EXPECTED_IMPROVEMENT = "expected_improvement"
PROBABILITY_OF_IMPROVEMENT = "probability_of_improvement"
MAX_VARIANCE = "max_variance"
MAX_MEAN = "max_mean"

RULE_KINDS = (UCB, EXPECTED_IMPROVEMENT, PROBABILITY_OF_IMPROVEMENT, MAX_VARIANCE, MAX_MEAN)


def _check_delta(delta):
    if not (np.isfinite(delta) and 0.0 < delta < 1.0):
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")


@dataclass(frozen=True)
class ConstantBeta:
    """Fixed confidence width, useful for ablations."""

    value: float

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value >= 0.0):
            raise ConfigError("constant beta must be a nonnegative finite real")

    def beta(self, t, info_gain=0.0):
        _check_round(t)
        return self.value


@dataclass(frozen=True)
class FiniteBayesianBeta:
    """Schedule for a finite domain of known size under the GP prior.

    beta_t = 2 * ln(domain_size * t^2 * pi^2 / (6 * delta)), which keeps
    the confidence band valid simultaneously over all rounds and all
    domain points with probability 1 - delta.
    """

    domain_size: int
    delta: float

    def __post_init__(self):
        if not (isinstance(self.domain_size, (int, np.integer)) and self.domain_size >= 1):
            raise ConfigError(f"domain_size must be a positive integer, got {self.domain_size}")
        _check_delta(self.delta)

    def beta(self, t, info_gain=0.0):
        _check_round(t)
        return 2.0 * math.log(self.domain_size * t * t * math.pi**2 / (6.0 * self.delta))


@dataclass(frozen=True)
class RkhsAgnosticBeta:
    """Schedule for the agnostic setting: f of bounded RKHS norm.

    beta_t = (B + R * sqrt(2 * (gain + 1 + ln(1/delta))))^2, where B bounds
    the RKHS norm of the truth, R bounds the observation noise, and `gain`
    is the information accumulated over the first t-1 rounds. Growth with
    the information gain is what keeps the band honest without a prior.
    """

    norm_bound: float
    noise_bound: float
    delta: float

    def __post_init__(self):
        if not (np.isfinite(self.norm_bound) and self.norm_bound >= 0.0):
            raise ConfigError("norm_bound must be a nonnegative finite real")
        if not (np.isfinite(self.noise_bound) and self.noise_bound >= 0.0):
            raise ConfigError("noise_bound must be a nonnegative finite real")
        _check_delta(self.delta)

    def beta(self, t, info_gain=0.0):
        _check_round(t)
        if info_gain < 0.0:
            raise InputError(f"info_gain must be nonnegative, got {info_gain}")
        root = math.sqrt(2.0 * (info_gain + 1.0 + math.log(1.0 / self.delta)))
        return (self.norm_bound + self.noise_bound * root) ** 2


BetaSchedule = Union[ConstantBeta, FiniteBayesianBeta, RkhsAgnosticBeta]


def _check_round(t):
    if not (isinstance(t, (int, np.integer)) and t >= 1):
        raise InputError(f"round index must be a positive integer, got {t}")


def beta(schedule, t, info_gain=0.0):
    """Confidence width beta_t for round t.

    `info_gain` is the cumulative information gain over rounds < t; only
    the RKHS-agnostic schedule consumes it.
    """
    return schedule.beta(t, info_gain=info_gain)


@dataclass(frozen=True)
class AcquisitionRule:
    """A selection criterion. UCB carries a schedule; EI/PI carry a margin xi."""

    kind: str
    schedule: Optional[BetaSchedule] = None
    xi: float = 0.0

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ConfigError(f"unknown acquisition kind {self.kind!r}; expected one of {RULE_KINDS}")
        if self.kind == UCB:
            if self.schedule is None:
                raise ConfigError("ucb rule requires a beta schedule")
        elif self.schedule is not None:
            raise ConfigError(f"{self.kind} rule does not take a beta schedule")
        if self.kind in (EXPECTED_IMPROVEMENT, PROBABILITY_OF_IMPROVEMENT):
            if not (np.isfinite(self.xi) and self.xi >= 0.0):
                raise ConfigError("xi must be a nonnegative finite real")
        elif self.xi != 0.0:
            raise ConfigError(f"xi is only valid for ei/pi rules, not {self.kind}")


def ucb_rule(schedule):
    return AcquisitionRule(kind=UCB, schedule=schedule)


def expected_improvement_rule(xi=0.0):
    return AcquisitionRule(kind=EXPECTED_IMPROVEMENT, xi=xi)


def probability_of_improvement_rule(xi=0.0):
    return AcquisitionRule(kind=PROBABILITY_OF_IMPROVEMENT, xi=xi)


def max_variance_rule():
    return AcquisitionRule(kind=MAX_VARIANCE)


def max_mean_rule():
    return AcquisitionRule(kind=MAX_MEAN)


def expected_improvement_values(means, stds, incumbent, xi=0.0):
    """Closed-form EI: sigma * (z * Phi(z) + phi(z)) with z = (mu - y+ - xi) / sigma.

    Degenerate sigma = 0 candidates get max(mu - y+ - xi, 0).
    """
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    improve = means - incumbent - xi
    safe = np.where(stds > 0.0, stds, 1.0)
    z = improve / safe
    ei = improve * norm.cdf(z) + safe * norm.pdf(z)
    ei = np.where(stds > 0.0, ei, np.maximum(improve, 0.0))
    return np.maximum(ei, 0.0)


def probability_of_improvement_values(means, stds, incumbent, xi=0.0):
    """PI = Phi((mu - y+ - xi) / sigma); 0/1 indicator when sigma = 0."""
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    improve = means - incumbent - xi
    safe = np.where(stds > 0.0, stds, 1.0)
    values = norm.cdf(improve / safe)
    return np.where(stds > 0.0, values, (improve > 0.0).astype(float))


def ucb_score(posterior, x, beta_value):
    """mean + sqrt(beta) * std at a single point, exposed for tracing."""
    if not (np.isfinite(beta_value) and beta_value >= 0.0):
        raise InputError(f"beta must be a nonnegative finite real, got {beta_value}")
    mean, var = predict(posterior, x)
    return mean + math.sqrt(beta_value) * math.sqrt(var)


def _incumbent(posterior):
    # best observed value so far; 0 by convention at the prior, where the
    # symmetric posterior makes the choice irrelevant
    if posterior.num_observations == 0:
        return 0.0
    return float(posterior.train_y.max())


def select(rule, posterior, pool, t, info_gain=0.0):
    """Pick the pool index maximizing the rule's score at round t.

    Returns (index, score). Ties break to the lowest index. `info_gain`
    feeds the RKHS-agnostic UCB schedule and is ignored by every other
    rule.
    """
    pts = as_pool(pool)
    _check_round(t)
    means, variances = predict_batch(posterior, pts)
    if rule.kind == MAX_MEAN:
        scores = means
    elif rule.kind == MAX_VARIANCE:
        scores = variances
    elif rule.kind == UCB:
        b = beta(rule.schedule, t, info_gain=info_gain)
        scores = means + math.sqrt(b) * np.sqrt(variances)
    else:
        stds = np.sqrt(variances)
        y_best = _incumbent(posterior)
        if rule.kind == EXPECTED_IMPROVEMENT:
            scores = expected_improvement_values(means, stds, y_best, rule.xi)
        else:
            scores = probability_of_improvement_values(means, stds, y_best, rule.xi)
    if not np.all(np.isfinite(scores)):
        raise NumericalError("non-finite acquisition score")
    index = int(np.argmax(scores))
    return index, float(scores[index])
