"""Experiment configuration: a strict, versioned YAML document.

Every field is either consumed or rejected; validation gathers all
problems in one pass and reports them with dotted field paths. The formal
schema lives in docs/config.schema.json and is versioned through the
required `schema_version` key (currently 1).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import yaml

from .acquisition import (
    EXPECTED_IMPROVEMENT,
    MAX_MEAN,
    MAX_VARIANCE,
    PROBABILITY_OF_IMPROVEMENT,
    UCB,
    AcquisitionRule,
    ConstantBeta,
    FiniteBayesianBeta,
    RkhsAgnosticBeta,
)
from .environments import RKHS_FUNCTION, SAMPLED_GP, TABULAR, RkhsSpec
from .errors import ConfigError
from .kernels import KERNEL_FAMILIES, LINEAR, MATERN, Kernel

SCHEMA_VERSION = 1

SCHEDULE_SETTINGS = ("finite_bayesian", "rkhs_agnostic", "constant")
VARIANTS = (SAMPLED_GP, RKHS_FUNCTION, TABULAR)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid over a box, `points_per_dim` per axis."""

    dimension: int
    points_per_dim: int
    bounds: Tuple[Tuple[float, float], ...]

    @property
    def size(self):
        return self.points_per_dim**self.dimension


def grid_points(spec):
    """Materialize the grid as an (n, d) array in row-major axis order."""
    axes = [
        np.linspace(lo, hi, spec.points_per_dim) for (lo, hi) in spec.bounds
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


@dataclass(frozen=True)
class ScheduleSpec:
    setting: str
    delta: Optional[float] = None
    domain_size: Optional[int] = None
    norm_bound: Optional[float] = None
    noise_bound: Optional[float] = None
    value: Optional[float] = None

    def build(self, pool_size):
        if self.setting == "finite_bayesian":
            size = self.domain_size if self.domain_size is not None else pool_size
            return FiniteBayesianBeta(domain_size=size, delta=self.delta)
        if self.setting == "rkhs_agnostic":
            return RkhsAgnosticBeta(
                norm_bound=self.norm_bound, noise_bound=self.noise_bound, delta=self.delta
            )
        return ConstantBeta(value=self.value)


@dataclass(frozen=True)
class RuleSpec:
    label: str
    kind: str
    xi: float = 0.0
    schedule: Optional[ScheduleSpec] = None

    def build(self, pool_size):
        if self.kind == UCB:
            return AcquisitionRule(kind=UCB, schedule=self.schedule.build(pool_size))
        return AcquisitionRule(kind=self.kind, xi=self.xi)


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: Kernel
    grid: Optional[GridSpec]
    dataset_path: Optional[str]
    variant: str
    env_noise_variance: float
    env_seeds: Tuple[int, ...]
    rkhs: Optional[RkhsSpec]
    model_noise_variance: float
    rules: Tuple[RuleSpec, ...]
    horizon: int
    run_seeds: Tuple[int, ...]
    output_directory: Optional[str]
    plots: bool


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class _Validator:
    """Collects (path, message) pairs so every problem surfaces at once."""

    def __init__(self):
        self.errors = []

    def error(self, path, message):
        self.errors.append(f"{path}: {message}")

    def section(self, doc, path, key, required=True):
        if key not in doc:
            if required:
                self.error(f"{path}{key}" if path else key, "required section is missing")
            return None
        value = doc[key]
        if not isinstance(value, dict):
            self.error(f"{path}{key}", "must be a mapping")
            return None
        return value

    def reject_unknown(self, doc, path, known):
        for key in doc:
            if key not in known:
                self.error(f"{path}{key}" if path else key, "unknown key")

    def number(self, doc, path, key, required=True, minimum=None, exclusive_min=None,
               maximum=None, exclusive_max=None, default=None):
        if key not in doc:
            if required:
                self.error(f"{path}{key}", "required field is missing")
            return default
        v = doc[key]
        full = f"{path}{key}"
        if not _is_num(v):
            self.error(full, f"must be a number, got {v!r}")
            return default
        v = float(v)
        if not np.isfinite(v):
            self.error(full, "must be finite")
            return default
        if minimum is not None and v < minimum:
            self.error(full, f"must be >= {minimum}, got {v}")
        if exclusive_min is not None and v <= exclusive_min:
            self.error(full, f"must be > {exclusive_min}, got {v}")
        if maximum is not None and v > maximum:
            self.error(full, f"must be <= {maximum}, got {v}")
        if exclusive_max is not None and v >= exclusive_max:
            self.error(full, f"must be < {exclusive_max}, got {v}")
        return v

    def integer(self, doc, path, key, required=True, minimum=None, default=None):
        if key not in doc:
            if required:
                self.error(f"{path}{key}", "required field is missing")
            return default
        v = doc[key]
        full = f"{path}{key}"
        if not _is_int(v):
            self.error(full, f"must be an integer, got {v!r}")
            return default
        if minimum is not None and v < minimum:
            self.error(full, f"must be >= {minimum}, got {v}")
        return v

    def string(self, doc, path, key, required=True, choices=None, default=None):
        if key not in doc:
            if required:
                self.error(f"{path}{key}", "required field is missing")
            return default
        v = doc[key]
        full = f"{path}{key}"
        if not isinstance(v, str):
            self.error(full, f"must be a string, got {v!r}")
            return default
        if choices is not None and v not in choices:
            self.error(full, f"must be one of {list(choices)}, got {v!r}")
            return default
        return v

    def seed_list(self, doc, path, key, required=True):
        if key not in doc:
            if required:
                self.error(f"{path}{key}", "required field is missing")
            return None
        v = doc[key]
        full = f"{path}{key}"
        if not isinstance(v, list) or not v or not all(_is_int(s) for s in v):
            self.error(full, "must be a nonempty list of integers")
            return None
        if len(set(v)) != len(v):
            self.error(full, "seeds must be distinct")
            return None
        return tuple(v)


def _parse_kernel(v, doc):
    section = v.section(doc, "", "kernel")
    if section is None:
        return None
    v.reject_unknown(section, "kernel.", {"family", "lengthscale", "nu", "signal_variance"})
    family = v.string(section, "kernel.", "family", choices=KERNEL_FAMILIES)
    lengthscale = v.number(
        section, "kernel.", "lengthscale", required=False, exclusive_min=0.0, default=1.0
    )
    signal_variance = v.number(
        section, "kernel.", "signal_variance", required=False, exclusive_min=0.0, default=1.0
    )
    nu = v.number(section, "kernel.", "nu", required=False)
    if family is None:
        return None
    if family == MATERN and nu is None:
        v.error("kernel.nu", "required for the matern family")
        return None
    if family != MATERN and nu is not None:
        v.error("kernel.nu", f"only valid for the matern family, not {family!r}")
        return None
    if family == LINEAR and "lengthscale" in section:
        v.error("kernel.lengthscale", "not used by the linear family")
        return None
    try:
        return Kernel(
            family=family, lengthscale=lengthscale, nu=nu, signal_variance=signal_variance
        )
    except ConfigError as exc:
        v.error("kernel", str(exc))
        return None


def _parse_domain(v, doc):
    section = v.section(doc, "", "domain")
    if section is None:
        return None, None
    v.reject_unknown(section, "domain.", {"grid", "dataset"})
    has_grid = "grid" in section
    has_dataset = "dataset" in section
    if has_grid and has_dataset:
        v.error("domain.grid", "give exactly one of domain.grid / domain.dataset")
        v.error("domain.dataset", "give exactly one of domain.grid / domain.dataset")
        return None, None
    if not has_grid and not has_dataset:
        v.error("domain", "give exactly one of domain.grid / domain.dataset")
        return None, None
    if has_dataset:
        path = v.string(section, "domain.", "dataset")
        return None, path
    grid = v.section(section, "domain.", "grid")
    if grid is None:
        return None, None
    v.reject_unknown(grid, "domain.grid.", {"dimension", "points_per_dim", "bounds"})
    dim = v.integer(grid, "domain.grid.", "dimension", minimum=1)
    per_dim = v.integer(grid, "domain.grid.", "points_per_dim", minimum=1)
    bounds = None
    if "bounds" in grid:
        raw = grid["bounds"]
        ok = (
            isinstance(raw, list)
            and dim is not None
            and len(raw) == dim
            and all(
                isinstance(b, list) and len(b) == 2 and _is_num(b[0]) and _is_num(b[1])
                and float(b[0]) < float(b[1])
                for b in raw
            )
        )
        if not ok:
            v.error(
                "domain.grid.bounds",
                "must be a list of [lo, hi] pairs with lo < hi, one per dimension",
            )
        else:
            bounds = tuple((float(b[0]), float(b[1])) for b in raw)
    elif dim is not None:
        bounds = tuple((0.0, 1.0) for _ in range(dim))
    if dim is None or per_dim is None or bounds is None:
        return None, None
    return GridSpec(dimension=dim, points_per_dim=per_dim, bounds=bounds), None


def _parse_environment(v, doc, has_dataset):
    section = v.section(doc, "", "environment")
    if section is None:
        return None, None, (), None
    v.reject_unknown(
        section, "environment.", {"variant", "noise_variance", "env_seeds", "rkhs"}
    )
    variant = v.string(section, "environment.", "variant", choices=VARIANTS)
    noise = v.number(section, "environment.", "noise_variance", minimum=0.0)
    env_seeds = ()
    rkhs = None
    if variant == SAMPLED_GP:
        seeds = v.seed_list(section, "environment.", "env_seeds")
        env_seeds = seeds if seeds is not None else ()
    elif "env_seeds" in section:
        v.error("environment.env_seeds", f"only valid for the {SAMPLED_GP} variant")
    if variant == RKHS_FUNCTION:
        block = v.section(section, "environment.", "rkhs")
        if block is not None:
            v.reject_unknown(
                block, "environment.rkhs.", {"centers", "coefficients", "norm_bound"}
            )
            centers = block.get("centers")
            coefficients = block.get("coefficients")
            norm_bound = v.number(
                block, "environment.rkhs.", "norm_bound", required=False, minimum=0.0
            )
            if not (isinstance(centers, list) and centers and all(_is_int(c) and c >= 0 for c in centers)):
                v.error("environment.rkhs.centers", "must be a nonempty list of indices >= 0")
                centers = None
            if not (isinstance(coefficients, list) and coefficients and all(_is_num(c) for c in coefficients)):
                v.error("environment.rkhs.coefficients", "must be a nonempty list of numbers")
                coefficients = None
            if centers is not None and coefficients is not None:
                try:
                    rkhs = RkhsSpec(
                        centers=tuple(centers),
                        coefficients=tuple(float(c) for c in coefficients),
                        norm_bound=norm_bound,
                    )
                except ConfigError as exc:
                    v.error("environment.rkhs", str(exc))
    elif "rkhs" in section:
        v.error("environment.rkhs", f"only valid for the {RKHS_FUNCTION} variant")
    if variant == TABULAR and not has_dataset:
        v.error("environment.variant", "tabular variant requires domain.dataset")
    if variant in (SAMPLED_GP, RKHS_FUNCTION) and has_dataset:
        v.error("environment.variant", f"{variant} variant requires domain.grid, not a dataset")
    return variant, noise, env_seeds, rkhs


def _parse_schedule(v, rule, path):
    section = v.section(rule, path, "schedule")
    if section is None:
        return None
    prefix = f"{path}schedule."
    v.reject_unknown(
        section,
        prefix,
        {"setting", "delta", "domain_size", "norm_bound", "noise_bound", "value"},
    )
    setting = v.string(section, prefix, "setting", choices=SCHEDULE_SETTINGS)
    if setting is None:
        return None
    allowed = {"setting"}
    kwargs = {"setting": setting}
    if setting == "finite_bayesian":
        allowed |= {"delta", "domain_size"}
        kwargs["delta"] = v.number(section, prefix, "delta", exclusive_min=0.0, exclusive_max=1.0)
        kwargs["domain_size"] = v.integer(section, prefix, "domain_size", required=False, minimum=1)
    elif setting == "rkhs_agnostic":
        allowed |= {"delta", "norm_bound", "noise_bound"}
        kwargs["delta"] = v.number(section, prefix, "delta", exclusive_min=0.0, exclusive_max=1.0)
        kwargs["norm_bound"] = v.number(section, prefix, "norm_bound", minimum=0.0)
        kwargs["noise_bound"] = v.number(section, prefix, "noise_bound", minimum=0.0)
    else:
        allowed |= {"value"}
        kwargs["value"] = v.number(section, prefix, "value", minimum=0.0)
    for key in section:
        if key not in allowed:
            v.error(f"{prefix}{key}", f"not valid for the {setting} setting")
    if any(kwargs.get(k) is None for k in allowed if k != "domain_size"):
        return None
    return ScheduleSpec(**kwargs)


def _parse_rules(v, doc):
    section = v.section(doc, "", "acquisition")
    if section is None:
        return ()
    v.reject_unknown(section, "acquisition.", {"rules"})
    raw = section.get("rules")
    if not isinstance(raw, list) or not raw:
        v.error("acquisition.rules", "must be a nonempty list of rules")
        return ()
    specs = []
    labels = set()
    for n, rule in enumerate(raw):
        path = f"acquisition.rules[{n}]."
        if not isinstance(rule, dict):
            v.error(path.rstrip("."), "must be a mapping")
            continue
        v.reject_unknown(rule, path, {"kind", "label", "xi", "schedule"})
        kind = v.string(
            rule,
            path,
            "kind",
            choices=(UCB, EXPECTED_IMPROVEMENT, PROBABILITY_OF_IMPROVEMENT, MAX_VARIANCE, MAX_MEAN),
        )
        if kind is None:
            continue
        label = v.string(rule, path, "label", required=False, default=kind)
        if label is not None:
            if not label.replace("_", "").replace("-", "").isalnum():
                v.error(f"{path}label", f"must be filename-safe, got {label!r}")
            elif label in labels:
                v.error(f"{path}label", f"duplicate rule label {label!r}")
            labels.add(label)
        xi = v.number(rule, path, "xi", required=False, minimum=0.0, default=0.0)
        if kind in (MAX_VARIANCE, MAX_MEAN, UCB) and "xi" in rule:
            v.error(f"{path}xi", f"only valid for ei/pi rules, not {kind}")
        schedule = None
        if kind == UCB:
            if "schedule" not in rule:
                v.error(f"{path}schedule", "required for the ucb rule")
            else:
                schedule = _parse_schedule(v, rule, path)
        elif "schedule" in rule:
            v.error(f"{path}schedule", f"only valid for the ucb rule, not {kind}")
        specs.append(RuleSpec(label=label or kind, kind=kind, xi=xi or 0.0, schedule=schedule))
    return tuple(specs)


def _parse_output(v, doc):
    if "output" not in doc:
        return None, True
    section = v.section(doc, "", "output", required=False)
    if section is None:
        return None, True
    v.reject_unknown(section, "output.", {"directory", "plots"})
    directory = v.string(section, "output.", "directory", required=False)
    plots = section.get("plots", True)
    if not isinstance(plots, bool):
        v.error("output.plots", f"must be a boolean, got {plots!r}")
        plots = True
    return directory, plots


def parse_config(text):
    """Parse and validate an experiment document. Raises ConfigError with
    every violation listed, one dotted field path per line."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a YAML mapping")

    v = _Validator()
    v.reject_unknown(
        doc,
        "",
        {
            "schema_version",
            "kernel",
            "domain",
            "environment",
            "model",
            "acquisition",
            "horizon",
            "run_seeds",
            "output",
        },
    )
    version = v.integer(doc, "", "schema_version")
    if version is not None and version != SCHEMA_VERSION:
        v.error("schema_version", f"unsupported version {version}, expected {SCHEMA_VERSION}")

    kernel = _parse_kernel(v, doc)
    grid, dataset_path = _parse_domain(v, doc)
    variant, env_noise, env_seeds, rkhs = _parse_environment(
        v, doc, has_dataset=dataset_path is not None
    )
    model = v.section(doc, "", "model")
    model_noise = None
    if model is not None:
        v.reject_unknown(model, "model.", {"noise_variance"})
        model_noise = v.number(model, "model.", "noise_variance", exclusive_min=0.0)
    rules = _parse_rules(v, doc)
    horizon = v.integer(doc, "", "horizon", minimum=1)
    run_seeds = v.seed_list(doc, "", "run_seeds")
    out_dir, plots = _parse_output(v, doc)

    if v.errors:
        raise ConfigError("config invalid:\n  " + "\n  ".join(sorted(v.errors)))

    return ExperimentConfig(
        kernel=kernel,
        grid=grid,
        dataset_path=dataset_path,
        variant=variant,
        env_noise_variance=env_noise,
        env_seeds=env_seeds,
        rkhs=rkhs,
        model_noise_variance=model_noise,
        rules=rules,
        horizon=horizon,
        run_seeds=run_seeds,
        output_directory=out_dir,
        plots=plots,
    )


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
