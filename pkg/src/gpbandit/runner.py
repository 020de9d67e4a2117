"""Sweep orchestration: fan runs out over (rule, env seed, run seed), collect
traces, and emit the delimited outputs plus figures.

Outputs are byte-deterministic for a given config: tasks are keyed and
written in sorted order no matter how many workers computed them, floats
serialize in shortest round-trip form, and nothing wall-clock-dependent
lands in any file. Failed runs are retained as manifest entries so a sweep
never loses its successful traces.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import reporting
from .config import grid_points
from .environments import (
    RKHS_FUNCTION,
    SAMPLED_GP,
    make_rkhs_env,
    make_sampled_gp_env,
    make_tabular_env,
    run,
)
from .errors import NumericalError
from .info_gain import exhaustive_gamma, greedy_gamma
from .kernels import gram
from .tables import ingest_table

# exhaustive subset search is only tractable at toy scale
EXHAUSTIVE_POOL_LIMIT = 12
EXHAUSTIVE_STEPS_LIMIT = 4


def build_pool(config):
    """Materialize the candidate pool and, for tabular runs, its values."""
    if config.grid is not None:
        return grid_points(config.grid), None
    points, values = ingest_table(config.dataset_path)
    return points, values


def build_environment(config, pool, table_values, env_seed):
    if config.variant == SAMPLED_GP:
        return make_sampled_gp_env(config.kernel, pool, config.env_noise_variance, env_seed)
    if config.variant == RKHS_FUNCTION:
        return make_rkhs_env(config.kernel, pool, config.rkhs, config.env_noise_variance)
    return make_tabular_env(pool, table_values, config.env_noise_variance)


def trace_filename(rule_label, env_seed, run_seed):
    if env_seed is None:
        return f"trace_{rule_label}_run{run_seed}.csv"
    return f"trace_{rule_label}_env{env_seed}_run{run_seed}.csv"


def _task_keys(config, seed_offset):
    env_seeds = config.env_seeds if config.variant == SAMPLED_GP else (None,)
    return [
        (spec.label, env_seed, run_seed + seed_offset)
        for spec in config.rules
        for env_seed in env_seeds
        for run_seed in config.run_seeds
    ]


def _execute_task(args):
    """One (rule, env seed, run seed) cell; returns (key, trace or None, error)."""
    config, pool, table_values, key = args
    label, env_seed, run_seed = key
    spec = next(s for s in config.rules if s.label == label)
    try:
        env = build_environment(config, pool, table_values, env_seed)
        rule = spec.build(pool.shape[0])
        trace = run(
            env,
            rule,
            config.kernel,
            config.model_noise_variance,
            config.horizon,
            run_seed,
        )
        return key, trace, None
    except NumericalError as exc:
        return key, None, str(exc)


@dataclass(frozen=True)
class ExecutionResult:
    out_dir: str
    trace_paths: dict
    failures: dict
    summary_rows: tuple
    summary_path: str
    manifest_path: str
    gamma_design: object

    @property
    def ok(self):
        return not self.failures


def checkpoints(horizon):
    """Rounds at which the summary reports: T/10, T/2, and T (deduplicated)."""
    marks = sorted({max(1, horizon // 10), max(1, horizon // 2), horizon})
    return marks


def _summary_rows(config, traces, gamma_value):
    rows = []
    kernel_label = reporting.kernel_label(config.kernel)
    for spec in config.rules:
        runs = [trace for (label, _, _), trace in sorted(traces.items()) if label == spec.label]
        if not runs:
            continue
        for t in checkpoints(config.horizon):
            i = t - 1
            cum = np.array([r.regret_cum[i] for r in runs])
            avg = np.array([r.regret_avg[i] for r in runs])
            gain = np.array([r.info_gain_cum[i] for r in runs])
            rows.append(
                {
                    "rule": spec.label,
                    "kernel": kernel_label,
                    "checkpoint_t": t,
                    "num_runs": len(runs),
                    "regret_cum_mean": float(np.mean(cum)),
                    "regret_cum_sem": _sem(cum),
                    "regret_avg_mean": float(np.mean(avg)),
                    "regret_avg_sem": _sem(avg),
                    "info_gain_cum_mean": float(np.mean(gain)),
                    "gamma_pool": gamma_value,
                }
            )
    return tuple(rows)


def _sem(values):
    if values.size <= 1:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(values.size))


def pool_gamma(config, pool):
    """Greedy information-gain design of the pool at the run's budget."""
    steps = min(config.horizon, pool.shape[0])
    return greedy_gamma(gram(config.kernel, pool), steps, config.model_noise_variance)


def exhaustive_gamma_if_tractable(config, pool):
    steps = min(config.horizon, pool.shape[0])
    if pool.shape[0] <= EXHAUSTIVE_POOL_LIMIT and steps <= EXHAUSTIVE_STEPS_LIMIT:
        return exhaustive_gamma(gram(config.kernel, pool), steps, config.model_noise_variance)
    return None


def execute(config, out_dir, workers=1, seed_offset=0):
    """Run the configured sweep and write traces, summary, manifest, figures.

    Returns an ExecutionResult; numerical failures are recorded per task
    rather than raised, so partial output survives.
    """
    os.makedirs(out_dir, exist_ok=True)
    pool, table_values = build_pool(config)
    keys = _task_keys(config, seed_offset)
    payloads = [(config, pool, table_values, key) for key in keys]

    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            for key, trace, error in executor.map(_execute_task, payloads):
                results[key] = (trace, error)
    else:
        for payload in payloads:
            key, trace, error = _execute_task(payload)
            results[key] = (trace, error)

    traces = {}
    failures = {}
    trace_paths = {}
    for key in sorted(results, key=_sort_key):
        trace, error = results[key]
        if error is not None:
            failures[key] = error
            continue
        traces[key] = trace
        path = os.path.join(out_dir, trace_filename(*key))
        reporting.write_trace_csv(path, trace)
        trace_paths[key] = path

    design = pool_gamma(config, pool)
    rows = _summary_rows(config, traces, design.achieved_gain)
    summary_path = os.path.join(out_dir, "summary.csv")
    reporting.write_summary_csv(summary_path, rows)

    manifest_path = os.path.join(out_dir, "manifest.json")
    _write_manifest(manifest_path, config, keys, trace_paths, failures, design)

    if config.plots and traces:
        by_label = {}
        for (label, _, _), trace in sorted(traces.items(), key=lambda kv: _sort_key(kv[0])):
            by_label.setdefault(label, []).append(trace)
        reporting.render_regret_figures(out_dir, by_label)

    return ExecutionResult(
        out_dir=out_dir,
        trace_paths=trace_paths,
        failures=failures,
        summary_rows=rows,
        summary_path=summary_path,
        manifest_path=manifest_path,
        gamma_design=design,
    )


def _sort_key(key):
    label, env_seed, run_seed = key
    return (label, -1 if env_seed is None else env_seed, run_seed)


def _write_manifest(path, config, keys, trace_paths, failures, design):
    entries = []
    for key in sorted(keys, key=_sort_key):
        label, env_seed, run_seed = key
        entry = {
            "rule": label,
            "env_seed": env_seed,
            "run_seed": run_seed,
        }
        if key in failures:
            entry["status"] = "failed"
            entry["error"] = failures[key]
        else:
            entry["status"] = "ok"
            entry["trace"] = os.path.basename(trace_paths[key])
        entries.append(entry)
    manifest = {
        "schema_version": 1,
        "horizon": config.horizon,
        "failures": len(failures),
        "runs": entries,
        "summary": "summary.csv",
        "gamma": {
            "steps": len(design.indices),
            "achieved_gain": design.achieved_gain,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
