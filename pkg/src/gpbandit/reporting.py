"""Delimited outputs and the figures rendered alongside them.

Trace CSVs are the ground truth: every summary statistic can be recomputed
from them exactly, because floats are written in shortest round-trip form.
Figures (PNG) are derived views for quick inspection and carry no data of
their own.
"""

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .kernels import EFFECTIVE_RANK_RTOL, LINEAR, MATERN

TRACE_FIXED_COLUMNS = (
    "t",
    "chosen_index",
    # x1..xd go here
    "y_obs",
    "f_true",
    "regret_inst",
    "regret_cum",
    "regret_avg",
    "beta_t",
    "info_gain_step",
    "info_gain_cum",
)

SUMMARY_COLUMNS = (
    "rule",
    "kernel",
    "checkpoint_t",
    "num_runs",
    "regret_cum_mean",
    "regret_cum_sem",
    "regret_avg_mean",
    "regret_avg_sem",
    "info_gain_cum_mean",
    "gamma_pool",
)


def _fmt(v):
    return repr(float(v))


def kernel_label(kernel):
    if kernel.family == LINEAR:
        return f"linear(s2={kernel.signal_variance!r})"
    if kernel.family == MATERN:
        return (
            f"matern(nu={kernel.nu!r},lengthscale={kernel.lengthscale!r},"
            f"s2={kernel.signal_variance!r})"
        )
    return f"squared_exponential(lengthscale={kernel.lengthscale!r},s2={kernel.signal_variance!r})"


def trace_header(dimension):
    cols = ["t", "chosen_index"]
    cols += [f"x{i}" for i in range(1, dimension + 1)]
    cols += list(TRACE_FIXED_COLUMNS[2:])
    return cols


def write_trace_csv(path, trace):
    dim = trace.chosen_x.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(dim))
        for i in range(trace.horizon):
            row = [str(i + 1), str(int(trace.chosen_index[i]))]
            row += [_fmt(v) for v in trace.chosen_x[i]]
            row += [
                _fmt(trace.y_observed[i]),
                _fmt(trace.f_true[i]),
                _fmt(trace.regret_inst[i]),
                _fmt(trace.regret_cum[i]),
                _fmt(trace.regret_avg[i]),
                _fmt(trace.beta[i]),
                _fmt(trace.info_gain_step[i]),
                _fmt(trace.info_gain_cum[i]),
            ]
            writer.writerow(row)


def read_trace_csv(path):
    """Parse a trace back into a dict of column name -> array."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    columns = {}
    for c, name in enumerate(header):
        raw = [row[c] for row in data]
        if name in ("t", "chosen_index"):
            columns[name] = np.array([int(v) for v in raw])
        else:
            columns[name] = np.array([float(v) for v in raw])
    return columns


def write_summary_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["rule"],
                    row["kernel"],
                    str(row["checkpoint_t"]),
                    str(row["num_runs"]),
                    _fmt(row["regret_cum_mean"]),
                    _fmt(row["regret_cum_sem"]),
                    _fmt(row["regret_avg_mean"]),
                    _fmt(row["regret_avg_sem"]),
                    _fmt(row["info_gain_cum_mean"]),
                    _fmt(row["gamma_pool"]),
                ]
            )


def write_gamma_csv(path, design):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "chosen_index", "gain_step", "gain_cum"])
        cum = 0.0
        for step, (index, gain) in enumerate(zip(design.indices, design.step_gains), start=1):
            cum += gain
            writer.writerow([str(step), str(index), _fmt(gain), _fmt(cum)])


def write_spectrum_csv(path, spec):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eigenvalue"])
        for i, lam in enumerate(spec.eigenvalues, start=1):
            writer.writerow([str(i), _fmt(lam)])


def fit_decay_exponent(eigenvalues):
    """Least-squares slope of log(eigenvalue) against log(rank).

    Fitted over the numerically nonzero part of the spectrum; None when
    fewer than three eigenvalues survive, since a two-point fit says
    nothing about decay.
    """
    eig = np.asarray(eigenvalues, dtype=float)
    if eig.size == 0 or eig[0] <= 0:
        return None
    keep = eig >= EFFECTIVE_RANK_RTOL * eig[0]
    eig = eig[keep]
    if eig.size < 3:
        return None
    k = np.arange(1, eig.size + 1)
    slope = np.polyfit(np.log(k), np.log(eig), 1)[0]
    return float(slope)


def render_regret_figures(out_dir, traces_by_label):
    """Seed-mean regret and information-gain curves, one line per rule."""
    panels = (
        ("regret_avg", "average regret R_t / t", "regret_avg.png"),
        ("regret_cum", "cumulative regret R_t", "regret_cum.png"),
        ("info_gain_cum", "cumulative information gain", "info_gain.png"),
    )
    paths = []
    for attr, ylabel, filename in panels:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for label, traces in sorted(traces_by_label.items()):
            curves = np.stack([getattr(trace, attr) for trace in traces])
            t = np.arange(1, curves.shape[1] + 1)
            ax.plot(t, curves.mean(axis=0), label=f"{label} (n={len(traces)})")
        ax.set_xlabel("round t")
        ax.set_ylabel(ylabel)
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = f"{out_dir}/{filename}"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths


def render_gamma_figure(path, design):
    fig, (ax_step, ax_cum) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    steps = np.arange(1, len(design.indices) + 1)
    ax_step.plot(steps, design.step_gains, marker="o", ms=3)
    ax_step.set_ylabel("marginal gain")
    ax_step.grid(True, alpha=0.3)
    ax_cum.plot(steps, np.cumsum(design.step_gains))
    ax_cum.set_xlabel("design step")
    ax_cum.set_ylabel("cumulative gain")
    ax_cum.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_spectrum_figure(path, spec):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    positive = spec.eigenvalues[spec.eigenvalues > 0]
    ax.semilogy(np.arange(1, positive.size + 1), positive, marker="o", ms=3)
    ax.set_xlabel("rank")
    ax.set_ylabel("eigenvalue")
    exponent = fit_decay_exponent(spec.eigenvalues)
    title = f"effective rank {spec.effective_rank}, trace {spec.trace:.4g}"
    if exponent is not None:
        title += f", power-law fit exponent {exponent:.2f}"
    ax.set_title(title)
    ax.grid(True, alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
