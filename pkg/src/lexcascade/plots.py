"""Figure rendering for report commands; every figure goes to a file."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .cascade import ClassRisk, RiskReport
from .hawkes import FitResult
from .stats import CompareReport

_BUCKET_LABELS = {1: "1", 2: "2", 3: "3+"}


def _save(fig, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_degree_distribution(hist: Mapping[int, int], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    degrees = sorted(d for d in hist if d > 0)
    counts = [hist[d] for d in degrees]
    if degrees:
        ax.loglog(degrees, counts, "o", ms=4, alpha=0.8)
    ax.set_xlabel("degree")
    ax.set_ylabel("number of users")
    ax.set_title("degree distribution")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_risk_ratios(aggregated: Mapping[str, Mapping[int, ClassRisk]], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    offsets = np.linspace(-0.15, 0.15, max(len(aggregated), 1))
    for off, cls in zip(offsets, sorted(aggregated)):
        per_bucket = aggregated[cls]
        xs, ys, lo, hi = [], [], [], []
        for b in sorted(per_bucket):
            cr = per_bucket[b]
            xs.append(b + off)
            ys.append(cr.ratio)
            lo.append(max(cr.ratio - cr.ci_lo, 0.0))
            hi.append(max(cr.ci_hi - cr.ratio, 0.0))
        ax.errorbar(xs, ys, yerr=[lo, hi], fmt="o-", capsize=3, label=cls)
    ax.axhline(1.0, color="grey", lw=1, ls="--")
    ax.set_xticks(list(_BUCKET_LABELS))
    ax.set_xticklabels(_BUCKET_LABELS.values())
    ax.set_xlabel("distinct exposures")
    ax.set_ylabel("risk ratio (observed / null)")
    ax.set_title("relative infection risk by exposure count")
    ax.legend()
    _save(fig, path)


def plot_fit_traces(results: Mapping[str, FitResult], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for word in sorted(results):
        trace = results[word].trace
        ax.plot(range(len(trace)), trace, label=word)
    ax.set_xlabel("coordinate-ascent iteration")
    ax.set_ylabel("log-likelihood")
    ax.set_title("fit convergence")
    if results:
        ax.legend(fontsize=8)
    _save(fig, path)


def plot_ll_improvement(report: CompareReport, path) -> None:
    """Goodness-of-fit gain per word and feature against event count."""
    fig, ax = plt.subplots(figsize=(6, 4))
    features = sorted({r.feature for r in report.rows})
    markers = dict(zip(features, "os^vD"))
    for feat in features:
        xs = [r.n_events for r in report.rows if r.feature == feat and r.lr_stat is not None]
        ys = [r.lr_stat for r in report.rows if r.feature == feat and r.lr_stat is not None]
        ax.scatter(xs, ys, marker=markers.get(feat, "o"), alpha=0.8, label=feat)
    if report.stat_threshold is not None:
        ax.axhline(
            report.stat_threshold,
            color="k",
            ls=":",
            lw=1,
            label=f"significance at alpha={report.alpha}",
        )
    ax.set_xscale("log")
    ax.set_xlabel("events in cascade")
    ax.set_ylabel("likelihood-ratio statistic")
    ax.set_title("goodness-of-fit improvement")
    ax.legend(fontsize=8)
    _save(fig, path)
