"""Nested-model comparison: likelihood-ratio tests with FDR correction."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import erfcinv

from .cascade import Cascade
from .errors import LexcascadeError
from .features import FeatureContext, ModelSpec
from .graph import SocialGraph
from .hawkes import FitConfig, FitResult, fit

# LR statistics below this are treated as optimizer noise around zero;
# anything more negative indicates a failed nested maximization.
_LR_NOISE = 1e-6


def chi2_1_sf(statistic: float) -> float:
    """Upper tail of the chi-squared distribution with one dof.

    Uses the complementary-error-function identity for a squared standard
    normal: P(X > s) = erfc(sqrt(s / 2)).
    """
    if statistic < 0:
        raise ValueError("statistic must be non-negative")
    return math.erfc(math.sqrt(statistic / 2.0))


def chi2_1_isf(p: float) -> float:
    """Inverse of ``chi2_1_sf``: the statistic with upper-tail mass p."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    return float(2.0 * erfcinv(p) ** 2)


def lrt(fit_base: FitResult, fit_full: FitResult) -> tuple[float, float, bool]:
    """Likelihood-ratio test of two nested fits differing by one feature.

    Returns (statistic, p, flagged): the statistic 2*(L_full - L_base) is
    clamped at zero, and ``flagged`` marks statistics below -1e-6, which a
    correct nested maximization cannot produce.
    """
    extra = set(fit_full.spec.features) - set(fit_base.spec.features)
    if len(extra) != 1 or not set(fit_base.spec.features) <= set(fit_full.spec.features):
        raise ValueError(
            f"specs are not nested with one extra feature: "
            f"{fit_base.spec.label()} vs {fit_full.spec.label()}"
        )
    raw = 2.0 * (fit_full.log_lik - fit_base.log_lik)
    flagged = raw < -_LR_NOISE
    statistic = max(raw, 0.0)
    return statistic, chi2_1_sf(statistic), flagged


def bh_correct(pvalues: Sequence[float], alpha: float = 0.05) -> np.ndarray:
    """Step-up false-discovery-rate decisions, one boolean per input.

    Sorts ascending (stable on ties by original index), finds the largest
    rank i with p_(i) <= (i/m) * alpha, and rejects everything up to it.
    """
    p = np.asarray(pvalues, dtype=np.float64)
    if p.size == 0:
        return np.zeros(0, dtype=bool)
    if np.any((p < 0) | (p > 1) | ~np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    thresholds = alpha * np.arange(1, m + 1) / m
    passing = np.flatnonzero(ranked <= thresholds)
    reject = np.zeros(m, dtype=bool)
    if len(passing):
        reject[order[: passing[-1] + 1]] = True
    return reject


def bh_realized_threshold(pvalues: Sequence[float], alpha: float = 0.05) -> float | None:
    """The largest passing step-up threshold (i/m)*alpha, or None."""
    p = np.sort(np.asarray(pvalues, dtype=np.float64))
    m = len(p)
    if m == 0:
        return None
    thresholds = alpha * np.arange(1, m + 1) / m
    passing = np.flatnonzero(p <= thresholds)
    if not len(passing):
        return None
    return float(thresholds[passing[-1]])


@dataclass
class CompareRow:
    word: str
    feature: str
    n_events: int
    ll_base: float | None
    ll_full: float | None
    lr_stat: float | None
    p: float | None
    bh_reject: bool
    flagged: bool = False
    error: str | None = None


@dataclass
class CompareReport:
    rows: list[CompareRow]
    alpha: float
    realized_p_threshold: float | None
    stat_threshold: float | None
    base_features: tuple[str, ...] = ()

    def rejected(self) -> list[CompareRow]:
        return [r for r in self.rows if r.bh_reject]


def compare_pipeline(
    cascades: Mapping[str, Cascade],
    graph: SocialGraph,
    base_spec: ModelSpec,
    added_features: Sequence[str],
    alpha: float = 0.05,
    config: FitConfig = FitConfig(),
    workers: int = 1,
) -> CompareReport:
    """Fit base and one-feature-augmented models per word, test jointly.

    Benjamini-Hochberg runs across every (word, feature) test in the run.
    A word whose fit fails is reported with its error message rather than
    silently dropped. The realized step-up threshold is data-dependent and
    emitted for the goodness-of-fit figure.
    """
    words = sorted(cascades)
    specs = [base_spec.with_feature(f) for f in added_features]

    def fit_word(word: str):
        cascade = cascades[word]
        try:
            # the tie-strength threshold is word-scoped, not spec-scoped:
            # build the feature context once and share it across the fits
            ctx = FeatureContext.for_cascade(
                graph,
                cascade,
                tracked_cities=config.tracked_cities,
                tie_percentile=config.tie_percentile,
                aa_threshold=config.aa_threshold,
            )
            base = fit(cascade, graph, base_spec, config, context=ctx)
            fulls = [fit(cascade, graph, s, config, context=ctx) for s in specs]
            return base, fulls, None
        except LexcascadeError as exc:
            return None, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fitted = list(pool.map(fit_word, words))
    else:
        fitted = [fit_word(w) for w in words]

    rows: list[CompareRow] = []
    testable: list[int] = []
    pvalues: list[float] = []
    for word, (base, fulls, error) in zip(words, fitted):
        n = cascades[word].n_events
        if error is not None:
            for feat in added_features:
                rows.append(
                    CompareRow(word, feat, n, None, None, None, None, False, error=error)
                )
            continue
        for feat, full in zip(added_features, fulls):
            stat, p, flagged = lrt(base, full)
            rows.append(
                CompareRow(
                    word,
                    feat,
                    n,
                    ll_base=base.log_lik,
                    ll_full=full.log_lik,
                    lr_stat=stat,
                    p=p,
                    bh_reject=False,
                    flagged=flagged,
                )
            )
            testable.append(len(rows) - 1)
            pvalues.append(p)

    if pvalues:
        decisions = bh_correct(pvalues, alpha)
        for idx, decision in zip(testable, decisions):
            rows[idx].bh_reject = bool(decision)
        p_thresh = bh_realized_threshold(pvalues, alpha)
    else:
        p_thresh = None
    stat_thresh = chi2_1_isf(p_thresh) if p_thresh else None
    return CompareReport(
        rows=rows,
        alpha=alpha,
        realized_p_threshold=p_thresh,
        stat_threshold=stat_thresh,
        base_features=base_spec.features,
    )
