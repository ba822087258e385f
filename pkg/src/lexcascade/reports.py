"""Serialization of analysis results: TSV tables and JSON documents.

All tabular output is tab-separated with a header row; all structured
output is JSON embedding the full config echo and the seed. JSON files
carry a ``generated_at`` timestamp; everything else is byte-deterministic
for a given config and inputs.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Iterable, Mapping

from .cascade import ClassRisk, RiskReport
from .config import RunConfig
from .hawkes import FitResult
from .stats import CompareReport


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_tsv(path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def write_json(path, payload: dict, config: RunConfig | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = dict(payload)
    if config is not None:
        doc["config"] = config.echo()
        doc["seed"] = config.seed
    doc["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, allow_nan=True)
        fh.write("\n")


# -- risk reports ---------------------------------------------------------------

RISK_HEADER = (
    "word",
    "class",
    "bucket",
    "at_risk",
    "infected",
    "risk",
    "null_mean",
    "ratio",
    "ci_lo",
    "ci_hi",
)


def _bucket_label(b: int) -> str:
    return "3+" if b == 3 else str(b)


def risk_rows(reports: Iterable[RiskReport], classes: Mapping[str, str] | None = None):
    for report in reports:
        cls = (classes or {}).get(report.word, "all")
        for b, br in sorted(report.buckets.items()):
            yield (
                report.word,
                cls,
                _bucket_label(b),
                br.at_risk,
                br.infected,
                br.risk,
                br.null_mean,
                br.ratio,
                br.ci_lo,
                br.ci_hi,
            )


def class_risk_rows(aggregated: Mapping[str, Mapping[int, ClassRisk]]):
    for cls in sorted(aggregated):
        for b, cr in sorted(aggregated[cls].items()):
            yield (cls, _bucket_label(b), cr.ratio, cr.ci_lo, cr.ci_hi, cr.n_words)


def risk_report_payload(
    reports: Iterable[RiskReport],
    aggregated: Mapping[str, Mapping[int, ClassRisk]],
    classes: Mapping[str, str] | None = None,
) -> dict:
    words = []
    for report in reports:
        buckets = {}
        for b, br in sorted(report.buckets.items()):
            buckets[_bucket_label(b)] = {
                "at_risk": br.at_risk,
                "infected": br.infected,
                "risk": br.risk,
                "null_mean": br.null_mean,
                "ratio": br.ratio,
                "ci_lo": br.ci_lo,
                "ci_hi": br.ci_hi,
                "available": br.available,
            }
        words.append(
            {
                "word": report.word,
                "class": (classes or {}).get(report.word, "all"),
                "permutations": report.permutations,
                "buckets": buckets,
            }
        )
    agg = {
        cls: {
            _bucket_label(b): {
                "ratio": cr.ratio,
                "ci_lo": cr.ci_lo,
                "ci_hi": cr.ci_hi,
                "n_words": cr.n_words,
            }
            for b, cr in sorted(per_bucket.items())
        }
        for cls, per_bucket in sorted(aggregated.items())
    }
    return {"words": words, "classes": agg}


# -- fit results ----------------------------------------------------------------


def fit_rows(results: Mapping[str, FitResult]):
    for word in sorted(results):
        res = results[word]
        weights = res.weights_by_name
        yield (
            word,
            res.spec.label(),
            len(res.trace) and res.trace[0],
            res.log_lik,
            res.iterations,
            res.converged,
            *[weights[f] for f in res.spec.features],
        )


def fit_payload(results: Mapping[str, FitResult], n_events: Mapping[str, int]) -> dict:
    out = []
    for word in sorted(results):
        res = results[word]
        out.append(
            {
                "word": word,
                "features": list(res.spec.features),
                "weights": res.weights_by_name,
                "n_base_rates": len(res.params.base_rates),
                "log_lik": res.log_lik,
                "iterations": res.iterations,
                "converged": res.converged,
                "unidentified": list(res.unidentified),
                "n_events": n_events.get(word),
                "trace": [float(v) for v in res.trace],
            }
        )
    return {"fits": out}


# -- model comparison ------------------------------------------------------------

COMPARE_HEADER = (
    "word",
    "feature",
    "n_events",
    "ll_base",
    "ll_full",
    "lr_stat",
    "p",
    "bh_reject",
)


def compare_rows(report: CompareReport):
    for r in report.rows:
        yield (r.word, r.feature, r.n_events, r.ll_base, r.ll_full, r.lr_stat, r.p, r.bh_reject)


def compare_payload(report: CompareReport) -> dict:
    return {
        "alpha": report.alpha,
        "base_features": list(report.base_features),
        # the step-up threshold depends on the realized p-values of this run
        "realized_p_threshold": report.realized_p_threshold,
        "stat_threshold": report.stat_threshold,
        "tests": [
            {
                "word": r.word,
                "feature": r.feature,
                "n_events": r.n_events,
                "ll_base": r.ll_base,
                "ll_full": r.ll_full,
                "lr_stat": r.lr_stat,
                "p": r.p,
                "bh_reject": r.bh_reject,
                "flagged": r.flagged,
                "error": r.error,
            }
            for r in report.rows
        ],
    }
