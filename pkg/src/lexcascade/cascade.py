"""Event cascades: ingestion, exposure tracking, infection risk, shuffle test.

A cascade is one word's time-ordered usage events over an observation
window [0, T] (hours). Exposure follows three conditions: the exposer used
the word at time t, the target had not used it before t, and the tie
between them was formed before t.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import ConfigError, ParseError
from .graph import SECONDS_PER_HOUR, SocialGraph

BUCKETS = (1, 2, 3)  # exposure-count buckets; 3 means "3 or more"


class Event(NamedTuple):
    user: str
    time: float
    word: str


@dataclass
class Cascade:
    """Time-sorted events for one word plus the observation horizon.

    ``times`` are hours from the cascade origin; ``origin_hours`` places
    that origin on the absolute clock shared with edge-formation times.
    """

    word: str
    users: tuple[str, ...]
    times: np.ndarray
    horizon: float
    origin_hours: float = 0.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.users = tuple(self.users)
        if len(self.users) != len(self.times):
            raise ValueError("users and times must have equal length")
        if len(self.times):
            if not np.all(np.isfinite(self.times)):
                raise ValueError("event times must be finite")
            if self.times[0] < 0:
                raise ValueError("event times must be non-negative")
            if np.any(np.diff(self.times) < 0):
                raise ValueError("event times must be sorted ascending")
            if self.times[-1] > self.horizon:
                raise ValueError("event times must not exceed the horizon")
        if not (math.isfinite(self.horizon) and self.horizon >= 0):
            raise ValueError("horizon must be finite and non-negative")
        self._adoption: dict[str, float] | None = None

    @property
    def n_events(self) -> int:
        return len(self.times)

    def events(self) -> Iterator[Event]:
        for u, t in zip(self.users, self.times):
            yield Event(u, float(t), self.word)

    def adoption_times(self) -> dict[str, float]:
        """First usage time per user (adoption is defined as first use)."""
        if self._adoption is None:
            adoption: dict[str, float] = {}
            for u, t in zip(self.users, self.times):
                if u not in adoption:
                    adoption[u] = float(t)
            self._adoption = adoption
        return self._adoption

    def user_index_array(self, graph: SocialGraph) -> np.ndarray:
        return np.fromiter(
            (graph.index_of(u) for u in self.users), dtype=np.int64, count=len(self.users)
        )


def ingest_events(path, graph: SocialGraph, horizon_hours: float | None = None) -> dict[str, Cascade]:
    """Read ``word<TAB>user<TAB>epoch_seconds`` lines into per-word cascades.

    Events are grouped per word, stably sorted by time, and rebased to
    hours from each word's earliest event. Users absent from the graph are
    added as isolated nodes. The horizon defaults to the latest event time
    per word unless ``horizon_hours`` overrides it.
    """
    raw: dict[str, tuple[list[str], list[float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(path, line_no, f"expected 3 fields, got {len(parts)}")
            word, user, epoch_s = parts
            try:
                epoch = float(epoch_s)
            except ValueError:
                raise ParseError(path, line_no, f"bad timestamp {epoch_s!r}") from None
            if not math.isfinite(epoch):
                raise ParseError(path, line_no, f"non-finite timestamp {epoch_s!r}")
            users, epochs = raw.setdefault(word, ([], []))
            users.append(user)
            epochs.append(epoch)
            graph.add_user(user)

    cascades: dict[str, Cascade] = {}
    for word, (users, epochs) in raw.items():
        ep = np.asarray(epochs, dtype=np.float64)
        order = np.argsort(ep, kind="stable")
        ep = ep[order]
        times = (ep - ep[0]) / SECONDS_PER_HOUR
        horizon = float(times[-1]) if horizon_hours is None else float(horizon_hours)
        if horizon < times[-1]:
            raise ConfigError(
                f"horizon {horizon}h is earlier than the last event of {word!r} ({times[-1]:.3f}h)"
            )
        cascades[word] = Cascade(
            word=word,
            users=tuple(users[k] for k in order),
            times=times,
            horizon=horizon,
            origin_hours=float(ep[0]) / SECONDS_PER_HOUR,
        )
    return cascades


def write_events(path, cascades: Iterable[Cascade]) -> None:
    """Write cascades back out in the same format ``ingest_events`` reads."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# word\tuser\tepoch_seconds\n")
        for cascade in cascades:
            for u, t in zip(cascade.users, cascade.times):
                epoch = (float(t) + cascade.origin_hours) * SECONDS_PER_HOUR
                fh.write(f"{cascade.word}\t{u}\t{epoch!r}\n")


# -- exposures and infection risk ---------------------------------------------


@dataclass(frozen=True)
class ExposureRecord:
    """Pre-adoption exposures of one target user.

    ``exposers`` are distinct graph neighbors ordered by first exposure
    time; every exposure happened strictly before the target's adoption
    (or had no adoption to beat).
    """

    target: str
    exposers: tuple[str, ...]
    first_times: tuple[float, ...]
    adoption_time: float | None


def exposures(cascade: Cascade, graph: SocialGraph) -> list[ExposureRecord]:
    """One record per user with at least one qualifying exposure."""
    adopt = cascade.adoption_times()
    origin = cascade.origin_hours
    # first exposure time per (target, exposer), walked in time order
    seen: dict[int, dict[int, float]] = {}
    for u, t in zip(cascade.users, cascade.times):
        i = graph.index_of(u)
        t = float(t)
        for j in graph.neighbor_set(i):
            target = graph.id_of(j)
            t_adopt = adopt.get(target)
            if t_adopt is not None and t >= t_adopt:
                continue
            if graph.formed_at_idx(i, j) - origin >= t:
                continue
            per_target = seen.setdefault(j, {})
            if i not in per_target:
                per_target[i] = t
    records = []
    for j in sorted(seen):
        per_target = seen[j]
        order = sorted(per_target.items(), key=lambda kv: (kv[1], kv[0]))
        target = graph.id_of(j)
        records.append(
            ExposureRecord(
                target=target,
                exposers=tuple(graph.id_of(i) for i, _ in order),
                first_times=tuple(t for _, t in order),
                adoption_time=adopt.get(target),
            )
        )
    return records


class BucketCount(NamedTuple):
    at_risk: int
    infected: int

    @property
    def risk(self) -> float | None:
        return None if self.at_risk == 0 else self.infected / self.at_risk


def infection_risk(records: Iterable[ExposureRecord]) -> dict[int, BucketCount]:
    """Per-bucket at-risk/infected counts from exposure records.

    A user is at risk in bucket k once their k-th distinct pre-adoption
    exposure occurred (k = 3 meaning three or more); an adopter is
    infected in the bucket of their final pre-adoption exposure count.
    This hazard-style reading never counts an adoption in two buckets.
    """
    at_risk = {k: 0 for k in BUCKETS}
    infected = {k: 0 for k in BUCKETS}
    for rec in records:
        k = min(len(rec.exposers), BUCKETS[-1])
        for b in BUCKETS[:k]:
            at_risk[b] += 1
        if rec.adoption_time is not None and k >= 1:
            infected[k] += 1
    return {b: BucketCount(at_risk[b], infected[b]) for b in BUCKETS}


def _bucket_counts_fast(
    graph: SocialGraph,
    times_by_user: dict[int, np.ndarray],
    adopt: dict[int, float],
    origin: float,
) -> dict[int, BucketCount]:
    """Exposure-bucket counts without materializing records.

    ``times_by_user`` maps user index -> sorted event times; ``adopt`` maps
    user index -> first event time. Equivalent to
    ``infection_risk(exposures(...))`` and used by the shuffle test where
    the recount runs once per permutation.
    """
    n_exposers: dict[int, int] = {}
    inf_ = math.inf
    for i, j in graph.edge_index_pairs():
        formed = graph.formed_at_idx(i, j) - origin
        for src, tgt in ((i, j), (j, i)):
            st = times_by_user.get(src)
            if st is None or not len(st):
                continue
            pos = int(np.searchsorted(st, formed, side="right"))
            if pos == len(st):
                continue
            if st[pos] < adopt.get(tgt, inf_):
                n_exposers[tgt] = n_exposers.get(tgt, 0) + 1
    at_risk = {k: 0 for k in BUCKETS}
    infected = {k: 0 for k in BUCKETS}
    for tgt, n in n_exposers.items():
        k = min(n, BUCKETS[-1])
        for b in BUCKETS[:k]:
            at_risk[b] += 1
        if tgt in adopt:
            infected[k] += 1
    return {b: BucketCount(at_risk[b], infected[b]) for b in BUCKETS}


def _group_times(user_idx: np.ndarray, times: np.ndarray) -> tuple[dict[int, np.ndarray], dict[int, float]]:
    by_user: dict[int, np.ndarray] = {}
    adopt: dict[int, float] = {}
    if not len(user_idx):
        return by_user, adopt
    order = np.argsort(user_idx, kind="stable")
    sorted_users = user_idx[order]
    sorted_times = times[order]
    bounds = np.flatnonzero(np.diff(sorted_users)) + 1
    for chunk_u, chunk_t in zip(
        np.split(sorted_users, bounds), np.split(sorted_times, bounds)
    ):
        st = np.sort(chunk_t)
        u = int(chunk_u[0])
        by_user[u] = st
        adopt[u] = float(st[0])
    return by_user, adopt


# -- shuffle permutation test --------------------------------------------------


def _safe_ratio(observed: float, null: float) -> float:
    """observed/null with the conventions 0/0 -> 1 and x/0 -> inf."""
    if observed == null:
        return 1.0
    if null == 0.0:
        return math.inf
    return observed / null


@dataclass
class BucketRisk:
    at_risk: int
    infected: int
    risk: float | None
    null_risks: np.ndarray  # one per permutation; nan where the bucket was empty
    null_mean: float | None
    ratio: float | None
    ratio_samples: np.ndarray
    ci_lo: float | None
    ci_hi: float | None
    available: bool


@dataclass
class RiskReport:
    word: str
    permutations: int
    seed: int
    buckets: dict[int, BucketRisk]

    def available_buckets(self) -> dict[int, BucketRisk]:
        return {b: br for b, br in self.buckets.items() if br.available}


def shuffle_test(
    cascade: Cascade,
    graph: SocialGraph,
    permutations: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> RiskReport:
    """Compare observed infection risks against a timestamp-shuffle null.

    Each permutation keeps the multiset of timestamps and every user's
    event count, reassigning times to events uniformly at random. The
    point ratio is observed risk over mean null risk; the 95% CI comes
    from the 2.5/97.5 empirical percentiles of the per-permutation
    observed-to-null ratios. Each permutation owns an RNG stream derived
    from (seed, permutation index), so results do not depend on worker
    count or scheduling.
    """
    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    user_idx = cascade.user_index_array(graph)
    times = cascade.times
    origin = cascade.origin_hours

    by_user, adopt = _group_times(user_idx, times)
    observed = _bucket_counts_fast(graph, by_user, adopt, origin)

    def one_permutation(p: int) -> dict[int, BucketCount]:
        rng = np.random.default_rng([seed, p])
        perm_times = times[rng.permutation(len(times))]
        bu, ad = _group_times(user_idx, perm_times)
        return _bucket_counts_fast(graph, bu, ad, origin)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            null_counts = list(pool.map(one_permutation, range(permutations)))
    else:
        null_counts = [one_permutation(p) for p in range(permutations)]

    buckets: dict[int, BucketRisk] = {}
    for b in BUCKETS:
        obs = observed[b]
        null_risks = np.array(
            [nc[b].risk if nc[b].risk is not None else np.nan for nc in null_counts]
        )
        valid = null_risks[~np.isnan(null_risks)]
        available = obs.at_risk > 0 and len(valid) > 0
        if available:
            obs_risk = obs.risk
            samples = np.array([_safe_ratio(obs_risk, nr) for nr in valid])
            null_mean = float(np.mean(valid))
            ratio = _safe_ratio(obs_risk, null_mean)
            ci_lo, ci_hi = (float(x) for x in np.percentile(samples, [2.5, 97.5]))
        else:
            samples = np.empty(0)
            null_mean = ratio = ci_lo = ci_hi = None
        buckets[b] = BucketRisk(
            at_risk=obs.at_risk,
            infected=obs.infected,
            risk=obs.risk,
            null_risks=null_risks,
            null_mean=null_mean,
            ratio=ratio,
            ratio_samples=samples,
            ci_lo=ci_lo,
            ci_hi=ci_hi,
            available=available,
        )
    return RiskReport(word=cascade.word, permutations=permutations, seed=seed, buckets=buckets)


@dataclass
class ClassRisk:
    ratio: float
    ci_lo: float
    ci_hi: float
    n_words: int
    n_samples: int


def aggregate_risk(
    reports: Iterable[RiskReport], classes: dict[str, str] | None = None
) -> dict[str, dict[int, ClassRisk]]:
    """Pool per-word risk ratios into per-class, per-bucket summaries.

    The class ratio is the mean of the member words' point ratios; the CI
    comes from the pooled per-permutation ratio samples, so pooling runs
    across words and across permutations. Classes with no available
    buckets are omitted.
    """
    grouped: dict[str, dict[int, tuple[list[float], list[np.ndarray]]]] = {}
    for report in reports:
        cls = (classes or {}).get(report.word, "all")
        for b, br in report.buckets.items():
            if not br.available:
                continue
            points, samples = grouped.setdefault(cls, {}).setdefault(b, ([], []))
            points.append(br.ratio)
            samples.append(br.ratio_samples)
    out: dict[str, dict[int, ClassRisk]] = {}
    for cls, per_bucket in grouped.items():
        out[cls] = {}
        for b, (points, samples) in sorted(per_bucket.items()):
            pooled = np.concatenate(samples)
            ci_lo, ci_hi = (float(x) for x in np.percentile(pooled, [2.5, 97.5]))
            out[cls][b] = ClassRisk(
                ratio=float(np.mean(points)),
                ci_lo=ci_lo,
                ci_hi=ci_hi,
                n_words=len(points),
                n_samples=len(pooled),
            )
    return out
