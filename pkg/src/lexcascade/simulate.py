"""Ground-truth generators: cascades by thinning, plus synthetic graphs.

The sampler draws exact cascades from the feature-factored self-exciting
model, which makes it the oracle for estimator and risk-pipeline tests.
Two extra contagion modes (per-exposure Bernoulli with and without a
threshold boost) generate adoption data with known simple/complex shape.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .cascade import Cascade
from .errors import UnstableProcessError
from .features import FEATURES, FeatureContext, ModelSpec, aggregate_vector
from .graph import SocialGraph
from .hawkes import Kernel

# Excitation older than this many kernel e-foldings is dropped from the
# simulator state; exp(-41.5) < 1e-18, beneath double-precision noise.
_PRUNE_EFOLDINGS = 41.5


@dataclass
class SimConfig:
    """Everything needed to draw one cascade, including its feature context.

    The tie-strength threshold must be supplied explicitly here (the
    percentile rule needs adopters, which do not exist before sampling).
    ``stability_check`` is 'per-user' (max incoming branching per user),
    'spectral' (power-iteration bound on the branching matrix), or 'off'
    for deliberately supercritical finite-horizon experiments.
    """

    graph: SocialGraph
    weights: np.ndarray
    base_rate: float
    horizon: float
    seed: int | tuple[int, ...] = 0
    spec: ModelSpec = field(default_factory=lambda: ModelSpec(FEATURES))
    kernel: Kernel = field(default_factory=Kernel)
    word: str = "w"
    mode: str = "hawkes"  # hawkes | simple | complex
    max_events: int | None = None
    stability_factor: float = 0.95
    stability_check: str = "per-user"
    aa_threshold: float | None = None
    tracked_cities: frozenset = frozenset()
    # contagion-mode knobs
    adopt_prob: float = 0.1
    boost: float = 4.0
    threshold_k: int = 2
    seed_rate: float = 0.001  # spontaneous adoptions per user per hour
    delay_hours: float = 0.05

    def context(self) -> FeatureContext:
        return FeatureContext(
            self.graph,
            tracked_cities=self.tracked_cities,
            aa_threshold=self.aa_threshold,
        )


def _total_jumps(cfg: SimConfig, ctx: FeatureContext) -> np.ndarray:
    """Per-user total offspring intensity added by one of their events."""
    g = cfg.graph
    cols = [FEATURES.index(f) for f in cfg.spec.features]
    weights = np.asarray(cfg.weights, dtype=np.float64)
    return np.array(
        [aggregate_vector(ctx, u)[cols] @ weights for u in g.users]
    )


def branching_report(cfg: SimConfig) -> dict:
    """Expected-offspring diagnostics for a configuration.

    ``per_user_max`` is the largest incoming (equivalently, by symmetry of
    the features, outgoing) branching ratio over users; ``spectral`` is a
    power-iteration estimate of the branching matrix's spectral radius.
    """
    ctx = cfg.context()
    jumps = _total_jumps(cfg, ctx) / cfg.kernel.decay
    report = {
        "per_user_max": float(jumps.max()) if len(jumps) else 0.0,
        "per_user_mean": float(jumps.mean()) if len(jumps) else 0.0,
    }
    if cfg.stability_check == "spectral":
        report["spectral"] = _spectral_estimate(cfg, ctx)
    return report


def _spectral_estimate(cfg: SimConfig, ctx: FeatureContext, iters: int = 120) -> float:
    g = cfg.graph
    n = g.n_users
    weights = np.asarray(cfg.weights, dtype=np.float64)
    feats = cfg.spec.features
    w_self = weights[feats.index("self")] if "self" in feats else 0.0
    w_reply = weights[feats.index("reply")] if "reply" in feats else 0.0
    w_strong = weights[feats.index("strong")] if "strong" in feats else 0.0
    w_local = weights[feats.index("local")] if "local" in feats else 0.0

    rows, cols, vals = [], [], []
    for i, j in g.edge_index_pairs():
        w = w_reply
        if w_strong and ctx.is_strong_idx(i, j):
            w += w_strong
        if w_local and ctx.is_local_idx(i, j):
            w += w_local
        if w > 0:
            rows += [i, j]
            cols += [j, i]
            vals += [w, w]
    from scipy.sparse import coo_matrix

    mat = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    v = np.full(n, 1.0 / math.sqrt(n))
    rho = 0.0
    for _ in range(iters):
        nv = mat @ v + w_self * v
        norm = np.linalg.norm(nv)
        if norm == 0:
            return 0.0
        rho = norm
        v = nv / norm
    return float(rho / cfg.kernel.decay)


def _check_stability(cfg: SimConfig) -> None:
    if cfg.stability_check == "off":
        return
    report = branching_report(cfg)
    key = "spectral" if cfg.stability_check == "spectral" else "per_user_max"
    value = report[key]
    if value >= cfg.stability_factor:
        raise UnstableProcessError(
            f"branching ratio {key}={value:.4f} exceeds the configured "
            f"factor {cfg.stability_factor}; the process may explode",
            report=report,
        )


def simulate(cfg: SimConfig) -> Cascade:
    """Draw one cascade; deterministic given the seed.

    The returned cascade is rebased so its first event sits at time zero,
    matching what re-ingesting the emitted event file would produce. The
    horizon is the configured one (so re-running the fit needs the same
    override), shortened only when ``max_events`` stops sampling early.
    """
    if cfg.mode == "hawkes":
        times, users = _simulate_hawkes(cfg)
    elif cfg.mode in ("simple", "complex"):
        times, users = _simulate_contagion(cfg)
    else:
        raise ValueError(f"unknown simulation mode {cfg.mode!r}")
    if not times:
        return Cascade(cfg.word, (), np.empty(0), horizon=cfg.horizon)
    t0 = times[0]
    horizon = (times[-1] if cfg.max_events and len(times) >= cfg.max_events else cfg.horizon) - t0
    return Cascade(
        cfg.word,
        tuple(users),
        np.asarray(times) - t0,
        horizon=horizon,
        origin_hours=0.0,
    )


def _simulate_hawkes(cfg: SimConfig) -> tuple[list[float], list[str]]:
    _check_stability(cfg)
    rng = np.random.default_rng(cfg.seed)
    g = cfg.graph
    ctx = cfg.context()
    decay = cfg.kernel.decay
    n = g.n_users
    ids = g.users

    mu = np.full(n, float(cfg.base_rate))
    mu_tot = float(mu.sum())
    cum_mu = np.cumsum(mu)
    jumps = _total_jumps(cfg, ctx)
    offspring_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    weights = np.asarray(cfg.weights, dtype=np.float64)
    feats = cfg.spec.features
    w_self = weights[feats.index("self")] if "self" in feats else 0.0
    w_reply = weights[feats.index("reply")] if "reply" in feats else 0.0
    w_strong = weights[feats.index("strong")] if "strong" in feats else 0.0
    w_local = weights[feats.index("local")] if "local" in feats else 0.0

    def offspring(src: int) -> tuple[np.ndarray, np.ndarray]:
        cached = offspring_cache.get(src)
        if cached is None:
            nbrs = g.neighbor_array(src)
            w = np.full(len(nbrs), w_reply)
            if w_strong:
                strong = set(ctx.strong_neighbors(src).tolist())
                w += np.array([w_strong if int(v) in strong else 0.0 for v in nbrs])
            if w_local:
                w += np.array(
                    [w_local if ctx.is_local_idx(src, int(v)) else 0.0 for v in nbrs]
                )
            recips = np.concatenate(([src], nbrs))
            cw = np.cumsum(np.concatenate(([w_self], w)))
            cached = (recips, cw)
            offspring_cache[src] = cached
        return cached

    times: list[float] = []
    users: list[str] = []
    # ring of still-relevant excitation sources: slice [lo:hi) of buffers
    buf_cap = 1024
    buf_t = np.empty(buf_cap)
    buf_j = np.empty(buf_cap)
    buf_src = np.empty(buf_cap, dtype=np.int64)
    lo = hi = 0
    S = 0.0  # decayed sum of active jumps, anchored at t
    t = 0.0
    prune_window = _PRUNE_EFOLDINGS / decay
    cap = cfg.max_events if cfg.max_events is not None else math.inf

    while len(times) < cap:
        bound = mu_tot + S
        if bound <= 0.0:
            break
        t_cand = t + rng.exponential(1.0 / bound)
        if t_cand > cfg.horizon:
            break
        S *= math.exp(-decay * (t_cand - t))
        t = t_cand  # re-anchor; the bound tightens after every candidate
        lam = mu_tot + S
        u = rng.uniform(0.0, bound)
        if u > lam:
            continue  # thinned
        # conditioned on acceptance, u is uniform on [0, lam): reuse it to
        # attribute the event to the base rate or to a triggering event
        if u < mu_tot or lo == hi:
            recipient = int(np.searchsorted(cum_mu, u, side="right"))
            recipient = min(recipient, n - 1)
        else:
            w = buf_j[lo:hi] * np.exp(-decay * (t - buf_t[lo:hi]))
            cw = np.cumsum(w)
            idx = int(np.searchsorted(cw, u - mu_tot, side="right"))
            idx = min(idx, len(cw) - 1)
            src = int(buf_src[lo + idx])
            S = float(cw[-1])  # replace the drift-prone running sum
            recips, cw_r = offspring(src)
            if cw_r[-1] <= 0:
                recipient = src
            else:
                pick = int(np.searchsorted(cw_r, rng.uniform(0.0, cw_r[-1]), side="right"))
                recipient = int(recips[min(pick, len(recips) - 1)])
        times.append(t)
        users.append(ids[recipient])
        j = float(jumps[recipient])
        if j > 0.0:
            if hi == buf_cap:
                keep = hi - lo
                if keep * 2 > buf_cap:
                    buf_cap *= 2
                    nt = np.empty(buf_cap)
                    nj = np.empty(buf_cap)
                    ns = np.empty(buf_cap, dtype=np.int64)
                    nt[:keep] = buf_t[lo:hi]
                    nj[:keep] = buf_j[lo:hi]
                    ns[:keep] = buf_src[lo:hi]
                    buf_t, buf_j, buf_src = nt, nj, ns
                else:
                    buf_t[:keep] = buf_t[lo:hi]
                    buf_j[:keep] = buf_j[lo:hi]
                    buf_src[:keep] = buf_src[lo:hi]
                lo, hi = 0, keep
            buf_t[hi] = t
            buf_j[hi] = j
            buf_src[hi] = recipient
            hi += 1
            S += j
        while lo < hi and t - buf_t[lo] > prune_window:
            lo += 1
    return times, users


def _simulate_contagion(cfg: SimConfig) -> tuple[list[float], list[str]]:
    """First-usage cascade via per-exposure Bernoulli adoption.

    'simple' mode uses a flat per-exposure probability; 'complex' boosts
    it once a user's distinct-exposure count reaches ``threshold_k``.
    Every adopter emits exactly one event, a short random delay after the
    exposure that converted them.
    """
    rng = np.random.default_rng(cfg.seed)
    g = cfg.graph
    n = g.n_users
    ids = g.users

    def prob(k: int) -> float:
        if cfg.mode == "simple":
            return cfg.adopt_prob
        return cfg.adopt_prob if k < cfg.threshold_k else min(1.0, cfg.adopt_prob * cfg.boost)

    heap: list[tuple[float, int]] = []
    if cfg.seed_rate > 0:
        spont = rng.exponential(1.0 / cfg.seed_rate, size=n)
        for u in range(n):
            if spont[u] <= cfg.horizon:
                heapq.heappush(heap, (float(spont[u]), u))

    adopted: dict[int, float] = {}
    n_exposures = np.zeros(n, dtype=np.int64)
    times: list[float] = []
    users: list[str] = []
    while heap:
        t, u = heapq.heappop(heap)
        if u in adopted or t > cfg.horizon:
            continue
        adopted[u] = t
        times.append(t)
        users.append(ids[u])
        for v in sorted(g.neighbor_set(u)):
            if v in adopted:
                continue
            n_exposures[v] += 1
            if rng.random() < prob(int(n_exposures[v])):
                delay = rng.exponential(cfg.delay_hours) + 1e-6
                if t + delay <= cfg.horizon:
                    heapq.heappush(heap, (t + delay, v))
    order = np.argsort(np.asarray(times), kind="stable")
    return [times[k] for k in order], [users[k] for k in order]


# -- synthetic graphs ----------------------------------------------------------


def synth_graph(kind: str, seed: int = 0, **params) -> SocialGraph:
    """Random social graphs with controllable structure.

    kinds: ``erdos-renyi`` (n, edge_prob), ``planted-cities`` (n, cities,
    p_in, p_out) for geographically assortative ties, and
    ``embedded-core`` (n, n_cores, core_size, periphery_prob, cities,
    city_coherence) whose clique cores give a known set of high-
    embeddedness dyads.
    """
    rng = np.random.default_rng(seed)
    if kind == "erdos-renyi":
        return _erdos_renyi(rng, **params)
    if kind == "planted-cities":
        return _planted_cities(rng, **params)
    if kind == "embedded-core":
        return _embedded_core(rng, **params)
    raise ValueError(f"unknown graph kind {kind!r}")


def _pair_decode(codes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map pair codes in [0, n(n-1)/2) to (i, j) with i < j."""
    firsts = np.arange(n, dtype=np.int64)
    cum = firsts * (2 * n - firsts - 1) // 2  # pairs starting before row i
    i = np.searchsorted(cum, codes, side="right") - 1
    j = codes - cum[i] + i + 1
    return i, j


def _sample_pairs(rng, n: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    total = n * (n - 1) // 2
    if total == 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    m = rng.binomial(total, min(p, 1.0))
    if m == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    codes = np.empty(0, dtype=np.int64)
    while len(codes) < m:
        batch = rng.integers(0, total, size=2 * (m - len(codes)) + 16)
        codes = np.unique(np.concatenate([codes, batch]))
    if len(codes) > m:
        codes = codes[np.sort(rng.permutation(len(codes))[:m])]
    return _pair_decode(codes, n)


def _fresh(n: int) -> SocialGraph:
    g = SocialGraph()
    for k in range(n):
        g.add_user(f"u{k}")
    return g


def _erdos_renyi(rng, n: int, edge_prob: float) -> SocialGraph:
    if n < 0 or not 0.0 <= edge_prob <= 1.0:
        raise ValueError("need n >= 0 and edge_prob in [0, 1]")
    g = _fresh(n)
    ii, jj = _sample_pairs(rng, n, edge_prob)
    for i, j in zip(ii, jj):
        g.add_edge(f"u{i}", f"u{j}")
    return g


def _planted_cities(
    rng, n: int, cities: tuple[str, ...], p_in: float, p_out: float
) -> SocialGraph:
    if n < 0 or not cities:
        raise ValueError("need n >= 0 and at least one city")
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ValueError("edge probabilities must lie in [0, 1]")
    g = _fresh(n)
    assignment = rng.integers(0, len(cities), size=n)
    for k in range(n):
        g.set_city(f"u{k}", cities[int(assignment[k])])
    # cross-city pass: global sampling, then drop same-city pairs
    ii, jj = _sample_pairs(rng, n, p_out)
    for i, j in zip(ii, jj):
        if assignment[i] != assignment[j]:
            g.add_edge(f"u{i}", f"u{j}")
    # within-city pass
    for c in range(len(cities)):
        members = np.flatnonzero(assignment == c)
        ii, jj = _sample_pairs(rng, len(members), p_in)
        for i, j in zip(ii, jj):
            g.add_edge(f"u{members[i]}", f"u{members[j]}")
    return g


def _embedded_core(
    rng,
    n: int,
    n_cores: int,
    core_size: int = 4,
    periphery_prob: float = 0.0005,
    cities: tuple[str, ...] = (),
    city_coherence: float = 1.0,
) -> SocialGraph:
    """Disjoint clique cores over the first nodes, sparse ties elsewhere.

    Core members optionally share a city with probability
    ``city_coherence`` (other nodes draw uniformly), so embedded and local
    ties overlap but do not coincide.
    """
    if core_size < 2 or n_cores * core_size > n:
        raise ValueError("cores must fit inside the graph and have size >= 2")
    g = _fresh(n)
    if cities:
        assignment = rng.integers(0, len(cities), size=n)
        for core in range(n_cores):
            base = core * core_size
            home = int(assignment[base])
            for k in range(base, base + core_size):
                if rng.random() < city_coherence:
                    assignment[k] = home
        for k in range(n):
            g.set_city(f"u{k}", cities[int(assignment[k])])
    for core in range(n_cores):
        base = core * core_size
        for a in range(base, base + core_size):
            for b in range(a + 1, base + core_size):
                g.add_edge(f"u{a}", f"u{b}")
    ii, jj = _sample_pairs(rng, n, periphery_prob)
    for i, j in zip(ii, jj):
        g.add_edge(f"u{i}", f"u{j}")
    return g
