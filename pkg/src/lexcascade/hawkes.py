"""Self-exciting intensity model with feature-factored pairwise influence.

The influence an event by user m exerts on user m' is a non-negative
linear function of the dyad's binary features, decayed exponentially in
time. This module evaluates intensities, the exact and the accelerated
log-likelihood, analytic gradients, and fits the weights and per-user base
rates by coordinate ascent under non-negativity constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy.optimize import minimize

from .cascade import Cascade
from .errors import InitializationError
from .features import (
    FEATURES,
    FeatureContext,
    ModelSpec,
    aggregate_vector,
    config_matrix,
    dyad_config,
    enumerate_configs,
    feature_vector,
)
from .graph import SocialGraph

# Floor used only inside the weight-step line search; reported likelihoods
# are never clamped (an exactly zero intensity at an event yields -inf).
_LAMBDA_FLOOR = 1e-12


@dataclass(frozen=True)
class Kernel:
    """Exponential time-decay kernel with an optional truncation horizon.

    ``decay`` is per hour; with the default 1.0 the kernel loses a factor
    of e per hour. ``cutoff`` (hours) only applies where a method says
    "truncated": beyond it the kernel is treated as exactly zero, which at
    the default 24 h discards mass below 4e-11 per term.
    """

    decay: float = 1.0
    cutoff: float | None = 24.0

    def __post_init__(self):
        if self.decay <= 0:
            raise ValueError("decay must be positive")
        if self.cutoff is not None and self.cutoff <= 0:
            raise ValueError("cutoff must be positive (or None to disable)")

    def value(self, dt):
        """kappa(dt) = exp(-decay * dt) for dt >= 0."""
        return np.exp(-self.decay * np.asarray(dt, dtype=np.float64))

    def value_truncated(self, dt):
        dt = np.asarray(dt, dtype=np.float64)
        out = np.exp(-self.decay * dt)
        if self.cutoff is not None:
            out = np.where(dt >= self.cutoff, 0.0, out)
        return out

    def mass(self, dt):
        """Integral of kappa over [0, dt]: (1 - kappa(dt)) / decay."""
        return (1.0 - self.value(dt)) / self.decay

    def mass_truncated(self, dt):
        return (1.0 - self.value_truncated(dt)) / self.decay

    def untruncated(self) -> "Kernel":
        return replace(self, cutoff=None)


@dataclass
class Params:
    """Non-negative feature weights plus sparse per-user base rates.

    Users without an entry in ``base_rates`` have base rate exactly zero;
    only users with at least one event ever get an entry.
    """

    spec: ModelSpec
    weights: np.ndarray
    base_rates: dict[str, float]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.spec.dim,):
            raise ValueError(f"expected {self.spec.dim} weights, got {self.weights.shape}")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and non-negative")
        for u, mu in self.base_rates.items():
            if mu < 0 or not math.isfinite(mu):
                raise ValueError(f"base rate for {u!r} must be finite and non-negative")

    def base_rate(self, user: str) -> float:
        return self.base_rates.get(user, 0.0)

    def influence(self, ctx: FeatureContext, sender: str, recipient: str) -> float:
        """Pairwise influence: weights dotted with the dyad's features."""
        fv = feature_vector(ctx, sender, recipient)
        return float(sum(w * fv[k] for w, k in zip(self.weights, self._feature_slots())))

    def _feature_slots(self) -> tuple[int, ...]:
        return tuple(FEATURES.index(f) for f in self.spec.features)


# -- exact (reference) evaluations ---------------------------------------------


def intensity(
    cascade: Cascade,
    graph: SocialGraph,
    ctx: FeatureContext,
    params: Params,
    kernel: Kernel,
    user: str,
    t: float,
) -> float:
    """Event rate of ``user`` at time t given strictly earlier events."""
    lam = params.base_rate(user)
    for u, tn in zip(cascade.users, cascade.times):
        if tn >= t:
            break
        alpha = params.influence(ctx, u, user)
        if alpha:
            lam += alpha * math.exp(-kernel.decay * (t - tn))
    return lam


def intensity_integral(
    cascade: Cascade,
    graph: SocialGraph,
    ctx: FeatureContext,
    params: Params,
    kernel: Kernel,
    user: str,
    t1: float,
    t2: float,
) -> float:
    """Closed-form integral of the intensity of ``user`` over [t1, t2]."""
    if t2 < t1:
        raise ValueError(f"empty window: t2={t2} < t1={t1}")
    mu = params.base_rate(user)
    total = mu * (t2 - t1) if mu > 0 else 0.0
    g = kernel.decay
    for u, tn in zip(cascade.users, cascade.times):
        if tn >= t2:
            break
        alpha = params.influence(ctx, u, user)
        if not alpha:
            continue
        lo = math.exp(-g * max(t1 - tn, 0.0))
        hi = 0.0 if math.isinf(t2) else math.exp(-g * (t2 - tn))
        total += alpha * (lo - hi) / g
    return total


def loglik_naive(
    cascade: Cascade,
    graph: SocialGraph,
    ctx: FeatureContext,
    params: Params,
    kernel: Kernel,
) -> float:
    """Exact log-likelihood by direct summation; no truncation anywhere.

    The integral term runs over every user in the graph, so users who
    never adopted still push the weights down. Quadratic in events and
    linear in graph size; intended as the oracle for the fast path.
    """
    users = cascade.users
    times = cascade.times
    g = kernel.decay
    T = cascade.horizon

    log_term = 0.0
    for n in range(len(times)):
        lam = params.base_rate(users[n])
        tn = times[n]
        for m in range(n - 1, -1, -1):
            if times[m] >= tn:  # simultaneous events do not interact
                continue
            alpha = params.influence(ctx, users[m], users[n])
            if alpha:
                lam += alpha * math.exp(-g * (tn - times[m]))
        if lam <= 0.0:
            return -math.inf
        log_term += math.log(lam)

    integral = sum(params.base_rates.values()) * T
    for recipient in graph.users:
        for m in range(len(times)):
            alpha = params.influence(ctx, users[m], recipient)
            if alpha:
                integral += alpha * (1.0 - math.exp(-g * (T - times[m]))) / g
    return log_term - integral


# -- precomputed structures for the accelerated path ----------------------------


@dataclass
class Precompute:
    """Everything the fast likelihood needs that does not involve params.

    ``messages[n, c]`` is the decayed count of earlier events whose dyad
    (source -> recipient of event n) fires feature combination c; it is an
    exact recursion (no truncation), computed once per cascade. ``b`` is
    the aggregate-feature integral vector, where the kernel tail beyond
    the cutoff is treated as zero.
    """

    spec: ModelSpec
    kernel: Kernel
    horizon: float
    configs: tuple[frozenset[str], ...]
    config_mat: np.ndarray  # (C, D)
    messages: np.ndarray  # (N, C)
    influence_counts: np.ndarray  # (N, D) = messages @ config_mat
    b: np.ndarray  # (D,)
    param_users: tuple[str, ...]
    event_slot: np.ndarray  # (N,) position of each event's user in param_users
    event_order_by_user: np.ndarray
    slot_bounds: np.ndarray
    counts: np.ndarray  # events per param user
    n_events: int

    @classmethod
    def build(
        cls,
        cascade: Cascade,
        graph: SocialGraph,
        ctx: FeatureContext,
        spec: ModelSpec,
        kernel: Kernel,
    ) -> "Precompute":
        times = cascade.times
        n = len(times)
        uidx = cascade.user_index_array(graph)
        all_configs = enumerate_configs(spec)
        configs = tuple(c for c in all_configs if c)  # the empty combo never contributes
        col_of = {c: k for k, c in enumerate(configs)}
        cmat = config_matrix(spec, configs)
        decay = kernel.decay

        # positions of each user's events, in global time order
        events_of: dict[int, list[int]] = {}
        for pos, u in enumerate(uidx):
            events_of.setdefault(int(u), []).append(pos)

        messages = np.zeros((n, len(configs)))
        for u, own_pos_list in events_of.items():
            own_pos = np.asarray(own_pos_list, dtype=np.int64)
            own_t = times[own_pos]
            # influencing stream: own events plus events of neighbors,
            # tagged with the (source -> u) feature combination
            item_t = [own_t]
            item_c = [np.full(len(own_t), col_of[dyad_config(ctx, spec, u, u)], dtype=np.int64)]
            for v in graph.neighbor_set(u):
                v_pos = events_of.get(int(v))
                if not v_pos:
                    continue
                cfg = dyad_config(ctx, spec, int(v), u)
                if not cfg:
                    continue
                vt = times[np.asarray(v_pos, dtype=np.int64)]
                item_t.append(vt)
                item_c.append(np.full(len(vt), col_of[cfg], dtype=np.int64))
            stream_t = np.concatenate(item_t)
            stream_c = np.concatenate(item_c)
            order = np.argsort(stream_t, kind="stable")
            stream_t = stream_t[order]
            stream_c = stream_c[order]

            upto = np.searchsorted(stream_t, own_t, side="left")  # strict "before"
            acc = np.zeros(len(configs))
            ptr = 0
            prev_t = None
            for k, t_i in enumerate(own_t):
                if prev_t is not None and t_i > prev_t:
                    acc *= math.exp(-decay * (t_i - prev_t))
                end = upto[k]
                if ptr < end:
                    w = np.exp(-decay * (t_i - stream_t[ptr:end]))
                    acc += np.bincount(
                        stream_c[ptr:end], weights=w, minlength=len(configs)
                    )
                    ptr = end
                messages[own_pos[k]] = acc
                prev_t = t_i

        param_users = tuple(sorted({cascade.users[k] for k in range(n)}))
        slot_of = {uid: s for s, uid in enumerate(param_users)}
        event_slot = np.fromiter(
            (slot_of[u] for u in cascade.users), dtype=np.int64, count=n
        )
        counts = np.bincount(event_slot, minlength=len(param_users))
        event_order_by_user = np.argsort(event_slot, kind="stable")
        slot_bounds = np.concatenate(([0], np.cumsum(counts)))

        # aggregate-feature integral vector with the truncated kernel tail
        agg_by_user = {u: aggregate_vector(ctx, u) for u in param_users}
        feat_cols = [FEATURES.index(f) for f in spec.features]
        agg_active = np.stack([agg_by_user[u][feat_cols] for u in param_users])
        tail = kernel.mass_truncated(cascade.horizon - times)  # (N,)
        b = agg_active[event_slot].T @ tail

        return cls(
            spec=spec,
            kernel=kernel,
            horizon=cascade.horizon,
            configs=configs,
            config_mat=cmat,
            messages=messages,
            influence_counts=messages @ cmat,
            b=b,
            param_users=param_users,
            event_slot=event_slot,
            event_order_by_user=event_order_by_user,
            slot_bounds=slot_bounds,
            counts=counts,
            n_events=n,
        )

    def base_rate_vector(self, params: Params) -> np.ndarray:
        return np.array([params.base_rates.get(u, 0.0) for u in self.param_users])


def event_intensities(params: Params, pre: Precompute) -> np.ndarray:
    mu = pre.base_rate_vector(params)
    return mu[pre.event_slot] + pre.influence_counts @ params.weights


def loglik_fast(params: Params, pre: Precompute) -> float:
    """Accelerated log-likelihood via precomputed messages and aggregates.

    Identical to ``loglik_naive`` when the kernel cutoff is None; with a
    finite cutoff the only difference is the discarded kernel tail in the
    integral term, bounded by N * ||weights||_1 * max(1, maxdeg) *
    kappa(cutoff) / decay.
    """
    if params.spec != pre.spec:
        raise ValueError("params were built for a different model spec")
    lam = event_intensities(params, pre)
    if len(lam) and lam.min() <= 0.0:
        return -math.inf
    mu = pre.base_rate_vector(params)
    return float(
        np.log(lam).sum() - pre.horizon * mu.sum() - params.weights @ pre.b
    )


def grad(params: Params, pre: Precompute) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient: (d/dweights, d/dbase_rates over pre.param_users)."""
    lam = event_intensities(params, pre)
    inv = 1.0 / lam
    d_weights = pre.influence_counts.T @ inv - pre.b
    inv_sorted = inv[pre.event_order_by_user]
    sums = np.add.reduceat(inv_sorted, pre.slot_bounds[:-1])
    d_mu = sums - pre.horizon
    return d_weights, d_mu


# -- fitting ---------------------------------------------------------------------


@dataclass(frozen=True)
class FitConfig:
    """Estimation settings; every field has an explicit default so a run
    can be reproduced from its echoed configuration alone."""

    kernel: Kernel = Kernel()
    tol_abs: float = 1e-6
    max_iter: int = 500
    init_weight: float = 1e-4
    tie_percentile: float = 90.0
    aa_threshold: float | None = None
    tracked_cities: frozenset = frozenset()
    freeze_weights: bool = False


@dataclass
class FitResult:
    params: Params
    log_lik: float
    trace: list[float]
    iterations: int
    converged: bool
    spec: ModelSpec
    unidentified: tuple[str, ...] = ()

    @property
    def weights_by_name(self) -> dict[str, float]:
        return {f: float(w) for f, w in zip(self.spec.features, self.params.weights)}


def _optimize_base_rates(
    theta: np.ndarray, pre: Precompute, iters: int = 64
) -> np.ndarray:
    """Exact per-user maximization of the base rates, all users at once.

    Each user's subproblem is 1-D and strictly concave; the root of
    sum(1/(mu + s_n)) - T is bracketed in [0, count/T] and bisected.
    """
    s = pre.influence_counts @ theta
    s_sorted = s[pre.event_order_by_user]
    T = pre.horizon
    starts = pre.slot_bounds[:-1]

    def grad_at(mu: np.ndarray) -> np.ndarray:
        rep = np.repeat(mu, pre.counts)
        return np.add.reduceat(1.0 / (rep + s_sorted), starts) - T

    lo = np.zeros(len(pre.param_users))
    hi = pre.counts / T
    with np.errstate(divide="ignore"):
        g0 = grad_at(lo)
    stuck = g0 <= 0.0  # optimum on the boundary
    hi = np.where(stuck, 0.0, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g = grad_at(mid)
        go_up = g > 0.0
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
    return 0.5 * (lo + hi)


def _optimize_weights(theta: np.ndarray, mu_vec: np.ndarray, pre: Precompute) -> np.ndarray:
    """Bounded quasi-Newton step on the weights block (base rates fixed)."""
    mu_ev = mu_vec[pre.event_slot]
    G = pre.influence_counts
    b = pre.b
    mu_total = pre.horizon * mu_vec.sum()

    def neg(th: np.ndarray):
        lam = mu_ev + G @ th
        lam = np.maximum(lam, _LAMBDA_FLOOR)
        val = np.log(lam).sum() - mu_total - th @ b
        grad_th = G.T @ (1.0 / lam) - b
        return -val, -grad_th

    res = minimize(
        neg,
        theta,
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * len(theta),
        options={"maxiter": 200, "ftol": 1e-14, "gtol": 1e-10},
    )
    return np.maximum(res.x, 0.0)


def fit(
    cascade: Cascade,
    graph: SocialGraph,
    spec: ModelSpec,
    config: FitConfig = FitConfig(),
    context: FeatureContext | None = None,
    precompute: Precompute | None = None,
) -> FitResult:
    """Constrained maximum likelihood by coordinate ascent.

    Alternates a bounded quasi-Newton step on the weights with exact 1-D
    maximizations of every base rate until the likelihood gain drops below
    ``tol_abs`` or the iteration cap. The trace never decreases: a weight
    step is only accepted if it does not lower the objective, and the base
    rate step is an exact block maximization. Deterministic.
    """
    if cascade.n_events == 0:
        raise InitializationError("cannot fit an empty cascade")
    if context is None:
        context = FeatureContext.for_cascade(
            graph,
            cascade,
            tracked_cities=config.tracked_cities,
            tie_percentile=config.tie_percentile,
            aa_threshold=config.aa_threshold,
        )
    pre = precompute or Precompute.build(cascade, graph, context, spec, config.kernel)

    theta = np.full(spec.dim, 0.0 if config.freeze_weights else config.init_weight)
    mu_vec = pre.counts / pre.horizon if pre.horizon > 0 else np.ones(len(pre.param_users))

    def ll_of(th, mv):
        p = Params(
            spec=spec,
            weights=th,
            base_rates={u: float(m) for u, m in zip(pre.param_users, mv)},
        )
        return loglik_fast(p, pre)

    ll = ll_of(theta, mu_vec)
    if not math.isfinite(ll):
        raise InitializationError("non-finite log-likelihood at the initial point")
    trace = [ll]
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        if not config.freeze_weights:
            cand = _optimize_weights(theta, mu_vec, pre)
            if ll_of(cand, mu_vec) >= ll:
                theta = cand
        mu_vec = _optimize_base_rates(theta, pre)
        new_ll = ll_of(theta, mu_vec)
        trace.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if abs(gain) < config.tol_abs:
            converged = True
            break

    # weights whose feature never fires anywhere in this cascade are flat
    # directions of the likelihood; pin them to zero and report them
    dead = (np.abs(pre.influence_counts).sum(axis=0) == 0.0) & (pre.b == 0.0)
    unidentified = tuple(f for f, d in zip(spec.features, dead) if d)
    if dead.any():
        theta = np.where(dead, 0.0, theta)
        ll = ll_of(theta, mu_vec)

    params = Params(
        spec=spec,
        weights=theta,
        base_rates={u: float(m) for u, m in zip(pre.param_users, mu_vec)},
    )
    return FitResult(
        params=params,
        log_lik=ll,
        trace=trace,
        iterations=iterations,
        converged=converged,
        spec=spec,
        unidentified=unidentified,
    )


# -- diagnostics -----------------------------------------------------------------


def rescaled_intervals(
    cascade: Cascade,
    ctx: FeatureContext,
    params: Params,
    kernel: Kernel,
) -> np.ndarray:
    """Total-process compensator increments between consecutive events.

    Under the true parameters these are iid unit-rate exponentials, which
    makes them a goodness-of-fit diagnostic.
    """
    g = kernel.decay
    feat_cols = [FEATURES.index(f) for f in params.spec.features]
    mu_total = sum(params.base_rates.values())
    jumps = {}
    out = np.empty(cascade.n_events)
    acc = 0.0  # decayed sum of per-event total jumps, anchored at prev_t
    prev_t = 0.0
    for n, (u, t) in enumerate(zip(cascade.users, cascade.times)):
        dt = float(t) - prev_t
        decayf = math.exp(-g * dt)
        out[n] = mu_total * dt + acc * (1.0 - decayf) / g
        acc *= decayf
        j = jumps.get(u)
        if j is None:
            j = float(aggregate_vector(ctx, u)[feat_cols] @ params.weights)
            jumps[u] = j
        acc += j
        prev_t = float(t)
    return out
