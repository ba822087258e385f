"""Shared fixtures and independent oracles used across the test suite."""

import math

import numpy as np
import pytest

from lexcascade import Cascade, FeatureContext, ModelSpec, Params, SocialGraph
from lexcascade.features import FEATURES, feature_vector
from lexcascade.simulate import synth_graph


def triangle_graph():
    g = SocialGraph()
    g.add_edge("a", "b")
    g.add_edge("b", "c")
    g.add_edge("a", "c")
    return g


def path_graph():
    g = SocialGraph()
    g.add_edge("a", "b")
    g.add_edge("b", "c")
    return g


def brute_force_adamic_adar(g: SocialGraph, a: str, b: str) -> float:
    """Triple loop over all users; no set intersections."""
    total = 0.0
    for k in g.users:
        if k in (a, b):
            continue
        if g.has_edge(a, k) and g.has_edge(b, k):
            total += 1.0 / math.log(g.degree(k))
    return total


def random_labeled_graph(rng, n=25, p=0.15, cities=("A", "B", "C")):
    seed = int(rng.integers(0, 2**31))
    g = synth_graph("erdos-renyi", seed=seed, n=n, edge_prob=p)
    for k in range(n):
        if rng.random() < 0.8:
            g.set_city(f"u{k}", cities[int(rng.integers(0, len(cities)))])
    return g


def random_instance(rng, n_users=20, n_events=40, horizon=None, mu_floor=0.05):
    """Graph + cascade + feasible params, for likelihood/gradient checks."""
    g = random_labeled_graph(rng, n=n_users, p=min(0.2, 4.0 / max(n_users, 1)))
    horizon = horizon or float(rng.uniform(20, 60))
    users = tuple(f"u{rng.integers(0, n_users)}" for _ in range(n_events))
    times = np.sort(rng.uniform(0, horizon, n_events))
    cascade = Cascade("w", users, times, horizon=horizon)
    ctx = FeatureContext.for_cascade(g, cascade, tracked_cities=("A", "B"))
    spec = ModelSpec(FEATURES)
    params = Params(
        spec,
        rng.uniform(0.02, 0.4, spec.dim),
        {u: float(rng.uniform(mu_floor, 0.6)) for u in set(users)},
    )
    return g, cascade, ctx, spec, params


def quad_intensity_integral(cascade, graph, ctx, params, kernel, user, t1, t2, rtol=1e-10):
    """Adaptive-quadrature oracle for the intensity integral, piecewise
    between event times so the integrand is smooth on every panel."""
    from scipy.integrate import quad

    from lexcascade.hawkes import intensity

    knots = sorted({t1, t2, *[float(t) for t in cascade.times if t1 < t < t2]})
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        val, _ = quad(
            lambda t: intensity(cascade, graph, ctx, params, kernel, user, t),
            lo,
            hi,
            epsabs=1e-12,
            epsrel=rtol,
            limit=200,
        )
        total += val
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
