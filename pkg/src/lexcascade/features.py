"""Binary dyad features for the influence model, and their aggregates.

Four features describe a sender -> recipient pair: ``self`` (same user),
``reply`` (mutual-tie edge), ``strong`` (edge with Adamic-Adar at or above
the word's threshold), and ``local`` (edge between users sharing a tracked
city). ``strong`` and ``local`` only ever fire on edges, and ``self`` fires
alone, so only six on/off combinations are realizable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import InsufficientDataError
from .graph import SocialGraph, _adamic_adar_idx, tie_strength_threshold

if TYPE_CHECKING:
    from .cascade import Cascade

SELF = "self"
REPLY = "reply"
STRONG = "strong"
LOCAL = "local"
FEATURES = (SELF, REPLY, STRONG, LOCAL)

_ORDER = {name: k for k, name in enumerate(FEATURES)}


@dataclass(frozen=True)
class ModelSpec:
    """Active feature subset of a model. ``self`` and ``reply`` are the
    baseline and must always be present; each extra feature adds exactly
    one weight."""

    features: tuple[str, ...] = (SELF, REPLY)

    def __post_init__(self):
        feats = tuple(sorted(set(self.features), key=_ORDER.get))
        unknown = [f for f in feats if f not in FEATURES]
        if unknown:
            raise ValueError(f"unknown features: {unknown}")
        if SELF not in feats or REPLY not in feats:
            raise ValueError("a model spec must include the 'self' and 'reply' features")
        object.__setattr__(self, "features", feats)

    @property
    def dim(self) -> int:
        return len(self.features)

    def index(self, name: str) -> int:
        return self.features.index(name)

    def with_feature(self, name: str) -> "ModelSpec":
        if name in self.features:
            raise ValueError(f"feature {name!r} already active")
        return ModelSpec(self.features + (name,))

    def label(self) -> str:
        return "+".join(self.features)


class FeatureContext:
    """Frozen per-word context needed to evaluate dyad features.

    Carries the graph, the tracked-city set, the word's tie-strength
    threshold (None disables the ``strong`` feature), and the set of users
    with at least one event. Feature values are time-invariant within a
    cascade, so everything here is computed once before estimation.
    """

    def __init__(
        self,
        graph: SocialGraph,
        tracked_cities: Iterable[str] = (),
        aa_threshold: float | None = None,
        event_users: Iterable[str] = (),
        pool_size: int = 0,
    ):
        self.graph = graph
        self.tracked_cities = frozenset(tracked_cities)
        self.aa_threshold = aa_threshold
        self.event_users = frozenset(event_users)
        self.pool_size = pool_size
        self._strong_cache: dict[int, np.ndarray] = {}

    @classmethod
    def for_cascade(
        cls,
        graph: SocialGraph,
        cascade: "Cascade",
        tracked_cities: Iterable[str] = (),
        tie_percentile: float = 90.0,
        aa_threshold: float | None = None,
    ) -> "FeatureContext":
        """Build the context for one word's cascade.

        The tie-strength threshold is the ``tie_percentile`` nearest-rank
        Adamic-Adar value over all edges with at least one adopter
        endpoint, unless an explicit ``aa_threshold`` override is given.
        """
        adopters = set(cascade.users)
        pool = [
            (a, b)
            for a, b in graph.edges()
            if a in adopters or b in adopters
        ]
        threshold = aa_threshold
        if threshold is None:
            try:
                threshold = tie_strength_threshold(graph, pool, tie_percentile)
            except InsufficientDataError:
                threshold = None
        return cls(
            graph,
            tracked_cities=tracked_cities,
            aa_threshold=threshold,
            event_users=set(cascade.users),
            pool_size=len(pool),
        )

    # -- per-dyad flags ------------------------------------------------------

    def is_strong_idx(self, i: int, j: int) -> bool:
        if self.aa_threshold is None or not self.graph.has_edge_idx(i, j):
            return False
        return _adamic_adar_idx(self.graph, i, j) >= self.aa_threshold

    def is_local_idx(self, i: int, j: int) -> bool:
        if not self.graph.has_edge_idx(i, j):
            return False
        ci = self.graph.city_of_idx(i)
        if ci is None or ci not in self.tracked_cities:
            return False
        return self.graph.city_of_idx(j) == ci

    def strong_neighbors(self, i: int) -> np.ndarray:
        """Indices of i's neighbors across strong ties (cached)."""
        arr = self._strong_cache.get(i)
        if arr is None:
            if self.aa_threshold is None:
                arr = np.empty(0, dtype=np.int64)
            else:
                nbrs = self.graph.neighbor_array(i)
                arr = nbrs[
                    [
                        _adamic_adar_idx(self.graph, i, int(j)) >= self.aa_threshold
                        for j in nbrs
                    ]
                ]
            self._strong_cache[i] = arr
        return arr


def feature_vector(ctx: FeatureContext, sender: str, recipient: str) -> tuple[int, int, int, int]:
    """Binary feature 4-vector (self, reply, strong, local) for one dyad."""
    g = ctx.graph
    i, j = g.index_of(sender), g.index_of(recipient)
    if i == j:
        return (1, 0, 0, 0)
    if not g.has_edge_idx(i, j):
        return (0, 0, 0, 0)
    return (0, 1, int(ctx.is_strong_idx(i, j)), int(ctx.is_local_idx(i, j)))


def aggregate_vector(ctx: FeatureContext, sender: str) -> np.ndarray:
    """Column sums of the sender's feature vectors over all recipients.

    Equals (1, degree, #strong neighbors, #co-city tracked neighbors);
    exact integer counts returned as float64 for downstream algebra.
    """
    g = ctx.graph
    i = g.index_of(sender)
    nbrs = g.neighbor_array(i)
    n_strong = len(ctx.strong_neighbors(i))
    ci = g.city_of_idx(i)
    if ci is not None and ci in ctx.tracked_cities:
        n_local = sum(1 for j in nbrs if g.city_of_idx(int(j)) == ci)
    else:
        n_local = 0
    return np.array([1.0, float(len(nbrs)), float(n_strong), float(n_local)])


def aggregate_features(ctx: FeatureContext) -> dict[str, np.ndarray]:
    """Aggregate vectors for every user with at least one event."""
    return {u: aggregate_vector(ctx, u) for u in sorted(ctx.event_users)}


def enumerate_configs(spec: ModelSpec) -> tuple[frozenset[str], ...]:
    """Realizable feature on/off combinations among the spec's features.

    Constraints: ``self`` excludes everything else; ``strong`` and
    ``local`` each require ``reply``. The empty combination is included.
    With all four features active there are exactly six combinations.
    """
    feats = spec.features
    combos = chain.from_iterable(combinations(feats, r) for r in range(len(feats) + 1))
    out = []
    for combo in combos:
        c = frozenset(combo)
        if SELF in c and len(c) > 1:
            continue
        if (STRONG in c or LOCAL in c) and REPLY not in c:
            continue
        out.append(c)
    out.sort(key=lambda c: (len(c), tuple(sorted(_ORDER[f] for f in c))))
    return tuple(out)


def config_matrix(spec: ModelSpec, configs: tuple[frozenset[str], ...]) -> np.ndarray:
    """Indicator matrix (config x active feature)."""
    mat = np.zeros((len(configs), spec.dim))
    for r, c in enumerate(configs):
        for f in c:
            mat[r, spec.index(f)] = 1.0
    return mat


def dyad_config(ctx: FeatureContext, spec: ModelSpec, i: int, j: int) -> frozenset[str]:
    """Active-feature combination firing on the (i -> j) dyad (by index)."""
    if i == j:
        return frozenset((SELF,)) if SELF in spec.features else frozenset()
    if not ctx.graph.has_edge_idx(i, j):
        return frozenset()
    fired = []
    if REPLY in spec.features:
        fired.append(REPLY)
    if STRONG in spec.features and ctx.is_strong_idx(i, j):
        fired.append(STRONG)
    if LOCAL in spec.features and ctx.is_local_idx(i, j):
        fired.append(LOCAL)
    return frozenset(fired)
