"""Undirected social graph: storage, tie embeddedness, descriptive statistics.

The graph is append-only: build it from files (or a generator), then treat
it as read-only while cascades are analysed. All query methods are pure,
so any number of workers may read the same instance concurrently.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Iterator

import numpy as np

from .errors import InsufficientDataError, ParseError, UnknownUserError

# Edges with no recorded formation time are treated as having always
# existed, so they qualify for every exposure window.
ALWAYS_FORMED = float("-inf")

SECONDS_PER_HOUR = 3600.0


class SocialGraph:
    """Mutual-tie graph over opaque user ids.

    Edges are undirected, never loop, and may carry a formation time in
    absolute hours (epoch seconds / 3600). Users that appear in event
    streams but not in the edge list are added as isolated nodes so they
    still count as potential adopters.
    """

    __slots__ = ("_index", "_ids", "_adj", "_formed", "_city", "_nbr_arrays")

    def __init__(self) -> None:
        self._index: dict[str, int] = {}
        self._ids: list[str] = []
        self._adj: list[set[int]] = []
        self._formed: dict[tuple[int, int], float] = {}
        self._city: dict[int, str] = {}
        self._nbr_arrays: dict[int, np.ndarray] = {}

    # -- construction ------------------------------------------------------

    def add_user(self, user: str) -> int:
        """Insert a node if absent; return its dense index."""
        idx = self._index.get(user)
        if idx is None:
            idx = len(self._ids)
            self._index[user] = idx
            self._ids.append(user)
            self._adj.append(set())
        return idx

    def add_edge(self, a: str, b: str, formed_at_hours: float | None = None) -> None:
        """Insert an undirected edge; keeps the earliest formation time seen.

        A mention without a formation time means "formed at an unknown,
        arbitrarily early point", which dominates any recorded time.
        """
        if a == b:
            raise ValueError(f"self-loop not allowed: {a!r}")
        if formed_at_hours is not None and (
            not math.isfinite(formed_at_hours) or formed_at_hours < 0
        ):
            raise ValueError(
                f"formation time must be finite and non-negative, got {formed_at_hours!r}"
            )
        i, j = self.add_user(a), self.add_user(b)
        key = (i, j) if i < j else (j, i)
        is_new = j not in self._adj[i]
        self._adj[i].add(j)
        self._adj[j].add(i)
        if formed_at_hours is None:
            self._formed.pop(key, None)
        elif is_new:
            self._formed[key] = formed_at_hours
        elif key in self._formed:
            self._formed[key] = min(self._formed[key], formed_at_hours)
        self._nbr_arrays.clear()

    def set_city(self, user: str, city: str) -> None:
        self._city[self.add_user(user)] = city

    # -- queries -----------------------------------------------------------

    def __contains__(self, user: str) -> bool:
        return user in self._index

    @property
    def n_users(self) -> int:
        return len(self._ids)

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self._adj) // 2

    @property
    def users(self) -> tuple[str, ...]:
        return tuple(self._ids)

    def index_of(self, user: str) -> int:
        try:
            return self._index[user]
        except KeyError:
            raise UnknownUserError(user) from None

    def id_of(self, idx: int) -> str:
        return self._ids[idx]

    def degree(self, user: str) -> int:
        return len(self._adj[self.index_of(user)])

    def neighbors(self, user: str) -> tuple[str, ...]:
        return tuple(self._ids[j] for j in sorted(self._adj[self.index_of(user)]))

    def neighbor_set(self, idx: int) -> set[int]:
        return self._adj[idx]

    def neighbor_array(self, idx: int) -> np.ndarray:
        arr = self._nbr_arrays.get(idx)
        if arr is None:
            arr = np.fromiter(sorted(self._adj[idx]), dtype=np.int64)
            self._nbr_arrays[idx] = arr
        return arr

    def has_edge(self, a: str, b: str) -> bool:
        i, j = self.index_of(a), self.index_of(b)
        return j in self._adj[i]

    def has_edge_idx(self, i: int, j: int) -> bool:
        return j in self._adj[i]

    def formed_at_hours(self, a: str, b: str) -> float:
        """Formation time of an existing edge; -inf when unrecorded."""
        i, j = self.index_of(a), self.index_of(b)
        if j not in self._adj[i]:
            raise ValueError(f"no edge between {a!r} and {b!r}")
        return self.formed_at_idx(i, j)

    def formed_at_idx(self, i: int, j: int) -> float:
        key = (i, j) if i < j else (j, i)
        return self._formed.get(key, ALWAYS_FORMED)

    def edges(self) -> Iterator[tuple[str, str]]:
        """Yield each undirected edge once, endpoints in index order."""
        for i, nbrs in enumerate(self._adj):
            for j in sorted(nbrs):
                if i < j:
                    yield self._ids[i], self._ids[j]

    def edge_index_pairs(self) -> Iterator[tuple[int, int]]:
        for i, nbrs in enumerate(self._adj):
            for j in nbrs:
                if i < j:
                    yield i, j

    def city_of(self, user: str) -> str | None:
        return self._city.get(self.index_of(user))

    def city_of_idx(self, idx: int) -> str | None:
        return self._city.get(idx)


# -- file loading ------------------------------------------------------------


def load_edges(path) -> SocialGraph:
    """Read an edge list: ``user_a<TAB>user_b[<TAB>formed_at_epoch_seconds]``.

    Lines starting with ``#`` and blank lines are skipped. Malformed lines
    raise :class:`ParseError` with the offending line number.
    """
    g = SocialGraph()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(path, line_no, f"expected 2 or 3 fields, got {len(parts)}")
            a, b = parts[0], parts[1]
            formed = None
            if len(parts) == 3 and parts[2] != "":
                try:
                    formed = float(parts[2]) / SECONDS_PER_HOUR
                except ValueError:
                    raise ParseError(path, line_no, f"bad formation time {parts[2]!r}") from None
            try:
                g.add_edge(a, b, formed)
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from None
    return g


def write_edges(path, graph: SocialGraph) -> None:
    """Write the edge list in the same format ``load_edges`` reads."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# user_a\tuser_b\tformed_at_epoch_seconds\n")
        for a, b in graph.edges():
            formed = graph.formed_at_hours(a, b)
            if formed == ALWAYS_FORMED:
                fh.write(f"{a}\t{b}\n")
            else:
                fh.write(f"{a}\t{b}\t{formed * SECONDS_PER_HOUR!r}\n")


def write_cities(path, graph: SocialGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# user_id\tcity_label\n")
        for user in graph.users:
            city = graph.city_of(user)
            if city is not None:
                fh.write(f"{user}\t{city}\n")


def load_cities(path, graph: SocialGraph) -> int:
    """Read ``user_id<TAB>city_label`` lines into the graph; returns count."""
    n = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(path, line_no, f"expected 2 fields, got {len(parts)}")
            graph.set_city(parts[0], parts[1])
            n += 1
    return n


# -- metrics -----------------------------------------------------------------


def adamic_adar(g: SocialGraph, a: str, b: str) -> float:
    """Embeddedness of a dyad: sum of 1/ln(degree) over common neighbors.

    Common neighbors necessarily have degree >= 2, so every term is finite
    and positive. Returns 0.0 when the two users share no neighbors.
    """
    if a == b:
        raise ValueError("adamic_adar is undefined for a self-dyad")
    i, j = g.index_of(a), g.index_of(b)
    return _adamic_adar_idx(g, i, j)


def _adamic_adar_idx(g: SocialGraph, i: int, j: int) -> float:
    common = g.neighbor_set(i) & g.neighbor_set(j)
    return sum(1.0 / math.log(len(g.neighbor_set(k))) for k in common)


def tie_strength_threshold(
    g: SocialGraph, dyads: Iterable[tuple[str, str]], percentile: float = 90.0
) -> float:
    """Nearest-rank percentile of Adamic-Adar values over the given dyads.

    rank = ceil(percentile/100 * n) over the ascending sorted values; no
    interpolation, so the result is always an attained value.
    """
    if not 0.0 < percentile < 100.0:
        raise ValueError(f"percentile must lie in (0, 100), got {percentile}")
    values = sorted(adamic_adar(g, a, b) for a, b in dyads)
    if not values:
        raise InsufficientDataError("empty dyad set: no tie-strength threshold")
    rank = int(math.ceil(percentile * len(values) / 100.0))
    rank = min(max(rank, 1), len(values))
    return values[rank - 1]


def degree_distribution(g: SocialGraph) -> dict[int, int]:
    """Histogram degree -> node count; totals to the number of nodes."""
    return dict(Counter(len(s) for s in g._adj))


def geo_assortativity(g: SocialGraph, tracked_cities: Iterable[str] | None = None) -> float:
    """Fraction of fully tracked-city-labeled edges whose labels match.

    Only edges whose both endpoints carry a tracked city label qualify.
    With ``tracked_cities=None`` every label counts as tracked.
    """
    tracked = None if tracked_cities is None else set(tracked_cities)
    qualifying = 0
    same = 0
    for i, j in g.edge_index_pairs():
        ci, cj = g.city_of_idx(i), g.city_of_idx(j)
        if ci is None or cj is None:
            continue
        if tracked is not None and (ci not in tracked or cj not in tracked):
            continue
        qualifying += 1
        if ci == cj:
            same += 1
    if qualifying == 0:
        raise InsufficientDataError("no edges with both endpoints in tracked cities")
    return same / qualifying
