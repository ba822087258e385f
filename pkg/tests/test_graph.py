import math

import numpy as np
import pytest

from lexcascade import (
    InsufficientDataError,
    ParseError,
    SocialGraph,
    UnknownUserError,
    adamic_adar,
    degree_distribution,
    geo_assortativity,
    load_cities,
    load_edges,
    tie_strength_threshold,
    write_edges,
)
from lexcascade.graph import ALWAYS_FORMED

from conftest import brute_force_adamic_adar, path_graph, random_labeled_graph, triangle_graph


class TestAdamicAdar:
    def test_no_common_neighbors(self):
        g = SocialGraph()
        g.add_edge("a", "b")
        g.add_edge("c", "d")
        assert adamic_adar(g, "a", "c") == 0.0

    def test_hand_built_degrees_two_and_four(self):
        # common neighbors of (a, b): k1 with degree 2, k2 with degree 4
        g = SocialGraph()
        g.add_edge("a", "k1")
        g.add_edge("b", "k1")
        g.add_edge("a", "k2")
        g.add_edge("b", "k2")
        g.add_edge("k2", "x")
        g.add_edge("k2", "y")
        expected = 1 / math.log(2) + 1 / math.log(4)
        assert adamic_adar(g, "a", "b") == pytest.approx(2.164042561333445)
        assert adamic_adar(g, "a", "b") == pytest.approx(expected)
        assert adamic_adar(g, "a", "b") == pytest.approx(brute_force_adamic_adar(g, "a", "b"))

    def test_path_graph(self):
        g = path_graph()
        assert adamic_adar(g, "a", "c") == pytest.approx(1 / math.log(2))
        assert adamic_adar(g, "a", "c") == pytest.approx(1.4426950408889634)

    def test_symmetry_and_brute_force(self, rng):
        g = random_labeled_graph(rng, n=30, p=0.2)
        users = g.users
        for _ in range(50):
            a, b = (users[int(k)] for k in rng.choice(len(users), 2, replace=False))
            val = adamic_adar(g, a, b)
            assert val == adamic_adar(g, b, a)  # exact, same sum
            assert val == pytest.approx(brute_force_adamic_adar(g, a, b))

    def test_remote_edge_leaves_value_unchanged(self):
        g = SocialGraph()
        g.add_edge("a", "k")
        g.add_edge("b", "k")
        g.add_edge("p", "q")
        before = adamic_adar(g, "a", "b")
        g.add_edge("p", "r")  # touches neither a, b, nor k
        assert adamic_adar(g, "a", "b") == before

    def test_errors(self):
        g = path_graph()
        with pytest.raises(UnknownUserError):
            adamic_adar(g, "a", "zzz")
        with pytest.raises(ValueError):
            adamic_adar(g, "a", "a")


class TestTieStrengthThreshold:
    def test_nearest_rank_on_integers(self):
        # ten dyads engineered to have AA values 1..10 via star hubs is
        # overkill; drive the rank logic through a stub graph instead
        g = SocialGraph()
        hubs = []
        for v in range(1, 11):
            # dyad (x_v, y_v) with v common neighbors of degree 2 gives
            # AA = v / ln 2; ordering matches v so ranks are unambiguous
            for c in range(v):
                g.add_edge(f"x{v}", f"h{v}_{c}")
                g.add_edge(f"y{v}", f"h{v}_{c}")
            hubs.append((f"x{v}", f"y{v}"))
        got = tie_strength_threshold(g, hubs, 90.0)
        assert got == pytest.approx(9 / math.log(2))

    def test_single_dyad_any_percentile(self):
        g = path_graph()
        for pct in (1.0, 50.0, 99.9):
            assert tie_strength_threshold(g, [("a", "c")], pct) == pytest.approx(
                1 / math.log(2)
            )

    def test_matches_sort_oracle(self, rng):
        g = random_labeled_graph(rng, n=25, p=0.25)
        users = g.users
        dyads = []
        while len(dyads) < 20:
            a, b = (users[int(k)] for k in rng.choice(len(users), 2, replace=False))
            dyads.append((a, b))
        for pct in (10.0, 50.0, 90.0, 99.0):
            values = sorted(adamic_adar(g, a, b) for a, b in dyads)
            rank = math.ceil(pct * len(values) / 100.0)
            assert tie_strength_threshold(g, dyads, pct) == values[rank - 1]

    def test_monotone_in_percentile(self, rng):
        g = random_labeled_graph(rng, n=25, p=0.25)
        users = g.users
        dyads = [
            tuple(users[int(k)] for k in rng.choice(len(users), 2, replace=False))
            for _ in range(15)
        ]
        pcts = np.linspace(5, 95, 10)
        vals = [tie_strength_threshold(g, dyads, p) for p in pcts]
        assert all(v2 >= v1 for v1, v2 in zip(vals, vals[1:]))

    def test_empty_dyads(self):
        with pytest.raises(InsufficientDataError):
            tie_strength_threshold(path_graph(), [], 90.0)

    def test_bad_percentile(self):
        with pytest.raises(ValueError):
            tie_strength_threshold(path_graph(), [("a", "c")], 0.0)
        with pytest.raises(ValueError):
            tie_strength_threshold(path_graph(), [("a", "c")], 100.0)


class TestDegreeDistribution:
    def test_empty(self):
        assert degree_distribution(SocialGraph()) == {}

    def test_triangle(self):
        assert degree_distribution(triangle_graph()) == {2: 3}

    def test_matches_recount_and_totals(self, rng):
        g = random_labeled_graph(rng, n=40, p=0.1)
        hist = degree_distribution(g)
        assert sum(hist.values()) == g.n_users
        recount = {}
        for u in g.users:
            d = len(g.neighbors(u))
            recount[d] = recount.get(d, 0) + 1
        assert hist == recount


class TestGeoAssortativity:
    def test_all_within_one_city(self):
        g = triangle_graph()
        for u in "abc":
            g.set_city(u, "X")
        assert geo_assortativity(g, ["X"]) == 1.0

    def test_two_cities_one_edge(self):
        g = SocialGraph()
        g.add_edge("a", "b")
        g.set_city("a", "X")
        g.set_city("b", "Y")
        assert geo_assortativity(g, ["X", "Y"]) == 0.0

    def test_matches_exhaustive_scan(self, rng):
        g = random_labeled_graph(rng, n=40, p=0.15)
        tracked = {"A", "B"}
        same = total = 0
        for a, b in g.edges():
            ca, cb = g.city_of(a), g.city_of(b)
            if ca in tracked and cb in tracked:
                total += 1
                same += ca == cb
        if total == 0:
            pytest.skip("no qualifying edges in this draw")
        assert geo_assortativity(g, tracked) == pytest.approx(same / total)

    def test_untracked_labels_do_not_qualify(self):
        g = SocialGraph()
        g.add_edge("a", "b")
        g.set_city("a", "X")
        g.set_city("b", "X")
        with pytest.raises(InsufficientDataError):
            geo_assortativity(g, ["Y"])


class TestFiles:
    def test_edge_roundtrip(self, tmp_path):
        path = tmp_path / "edges.tsv"
        path.write_text(
            "# comment\n"
            "a\tb\t7200\n"
            "b\tc\n"
            "\n"
            "c\td\t3600\n",
            encoding="utf-8",
        )
        g = load_edges(path)
        assert g.n_edges == 3
        assert g.formed_at_hours("a", "b") == pytest.approx(2.0)
        assert g.formed_at_hours("b", "c") == ALWAYS_FORMED
        out = tmp_path / "roundtrip.tsv"
        write_edges(out, g)
        g2 = load_edges(out)
        assert set(g2.edges()) == set(g.edges())
        assert g2.formed_at_hours("a", "b") == pytest.approx(2.0)

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "edges.tsv"
        path.write_text("a\tb\nbad line without tabs\n", encoding="utf-8")
        with pytest.raises(ParseError) as err:
            load_edges(path)
        assert err.value.line_no == 2

    def test_self_loop_rejected(self, tmp_path):
        path = tmp_path / "edges.tsv"
        path.write_text("a\ta\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_edges(path)

    def test_city_file(self, tmp_path):
        path = tmp_path / "cities.tsv"
        path.write_text("a\tX\nb\tY\n", encoding="utf-8")
        g = path_graph()
        assert load_cities(path, g) == 2
        assert g.city_of("a") == "X"

    def test_duplicate_edge_keeps_earliest_formation(self, tmp_path):
        path = tmp_path / "edges.tsv"
        path.write_text("a\tb\t7200\na\tb\t3600\n", encoding="utf-8")
        g = load_edges(path)
        assert g.formed_at_hours("a", "b") == pytest.approx(1.0)
