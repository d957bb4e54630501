import numpy as np
import pytest

from resgcn.errors import CapacityError, ConfigError
from resgcn.graph import AttributedGraph
from resgcn.inject import InjectionSpec, inject_attribute, inject_benchmark, inject_structural
from resgcn.synthetic import random_graph, sbm_graph


def edge_set(g):
    return {tuple(e) for e in g.edges().tolist()}


@pytest.fixture
def g200():
    return random_graph(200, 800, 6, np.random.default_rng(7))


class TestStructural:
    def test_two_node_clique_on_empty_graph(self):
        g = AttributedGraph.from_edges(5, [], np.zeros((5, 1)))
        g2, groups = inject_structural(g, 2, 1, np.random.default_rng(0))
        assert g2.m == 1
        assert groups.shape == (1, 2)

    def test_complete_graph_gains_nothing(self):
        g = AttributedGraph.from_edges(10, [(i, j) for i in range(10) for j in range(i + 1, 10)], np.zeros((10, 1)))
        g2, groups = inject_structural(g, 3, 2, np.random.default_rng(0))
        assert g2.m == g.m
        assert groups.size == 6 and len(set(groups.ravel())) == 6

    def test_edge_diff_is_exactly_clique_edges(self, g200):
        g2, groups = inject_structural(g200, 5, 4, np.random.default_rng(1))
        clique_edges = {tuple(sorted((int(a), int(b)))) for grp in groups for a in grp for b in grp if a < b}
        assert edge_set(g2) - edge_set(g200) == clique_edges - edge_set(g200)
        assert edge_set(g200) <= edge_set(g2)
        for grp in groups:
            sub = g2.adjacency[grp][:, grp].toarray()
            np.testing.assert_array_equal(sub, 1 - np.eye(5))

    def test_capacity(self):
        g = AttributedGraph.from_edges(5, [], np.zeros((5, 1)))
        with pytest.raises(CapacityError):
            inject_structural(g, 3, 2, np.random.default_rng(0))

    def test_full_scale_count(self):
        # s=15, t=10 -> 150 structural anomalies
        g = random_graph(500, 1500, 4, np.random.default_rng(3))
        _, groups = inject_structural(g, 15, 10, np.random.default_rng(0))
        assert len(set(groups.ravel().tolist())) == 150


class TestAttribute:
    def test_identical_attributes_change_nothing(self):
        g = AttributedGraph.from_edges(10, [(0, 1)], np.ones((10, 3)))
        g2, nodes, _ = inject_attribute(g, 2, 2, 3, np.random.default_rng(0))
        np.testing.assert_array_equal(g2.attributes, g.attributes)
        assert len(set(nodes.tolist())) == 4

    def test_farthest_candidate_is_donor(self):
        g = AttributedGraph.from_edges(3, [], np.array([[0.0], [1.0], [10.0]]))
        # only node 0 eligible as target; k=2 samples both others
        g2, nodes, donors = inject_attribute(g, 1, 1, 2, np.random.default_rng(0), exclude=[1, 2])
        assert nodes.tolist() == [0] and donors.tolist() == [2]
        np.testing.assert_array_equal(g2.attributes[:, 0], [10.0, 1.0, 10.0])

    def test_donor_mode(self):
        g = AttributedGraph.from_edges(3, [], np.array([[0.0], [1.0], [10.0]]))
        g2, nodes, sources = inject_attribute(g, 1, 1, 2, np.random.default_rng(0), exclude=[1], swap="donor")
        # target is 0 or 2; either way the far node gets the target's row
        v = sources[0]
        far = 2 if v == 0 else 0
        assert nodes.tolist() == [far]
        assert g2.attributes[far, 0] == g.attributes[v, 0]

    def test_excluded_nodes_untouched_and_disjoint(self, g200):
        exclude = np.arange(20)
        g2, nodes, _ = inject_attribute(g200, 5, 4, 50, np.random.default_rng(0), exclude=exclude)
        assert not set(nodes.tolist()) & set(exclude.tolist())
        normal = np.setdiff1d(np.arange(200), nodes)
        assert g2.attributes[normal].tobytes() == g200.attributes[normal].tobytes()
        assert (g2.adjacency != g200.adjacency).nnz == 0

    def test_k_clamped(self):
        g = AttributedGraph.from_edges(4, [], np.arange(4.0)[:, None])
        with pytest.warns(RuntimeWarning, match="k=10"):
            inject_attribute(g, 1, 1, 10, np.random.default_rng(0))

    def test_capacity(self):
        g = AttributedGraph.from_edges(5, [], np.zeros((5, 1)))
        with pytest.raises(CapacityError):
            inject_attribute(g, 2, 2, 2, np.random.default_rng(0), exclude=[0, 1])

    def test_seeded_determinism(self):
        g = random_graph(100, 300, 5, np.random.default_rng(11))
        a = inject_attribute(g, 3, 3, 20, np.random.default_rng(42))
        b = inject_attribute(g, 3, 3, 20, np.random.default_rng(42))
        assert a[0].attributes.tobytes() == b[0].attributes.tobytes()
        np.testing.assert_array_equal(a[1], b[1])


class TestBenchmark:
    def test_counts_and_disjointness(self, g200):
        res = inject_benchmark(g200, InjectionSpec(5, 4, 50, seed=0))
        s, a = set(res.structural.ravel().tolist()), set(res.attribute.tolist())
        assert len(s) == len(a) == 20 and not s & a
        assert res.labels.sum() == 40
        assert set(np.flatnonzero(res.labels).tolist()) == s | a
        assert sorted(res.provenance) == sorted(s | a)
        assert set(res.provenance.values()) == {"structural", "attribute"}

    def test_full_scale_total(self):
        # s=15, t=10 -> 300 anomalies, BlogCatalog's count
        g = random_graph(700, 2000, 4, np.random.default_rng(5))
        res = inject_benchmark(g, InjectionSpec(15, 10, 50, seed=1))
        assert res.labels.sum() == 300

    def test_capacity(self):
        g = random_graph(30, 40, 2, np.random.default_rng(0))
        with pytest.raises(CapacityError):
            inject_benchmark(g, InjectionSpec(4, 4, 5))

    def test_same_seed_identical(self, g200):
        a = inject_benchmark(g200, InjectionSpec(5, 4, 50, seed=9))
        b = inject_benchmark(g200, InjectionSpec(5, 4, 50, seed=9))
        assert a.manifest_json() == b.manifest_json()
        assert a.graph.attributes.tobytes() == b.graph.attributes.tobytes()
        assert (a.graph.adjacency != b.graph.adjacency).nnz == 0

    def test_different_seeds_differ(self, g200):
        differ = 0
        for seed in range(5):
            a = inject_benchmark(g200, InjectionSpec(5, 4, 50, seed=2 * seed))
            b = inject_benchmark(g200, InjectionSpec(5, 4, 50, seed=2 * seed + 1))
            differ += int(np.any(a.labels != b.labels))
        assert differ >= 1

    def test_non_anomalous_rows_bitwise_unchanged(self):
        g, _ = sbm_graph(rng=np.random.default_rng(2))
        res = inject_benchmark(g, InjectionSpec(5, 4, 50, seed=3))
        normal = np.setdiff1d(np.arange(g.n), res.attribute)
        assert res.graph.attributes[normal].tobytes() == g.attributes[normal].tobytes()

    @pytest.mark.parametrize("kwargs", [dict(s=1, t=1), dict(s=2, t=0), dict(s=2, t=1, k=0), dict(s=2, t=1, swap="x")])
    def test_spec_validation(self, kwargs):
        with pytest.raises(ConfigError):
            InjectionSpec(**kwargs)
