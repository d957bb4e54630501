import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from resgcn.errors import ConfigError, DimensionMismatchError, GraphParseError, InvalidGraphError
from resgcn.graph import (
    AttributedGraph,
    SelfLoopWarning,
    load_graph,
    normalize_adjacency,
    pca_fit,
    pca_reduce,
    save_graph,
)
from resgcn.synthetic import random_graph

from conftest import dense_normalized


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoad:
    def test_basic(self, tmp_path):
        e = write(tmp_path, "e.txt", "0 1\n1 2\n")
        a = write(tmp_path, "a.csv", "1,2\n3,4\n5,6\n")
        g, labels = load_graph(e, a)
        assert (g.n, g.m, g.d) == (3, 2, 2)
        assert labels is None

    def test_self_loop_dropped_and_reported(self, tmp_path):
        e = write(tmp_path, "e.txt", "0 0\n0 1\n")
        a = write(tmp_path, "a.csv", "1\n2\n")
        with pytest.warns(SelfLoopWarning, match="dropped 1 self-loop"):
            g, _ = load_graph(e, a)
        assert (g.n, g.m) == (2, 1)
        assert g.adjacency.diagonal().sum() == 0

    def test_duplicates_collapse(self, tmp_path):
        e = write(tmp_path, "e.txt", "0 1\n1 0\n0 1\n")
        a = write(tmp_path, "a.csv", "1\n2\n")
        g, _ = load_graph(e, a)
        assert g.m == 1

    def test_comments_and_header(self, tmp_path):
        e = write(tmp_path, "e.txt", "# an edge list\n0 1\n\n# trailing\n")
        a = write(tmp_path, "a.csv", "f1,f2\n1,2\n3,4\n")
        g, _ = load_graph(e, a)
        np.testing.assert_array_equal(g.attributes, [[1, 2], [3, 4]])

    def test_labels(self, tmp_path):
        e = write(tmp_path, "e.txt", "0 1\n")
        a = write(tmp_path, "a.csv", "1\n2\n3\n")
        lab = write(tmp_path, "l.csv", "node_id,label\n2,1\n0,0\n")
        g, labels = load_graph(e, a, lab)
        np.testing.assert_array_equal(labels, [0, 0, 1])

    def test_missing_attribute_rows(self, tmp_path):
        e = write(tmp_path, "e.txt", "0 1\n1 5\n")
        a = write(tmp_path, "a.csv", "1\n2\n3\n")
        with pytest.raises(DimensionMismatchError):
            load_graph(e, a)

    def test_non_numeric_cell_reports_line(self, tmp_path):
        e = write(tmp_path, "e.txt", "0 1\n")
        a = write(tmp_path, "a.csv", "1,2\n3,x\n")
        with pytest.raises(GraphParseError) as info:
            load_graph(e, a)
        assert info.value.lineno == 2

    def test_bad_edge_line(self, tmp_path):
        e = write(tmp_path, "e.txt", "0 1\n1 two\n")
        a = write(tmp_path, "a.csv", "1\n2\n")
        with pytest.raises(GraphParseError, match=":2:"):
            load_graph(e, a)

    def test_empty_node_set(self, tmp_path):
        e = write(tmp_path, "e.txt", "")
        a = write(tmp_path, "a.csv", "")
        with pytest.raises(InvalidGraphError):
            load_graph(e, a)

    def test_round_trip(self, tmp_path, rng):
        g = random_graph(30, 70, 4, rng)
        save_graph(g, tmp_path / "e.txt", tmp_path / "a.csv")
        g2, _ = load_graph(tmp_path / "e.txt", tmp_path / "a.csv")
        save_graph(g2, tmp_path / "e2.txt", tmp_path / "a2.csv")
        assert (g2.adjacency != g.adjacency).nnz == 0
        np.testing.assert_array_equal(g2.attributes, g.attributes)
        assert (tmp_path / "e.txt").read_bytes() == (tmp_path / "e2.txt").read_bytes()
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "a2.csv").read_bytes()

    def test_round_trip_isolated_tail(self, tmp_path):
        g = AttributedGraph.from_edges(5, [(0, 1)], np.ones((5, 2)))
        save_graph(g, tmp_path / "e.txt", tmp_path / "a.csv")
        g2, _ = load_graph(tmp_path / "e.txt", tmp_path / "a.csv")
        assert (g2.n, g2.m) == (5, 1)


class TestGraphInvariants:
    def test_rejects_asymmetric(self):
        adj = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=float))
        with pytest.raises(InvalidGraphError):
            AttributedGraph(adj, np.zeros((2, 1)))

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidGraphError):
            AttributedGraph.from_edges(2, [(0, 1)], np.array([[np.nan], [0.0]]))

    def test_immutable_arrays(self, small_graph):
        with pytest.raises(ValueError):
            small_graph.attributes[0, 0] = 1.0

    def test_edges_sorted_upper(self, triangle):
        np.testing.assert_array_equal(triangle.edges(), [[0, 1], [0, 2], [1, 2]])


class TestNormalize:
    def test_isolated_node(self):
        g = AttributedGraph.from_edges(1, [], np.zeros((1, 1)))
        np.testing.assert_array_equal(normalize_adjacency(g).dense(), [[1.0]])

    def test_path2(self, path2):
        np.testing.assert_allclose(normalize_adjacency(path2).dense(), dense_normalized(path2.adjacency.toarray()), atol=1e-15)
        np.testing.assert_allclose(normalize_adjacency(path2).dense(), [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_triangle(self, triangle):
        np.testing.assert_allclose(normalize_adjacency(triangle).dense(), np.full((3, 3), 1 / 3), atol=1e-15)

    @pytest.mark.parametrize("n", [3, 7, 12])
    def test_regular_graphs_rows_sum_to_one(self, n):
        cycle = AttributedGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], np.zeros((n, 1)))
        complete = AttributedGraph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], np.zeros((n, 1)))
        for g in (cycle, complete):
            np.testing.assert_allclose(normalize_adjacency(g).matrix.sum(axis=1), 1.0, atol=1e-14)

    def test_sparsity_pattern_and_diagonal(self, small_graph):
        s = normalize_adjacency(small_graph).matrix
        pattern = (small_graph.adjacency + sp.identity(small_graph.n)).astype(bool)
        assert (s.astype(bool) != pattern).nnz == 0
        deg = np.asarray(small_graph.adjacency.sum(axis=1)).ravel() + 1
        np.testing.assert_allclose(s.diagonal(), 1 / deg, rtol=1e-15)
        assert sp.isspmatrix_csr(s)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 50), st.floats(0, 1), st.integers(0, 2**32 - 1))
    def test_matches_dense_oracle(self, n, density, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(n, int(density * n * (n - 1) / 2), 1, rng)
        s = normalize_adjacency(g)
        dense = s.dense()
        assert np.abs(dense - dense_normalized(g.adjacency.toarray())).max() <= 1e-12
        assert (s.matrix != s.matrix.T).nnz == 0
        assert dense.min() >= 0 and dense.max() <= 1


class TestPCA:
    def test_constant_rows_give_zeros(self):
        x = np.tile([1.0, 2.0, 3.0], (6, 1))
        np.testing.assert_array_equal(pca_reduce(x, 1), np.zeros((6, 1)))

    def test_rank_one_reconstruction(self, rng):
        x = np.outer(rng.normal(size=10), rng.normal(size=5)) + 3.0
        fit = pca_fit(x, 1)
        xc = x - x.mean(axis=0)
        np.testing.assert_allclose(fit.projected @ fit.components, xc, atol=1e-8)

    def test_explained_variance_matches_covariance_oracle(self, rng):
        x = rng.normal(size=(50, 30)) @ rng.normal(size=(30, 30))
        fit = pca_fit(x, 20)
        evals = np.linalg.eigh(np.cov(x, rowvar=False))[0][::-1]
        np.testing.assert_allclose(fit.explained_variance_ratio, evals[:20] / evals.sum(), atol=1e-8)

    def test_components_diagonal_covariance_and_sign(self, rng):
        x = rng.normal(size=(40, 12)) * np.arange(1, 13)
        y = pca_reduce(x, 6)
        cov = np.cov(y, rowvar=False)
        np.testing.assert_allclose(cov - np.diag(np.diag(cov)), 0, atol=1e-8)
        assert np.all(np.diff(np.diag(cov)) <= 1e-12)
        comps = pca_fit(x, 6).components
        assert np.all(comps[np.arange(6), np.argmax(np.abs(comps), axis=1)] > 0)

    def test_deterministic(self, rng):
        x = rng.normal(size=(30, 10))
        np.testing.assert_array_equal(pca_reduce(x, 5), pca_reduce(x.copy(), 5))

    def test_target_dim_too_large(self):
        with pytest.raises(ConfigError):
            pca_reduce(np.zeros((4, 3)), 4)
