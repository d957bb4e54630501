"""Attributed graphs: loading, saving, normalization and PCA preprocessing."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    ConfigError,
    DimensionMismatchError,
    GraphParseError,
    InvalidGraphError,
)

logger = logging.getLogger(__name__)


class SelfLoopWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected, unweighted graph with a dense attribute row per node.

    ``adjacency`` is a symmetric 0/1 CSR matrix with an empty diagonal and
    ``attributes`` a finite ``(n, d)`` float array. Instances are treated as
    immutable; the arrays are marked read-only on construction.
    """

    adjacency: sp.csr_matrix
    attributes: np.ndarray
    node_ids: tuple | None = field(default=None)

    def __post_init__(self):
        adj = sp.csr_matrix(self.adjacency, dtype=np.float64, copy=True)
        adj.sum_duplicates()
        adj.eliminate_zeros()
        adj.sort_indices()
        x = np.array(self.attributes, dtype=np.float64)
        if x.ndim != 2:
            raise InvalidGraphError(f"attributes must be 2-D, got shape {x.shape}")
        n = adj.shape[0]
        if n < 1 or adj.shape != (n, n):
            raise InvalidGraphError(f"adjacency must be square and non-empty, got {adj.shape}")
        if x.shape[0] != n:
            raise DimensionMismatchError(
                f"attributes have {x.shape[0]} rows but the graph has {n} nodes"
            )
        if not np.all(np.isfinite(x)):
            raise InvalidGraphError("attributes contain non-finite values")
        if adj.diagonal().any():
            raise InvalidGraphError("adjacency has self-loops")
        if np.any(adj.data != 1.0):
            raise InvalidGraphError("adjacency must be 0/1")
        if (adj != adj.T).nnz:
            raise InvalidGraphError("adjacency is not symmetric")
        if self.node_ids is not None and len(self.node_ids) != n:
            raise DimensionMismatchError("node_ids length differs from node count")
        adj.data.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "attributes", x)
        if self.node_ids is not None:
            object.__setattr__(self, "node_ids", tuple(self.node_ids))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def m(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def d(self) -> int:
        return self.attributes.shape[1]

    @classmethod
    def from_edges(cls, n, edges, attributes, node_ids=None) -> "AttributedGraph":
        """Build a graph from ``(u, v)`` pairs; duplicates and both orientations collapse."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise InvalidGraphError(f"edge endpoint outside 0..{n - 1}")
        edges = edges[edges[:, 0] != edges[:, 1]]
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        adj.sum_duplicates()
        adj.data[:] = 1.0
        return cls(adj, attributes, node_ids)

    def edges(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` array with ``u < v``, lexicographically sorted."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        pairs = np.stack([upper.row, upper.col], axis=1).astype(np.int64)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order]

    def with_changes(self, adjacency=None, attributes=None) -> "AttributedGraph":
        return AttributedGraph(
            self.adjacency if adjacency is None else adjacency,
            self.attributes if attributes is None else attributes,
            self.node_ids,
        )


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """Symmetric GCN propagation operator ``D~^-1/2 (A + I) D~^-1/2`` in CSR form."""

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize_adjacency(g: AttributedGraph) -> NormalizedAdjacency:
    a_tilde = (g.adjacency + sp.identity(g.n, format="csr")).tocsr()
    deg = np.asarray(a_tilde.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d_half = sp.diags(inv_sqrt)
    s = (d_half @ a_tilde @ d_half).tocsr()
    s.sort_indices()
    return NormalizedAdjacency(s)


# ---------------------------------------------------------------------------
# file I/O


def _is_comment_or_blank(line: str) -> bool:
    stripped = line.strip()
    return not stripped or stripped.startswith("#")


def read_edge_list(path) -> tuple[np.ndarray, int]:
    """Parse a whitespace-separated edge list.

    Returns the ``(k, 2)`` array of non-loop pairs (possibly containing
    duplicates) and the number of self-loops that were dropped.
    """
    pairs = []
    loops = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if _is_comment_or_blank(line):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphParseError(path, lineno, f"expected 2 fields, got {len(parts)}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphParseError(path, lineno, f"non-integer node id in {line.strip()!r}") from None
            if u < 0 or v < 0:
                raise GraphParseError(path, lineno, "node ids must be non-negative")
            if u == v:
                loops += 1
                continue
            pairs.append((u, v))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2), loops


def _looks_numeric(cells) -> bool:
    try:
        for c in cells:
            float(c)
    except ValueError:
        return False
    return True


def read_attributes(path) -> np.ndarray:
    """Read a dense numeric CSV (one row per node); a non-numeric first row is a header."""
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if lineno == 1 and not _looks_numeric(cells):
                continue
            try:
                row = [float(c) for c in cells]
            except ValueError:
                raise GraphParseError(path, lineno, "non-numeric attribute cell") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise GraphParseError(path, lineno, f"expected {width} columns, got {len(row)}")
            if not all(np.isfinite(row)):
                raise GraphParseError(path, lineno, "non-finite attribute value")
            rows.append(row)
    if not rows:
        raise InvalidGraphError(f"{path}: no attribute rows, node set is empty")
    return np.asarray(rows, dtype=np.float64)


def read_labels(path, n: int) -> np.ndarray:
    """Read ``node_id,label`` rows into a dense 0/1 vector of length ``n``."""
    labels = np.zeros(n, dtype=np.int64)
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            if not cells:
                continue
            if lineno == 1 and not _looks_numeric(cells):
                continue
            if len(cells) != 2:
                raise GraphParseError(path, lineno, "expected node_id,label")
            try:
                node, lab = int(cells[0]), int(cells[1])
            except ValueError:
                raise GraphParseError(path, lineno, "non-integer label row") from None
            if not 0 <= node < n:
                raise GraphParseError(path, lineno, f"node id {node} outside 0..{n - 1}")
            if lab not in (0, 1):
                raise GraphParseError(path, lineno, f"label must be 0 or 1, got {lab}")
            labels[node] = lab
    return labels


def load_graph(edge_path, attr_path, label_path=None):
    """Load an attributed graph, plus labels when ``label_path`` is given.

    Returns ``(graph, labels)``; ``labels`` is ``None`` without a label file.
    The node count is the attribute row count; every edge endpoint must
    have an attribute row.
    """
    for p in (edge_path, attr_path, label_path):
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"no such file: {p}")
    edges, loops = read_edge_list(edge_path)
    x = read_attributes(attr_path)
    n = x.shape[0]
    if edges.size and edges.max() + 1 > n:
        raise DimensionMismatchError(
            f"edge list references node {edges.max()} but {attr_path} has {n} rows"
        )
    if loops:
        warnings.warn(f"dropped {loops} self-loop(s) from {edge_path}", SelfLoopWarning, stacklevel=2)
        logger.warning("dropped %d self-loop(s) from %s", loops, edge_path)
    g = AttributedGraph.from_edges(n, edges, x)
    labels = read_labels(label_path, n) if label_path is not None else None
    return g, labels


def write_edge_list(g: AttributedGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def write_attributes(x: np.ndarray, path) -> None:
    # repr() of a Python float round-trips exactly
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(x, dtype=np.float64):
            writer.writerow([repr(float(v)) for v in row])


def write_labels(labels, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "label"])
        for i, lab in enumerate(labels):
            writer.writerow([i, int(lab)])


def save_graph(g: AttributedGraph, edge_path, attr_path) -> None:
    write_edge_list(g, edge_path)
    write_attributes(g.attributes, attr_path)


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PCAResult:
    mean: np.ndarray
    components: np.ndarray  # (k, d), rows are unit principal axes
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray
    projected: np.ndarray


def pca_fit(x, target_dim: int) -> PCAResult:
    """Principal components of the column-centred data via thin SVD.

    Columns are centred but not scaled. Each component's sign is fixed so
    that its largest-magnitude loading is positive.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if not 1 <= target_dim <= min(n, d):
        raise ConfigError(f"target_dim must be in 1..{min(n, d)}, got {target_dim}")
    if not np.all(np.isfinite(x)):
        raise InvalidGraphError("PCA input contains non-finite values")
    mean = x.mean(axis=0)
    xc = x - mean
    _, sv, vt = np.linalg.svd(xc, full_matrices=False)
    comps = vt[:target_dim].copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(target_dim), pivot])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    var = sv**2 / max(n - 1, 1)
    total = var.sum()
    ratio = var[:target_dim] / total if total > 0 else np.zeros(target_dim)
    return PCAResult(mean, comps, var[:target_dim], ratio, xc @ comps.T)


def pca_reduce(x, target_dim: int) -> np.ndarray:
    return pca_fit(x, target_dim).projected
