"""Stochastic-block-model attributed graphs for tests and desk-scale benchmarks."""

from __future__ import annotations

import numpy as np

from .graph import AttributedGraph


def sbm_graph(
    sizes=(100, 100),
    p_in: float = 0.2,
    p_out: float = 0.02,
    d: int = 20,
    mean_scale: float = 1.0,
    noise: float = 1.0,
    rng: np.random.Generator | None = None,
):
    """Undirected SBM with Gaussian attributes centred on a per-block mean.

    Each block mean is drawn from ``N(0, mean_scale^2 I)``; node attributes
    add ``N(0, noise^2 I)``. Returns ``(graph, block_of_node)``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    sizes = [int(s) for s in sizes]
    n = sum(sizes)
    block = np.repeat(np.arange(len(sizes)), sizes)
    probs = np.where(block[:, None] == block[None, :], p_in, p_out)
    draws = rng.random((n, n))
    iu, ju = np.triu_indices(n, k=1)
    keep = draws[iu, ju] < probs[iu, ju]
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    means = rng.normal(0.0, mean_scale, size=(len(sizes), d))
    x = means[block] + rng.normal(0.0, noise, size=(n, d))
    return AttributedGraph.from_edges(n, edges, x), block


def random_graph(n: int, m: int, d: int, rng: np.random.Generator) -> AttributedGraph:
    """Uniform random simple graph with about ``m`` edges and standard-normal attributes."""
    max_m = n * (n - 1) // 2
    m = min(m, max_m)
    iu, ju = np.triu_indices(n, k=1)
    pick = rng.choice(iu.size, size=m, replace=False)
    edges = np.stack([iu[pick], ju[pick]], axis=1)
    return AttributedGraph.from_edges(n, edges, rng.normal(size=(n, d)))
