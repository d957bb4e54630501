"""Structural (clique) and attribute (far-donor copy) anomaly injection.

All sampling goes through a ``numpy.random.Generator`` backed by PCG64,
whose stream is specified bit-for-bit and therefore identical across
platforms for a given seed.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConfigError
from .graph import AttributedGraph

logger = logging.getLogger(__name__)

STRUCTURAL = "structural"
ATTRIBUTE = "attribute"

# "target": the sampled node takes the farthest candidate's row and is labelled.
# "donor": the farthest candidate takes the sampled node's row and is labelled.
SWAP_MODES = ("target", "donor")


@dataclass(frozen=True)
class InjectionSpec:
    s: int
    t: int
    k: int = 50
    seed: int = 0
    swap: str = "target"

    def __post_init__(self):
        if self.s < 2:
            raise ConfigError(f"clique size s must be >= 2, got {self.s}")
        if self.t < 1:
            raise ConfigError(f"clique count t must be >= 1, got {self.t}")
        if self.k < 1:
            raise ConfigError(f"candidate pool k must be >= 1, got {self.k}")
        if self.swap not in SWAP_MODES:
            raise ConfigError(f"swap must be one of {SWAP_MODES}, got {self.swap!r}")

    @property
    def per_kind(self) -> int:
        return self.s * self.t


@dataclass(frozen=True, eq=False)
class InjectionResult:
    graph: AttributedGraph
    labels: np.ndarray
    structural: np.ndarray  # clique members, shape (t, s), in sampling order
    attribute: np.ndarray  # attribute anomalies, in sampling order
    donors: np.ndarray  # node whose original row was copied, aligned with ``attribute``
    spec: InjectionSpec

    @property
    def provenance(self) -> dict[int, str]:
        tags = {int(v): STRUCTURAL for v in self.structural.ravel()}
        tags.update({int(v): ATTRIBUTE for v in self.attribute})
        return dict(sorted(tags.items()))

    def manifest(self) -> dict:
        return {
            "spec": asdict(self.spec),
            "n": self.graph.n,
            "m": self.graph.m,
            "d": self.graph.d,
            "n_anomalies": int(self.labels.sum()),
            "cliques": self.structural.tolist(),
            "attribute_anomalies": [
                {"node": int(v), "source": int(u)} for v, u in zip(self.attribute, self.donors)
            ],
            "provenance": {str(k): v for k, v in self.provenance.items()},
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n"


def inject_structural(g: AttributedGraph, s: int, t: int, rng: np.random.Generator):
    """Plant ``t`` disjoint ``s``-cliques on nodes sampled without replacement.

    Returns the new graph and the ``(t, s)`` array of clique members. Edges
    already present inside a clique are kept once; no other edge changes.
    """
    if s * t > g.n:
        raise CapacityError(f"need s*t={s * t} distinct nodes but the graph has {g.n}")
    groups = rng.choice(g.n, size=s * t, replace=False).reshape(t, s)
    iu, ju = np.triu_indices(s, k=1)
    rows = np.concatenate([grp[iu] for grp in groups] + [grp[ju] for grp in groups])
    cols = np.concatenate([grp[ju] for grp in groups] + [grp[iu] for grp in groups])
    clique = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(g.n, g.n))
    adj = g.adjacency + clique
    adj.data[:] = 1.0
    return g.with_changes(adjacency=adj), groups


def inject_attribute(
    g: AttributedGraph,
    s: int,
    t: int,
    k: int,
    rng: np.random.Generator,
    exclude=(),
    swap: str = "target",
):
    """Replace attribute rows with those of a far-away node.

    ``s*t`` targets are drawn without replacement from nodes outside
    ``exclude``. For each target, ``k`` other nodes are drawn and the one
    with the largest Euclidean distance to the target (first one on ties)
    is picked. Distances and copied rows always refer to the attributes
    before injection, so the outcome does not depend on processing order.

    With ``swap="target"`` the target receives the candidate's row and is
    the anomaly. With ``swap="donor"`` the candidate receives the target's
    row and is the anomaly; candidates are then restricted to nodes that
    are neither excluded nor already chosen, to keep ``s*t`` distinct
    anomalies.

    Returns ``(graph, anomalies, sources)`` where ``sources[i]`` is the node
    whose original row now sits on ``anomalies[i]``.
    """
    if swap not in SWAP_MODES:
        raise ConfigError(f"swap must be one of {SWAP_MODES}, got {swap!r}")
    n = g.n
    count = s * t
    excluded = np.zeros(n, dtype=bool)
    excluded[np.asarray(list(exclude), dtype=np.int64)] = True
    available = np.flatnonzero(~excluded)
    if count > available.size:
        raise CapacityError(f"need s*t={count} eligible nodes but only {available.size} remain")
    if k >= n:
        warnings.warn(f"k={k} >= n={n}; using k={n - 1}", RuntimeWarning, stacklevel=2)
        k = n - 1
    x0 = g.attributes
    x = x0.copy()
    targets = rng.choice(available, size=count, replace=False)
    anomalies = np.empty(count, dtype=np.int64)
    sources = np.empty(count, dtype=np.int64)
    taken = excluded.copy()
    for i, v in enumerate(targets):
        if swap == "target":
            pool = np.delete(np.arange(n), v)
        else:
            mask = ~taken
            mask[v] = False
            pool = np.flatnonzero(mask)
            if pool.size == 0:
                raise CapacityError("no eligible candidate left for donor-mode injection")
        cand = rng.choice(pool, size=min(k, pool.size), replace=False)
        dist = np.linalg.norm(x0[cand] - x0[v], axis=1)
        j = cand[int(np.argmax(dist))]
        if swap == "target":
            x[v] = x0[j]
            anomalies[i], sources[i] = v, j
        else:
            x[j] = x0[v]
            anomalies[i], sources[i] = j, v
            taken[j] = True
    return g.with_changes(attributes=x), anomalies, sources


def inject_benchmark(g: AttributedGraph, spec: InjectionSpec) -> InjectionResult:
    """Structural injection first, then attribute injection on the remaining nodes."""
    if 2 * spec.per_kind > g.n:
        raise CapacityError(f"need 2*s*t={2 * spec.per_kind} nodes but the graph has {g.n}")
    rng = np.random.default_rng(spec.seed)
    g1, cliques = inject_structural(g, spec.s, spec.t, rng)
    g2, attr_nodes, donors = inject_attribute(
        g1, spec.s, spec.t, spec.k, rng, exclude=cliques.ravel(), swap=spec.swap
    )
    labels = np.zeros(g.n, dtype=np.int64)
    labels[cliques.ravel()] = 1
    labels[attr_nodes] = 1
    logger.info(
        "injected %d structural and %d attribute anomalies (seed=%d)",
        cliques.size, attr_nodes.size, spec.seed,
    )
    return InjectionResult(g2, labels, cliques, attr_nodes, donors, spec)
