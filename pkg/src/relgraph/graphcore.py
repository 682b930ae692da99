"""Immutable labeled graphs and exact multi-hop neighborhoods."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

UNREACHABLE = -1


class GraphError(ValueError):
    """Raised for malformed graph input."""


class DisconnectedGraphError(GraphError):
    def __init__(self, component_sizes: Sequence[int]):
        self.component_sizes = tuple(int(s) for s in component_sizes)
        sizes = ", ".join(str(s) for s in self.component_sizes[:10])
        more = "" if len(self.component_sizes) <= 10 else ", ..."
        super().__init__(
            f"graph is disconnected: {len(self.component_sizes)} components "
            f"(sizes {sizes}{more}); use largest_component() to extract the giant component"
        )


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    """Undirected graph in CSR form with one integer label per node.

    Each undirected edge is stored in both directions. A self-loop is stored
    once, so it contributes 1 to the degree of its node.
    """

    indptr: np.ndarray
    indices: np.ndarray
    labels: np.ndarray
    num_labels: int
    features: Optional[np.ndarray] = None
    has_self_loops: bool = False
    label_values: tuple = field(default=())

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def num_self_loops(self) -> int:
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        return int(np.count_nonzero(rows == self.indices))

    @property
    def num_edges(self) -> int:
        """Number of undirected non-loop edges."""
        return (len(self.indices) - self.num_self_loops) // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.indices), dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.num_nodes,) * 2)

    def edge_array(self) -> np.ndarray:
        """Undirected edges as an (E, 2) array with u <= v, self-loops included."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        keep = rows <= self.indices
        return np.stack([rows[keep], self.indices[keep]], axis=1)


def build_graph(
    edges: Iterable[Sequence[int]],
    labels: Sequence[int],
    features: Optional[np.ndarray] = None,
    add_self_loops: bool = False,
    num_labels: Optional[int] = None,
) -> LabeledGraph:
    """Build a LabeledGraph from an edge list.

    The edge list is symmetrized and deduplicated. When ``num_labels`` is
    given, labels must already be dense ids in ``[0, num_labels)`` with every
    class present. Otherwise the distinct label values are mapped in sorted
    order onto ``0..c-1`` and the originals kept in ``label_values``.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise GraphError("empty graph: at least one labeled node is required")
    if not np.issubdtype(labels.dtype, np.integer):
        raise GraphError("labels must be integers")
    n = labels.size

    if num_labels is None:
        label_values, dense = np.unique(labels, return_inverse=True)
        num_labels = len(label_values)
        label_values = tuple(int(v) for v in label_values)
    else:
        if labels.min() < 0 or labels.max() >= num_labels:
            bad = int(labels[(labels < 0) | (labels >= num_labels)][0])
            raise GraphError(f"label id {bad} out of range [0, {num_labels})")
        missing = np.setdiff1d(np.arange(num_labels), labels)
        if missing.size:
            raise GraphError(f"label class {int(missing[0])} has no nodes")
        dense = labels
        label_values = tuple(range(num_labels))

    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if e.size == 0:
        e = np.zeros((0, 2), dtype=np.int64)
    if e.ndim != 2 or e.shape[1] != 2:
        raise GraphError("edges must be pairs of node ids")
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0) | (e >= n)][0]
        raise GraphError(f"edge endpoint {int(bad)} out of range [0, {n})")

    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    if add_self_loops:
        src = np.concatenate([src, np.arange(n)])
        dst = np.concatenate([dst, np.arange(n)])
    # dedupe (u,v) pairs; a self-loop (u,u) appears once after this
    key = np.unique(src * n + dst)
    src, dst = key // n, key % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])

    if features is not None:
        features = np.array(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != n:
            raise GraphError(f"features must have shape ({n}, D), got {features.shape}")
        features = _readonly(features)

    has_loops = bool(add_self_loops) or bool(n and np.all(np.isin(np.arange(n), src[src == dst])))
    return LabeledGraph(
        indptr=_readonly(indptr),
        indices=_readonly(dst.astype(np.int64)),
        labels=_readonly(np.asarray(dense, dtype=np.int64)),
        num_labels=int(num_labels),
        features=features,
        has_self_loops=has_loops,
        label_values=label_values,
    )


def with_features(g: LabeledGraph, features: Optional[np.ndarray]) -> LabeledGraph:
    return build_graph(g.edge_array(), g.labels, features=features, num_labels=g.num_labels)


@dataclass(frozen=True)
class HopSets:
    """Exact-distance neighbor sets of one anchor.

    ``per_hop[n]`` holds nodes at shortest-path distance ``n + 1``;
    ``beyond`` holds everything farther than ``k`` hops.
    """

    anchor: int
    per_hop: tuple
    beyond: np.ndarray

    @property
    def k(self) -> int:
        return len(self.per_hop)

    def hop(self, n: int) -> np.ndarray:
        """1-based access; ``hop(k + 1)`` is the beyond set."""
        if n == self.k + 1:
            return self.beyond
        return self.per_hop[n - 1]

    def sizes(self) -> list:
        return [len(s) for s in self.per_hop] + [len(self.beyond)]


def bfs_distances(g: LabeledGraph, source: int, max_hop: Optional[int] = None) -> np.ndarray:
    """Shortest-path hop distances from ``source``; ``UNREACHABLE`` (-1) if not reached.

    With ``max_hop`` set the search stops early and nodes past it stay -1.
    """
    n = g.num_nodes
    dist = np.full(n, UNREACHABLE, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    d = 0
    while frontier.size and (max_hop is None or d < max_hop):
        d += 1
        starts, stops = g.indptr[frontier], g.indptr[frontier + 1]
        nbrs = np.concatenate([g.indices[a:b] for a, b in zip(starts, stops)]) if frontier.size else frontier
        nbrs = np.unique(nbrs)
        nbrs = nbrs[dist[nbrs] == UNREACHABLE]
        dist[nbrs] = d
        frontier = nbrs
    return dist


def hop_sets(g: LabeledGraph, anchor: int, k: int, include_unreachable: bool = True) -> HopSets:
    if not 0 <= anchor < g.num_nodes:
        raise GraphError(f"anchor {anchor} out of range [0, {g.num_nodes})")
    if k < 1:
        raise ValueError("k must be >= 1")
    dist = bfs_distances(g, anchor, max_hop=k)
    per_hop = tuple(np.flatnonzero(dist == h) for h in range(1, k + 1))
    if include_unreachable:
        beyond = np.flatnonzero(dist == UNREACHABLE)
    else:
        full = bfs_distances(g, anchor)
        beyond = np.flatnonzero(full > k)
    return HopSets(anchor=anchor, per_hop=per_hop, beyond=beyond)


def distance_matrix(g: LabeledGraph, anchors: Optional[np.ndarray] = None) -> np.ndarray:
    """Hop distances from each anchor (rows) to every node; -1 if unreachable."""
    if anchors is None:
        anchors = np.arange(g.num_nodes)
    d = csgraph.shortest_path(g.adjacency(), method="D", unweighted=True, indices=anchors)
    d = np.atleast_2d(d)
    out = np.full(d.shape, UNREACHABLE, dtype=np.int64)
    finite = np.isfinite(d)
    out[finite] = d[finite].astype(np.int64)
    return out


def hop_masks(dist: np.ndarray, k: int, include_unreachable: bool = True) -> np.ndarray:
    """Boolean masks of shape (k + 1, A, N) from a distance matrix.

    Slot ``n - 1`` marks nodes at distance exactly ``n``; slot ``k`` is the
    beyond-k set.
    """
    masks = np.empty((k + 1,) + dist.shape, dtype=bool)
    for h in range(1, k + 1):
        masks[h - 1] = dist == h
    masks[k] = dist > k
    if include_unreachable:
        masks[k] |= dist == UNREACHABLE
    return masks


def degree_by_label(g: LabeledGraph) -> np.ndarray:
    return np.bincount(g.labels, weights=g.degrees.astype(np.float64), minlength=g.num_labels)


def connected_components(g: LabeledGraph) -> tuple:
    """(count, per-node component id)."""
    return csgraph.connected_components(g.adjacency(), directed=False)


def is_connected(g: LabeledGraph) -> bool:
    return connected_components(g)[0] == 1


def require_connected(g: LabeledGraph) -> None:
    ncomp, comp = connected_components(g)
    if ncomp != 1:
        sizes = np.sort(np.bincount(comp))[::-1]
        raise DisconnectedGraphError(sizes)


def largest_component(g: LabeledGraph) -> tuple:
    """Induced subgraph on the largest connected component.

    Returns ``(subgraph, node_ids)`` where ``node_ids[i]`` is the original id of
    subgraph node ``i``. Labels are recompacted if a class disappears.
    """
    _, comp = connected_components(g)
    big = np.argmax(np.bincount(comp))
    keep = np.flatnonzero(comp == big)
    return induced_subgraph(g, keep), keep


def induced_subgraph(g: LabeledGraph, nodes: np.ndarray) -> LabeledGraph:
    nodes = np.asarray(nodes, dtype=np.int64)
    remap = np.full(g.num_nodes, -1, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    e = g.edge_array()
    e = remap[e]
    e = e[(e >= 0).all(axis=1)]
    feats = None if g.features is None else g.features[nodes]
    sub = build_graph(e, g.labels[nodes], features=feats)
    # keep original label ids visible through label_values
    values = tuple(g.label_values[v] for v in sub.label_values) if g.label_values else sub.label_values
    object.__setattr__(sub, "label_values", values)
    return sub
