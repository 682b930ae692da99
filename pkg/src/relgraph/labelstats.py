"""Empirical label consistency across hop distances."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graphcore import UNREACHABLE, LabeledGraph, bfs_distances, distance_matrix

_CHUNK = 256


@dataclass(frozen=True)
class DecayCurve:
    hops: np.ndarray
    lc_values: np.ndarray
    per_node_counts: np.ndarray

    @property
    def homophily(self) -> float:
        """Hop-1 value, i.e. the usual node-homophily statistic."""
        return float(self.lc_values[0])


def _chunk_fractions(g: LabeledGraph, anchors: np.ndarray, max_hop: int):
    dist = distance_matrix(g, anchors)
    same = g.labels[None, :] == g.labels[anchors, None]
    frac_sum = np.zeros(max_hop)
    counts = np.zeros(max_hop, dtype=np.int64)
    for h in range(1, max_hop + 1):
        in_hop = dist == h
        size = in_hop.sum(axis=1)
        ok = size > 0
        hit = (in_hop & same).sum(axis=1)
        frac = hit[ok] / size[ok]
        frac_sum[h - 1] = np.sum(frac)
        counts[h - 1] = ok.sum()
    return frac_sum, counts


def lc_emp(g: LabeledGraph, max_hop: int, threads: int = 1) -> DecayCurve:
    """Average same-label fraction of exact hop-n neighbors, n = 1..max_hop.

    Anchors whose hop-n set is empty are left out of the hop-n average; the
    number of contributing anchors is returned in ``per_node_counts``.
    """
    if max_hop < 1:
        raise ValueError("max_hop must be >= 1")
    chunks = [np.arange(s, min(s + _CHUNK, g.num_nodes)) for s in range(0, g.num_nodes, _CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda a: _chunk_fractions(g, a, max_hop), chunks))
    else:
        parts = [_chunk_fractions(g, a, max_hop) for a in chunks]
    # chunk boundaries do not depend on the thread count, so the reduction order is fixed
    total = np.zeros(max_hop)
    counts = np.zeros(max_hop, dtype=np.int64)
    for s, c in parts:
        total += s
        counts += c
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(counts > 0, total / np.maximum(counts, 1), np.nan)
    return DecayCurve(np.arange(1, max_hop + 1), values, counts)


def _same_fraction(g: LabeledGraph, anchor: int, nodes: np.ndarray) -> float:
    return float(np.mean(g.labels[nodes] == g.labels[anchor]))


def sim_stat(g: LabeledGraph, anchor: int, n: int) -> float:
    dist = bfs_distances(g, anchor, max_hop=n)
    nodes = np.flatnonzero(dist == n)
    if nodes.size == 0:
        raise ValueError(f"node {anchor} has no neighbors at hop {n}")
    return _same_fraction(g, anchor, nodes)


def _beyond_nodes(dist: np.ndarray, n: int, include_unreachable: bool) -> np.ndarray:
    far = dist > n
    if include_unreachable:
        far |= dist == UNREACHABLE
    return np.flatnonzero(far)


def sim_stat_beyond(
    g: LabeledGraph, anchor: int, n: int, k: int, include_unreachable: bool = True
) -> float:
    """Same-label fraction over every node farther than ``n`` hops.

    The union of hops ``n+1..k`` and the beyond-k set is simply "distance > n",
    so ``k`` only has to satisfy ``n <= k``.
    """
    if not 1 <= n <= k:
        raise ValueError(f"need 1 <= n <= k, got n={n}, k={k}")
    nodes = _beyond_nodes(bfs_distances(g, anchor), n, include_unreachable)
    if nodes.size == 0:
        raise ValueError(f"node {anchor} has no nodes beyond hop {n}")
    return _same_fraction(g, anchor, nodes)


def relative_gap(g: LabeledGraph, n: int, k: int, include_unreachable: bool = True) -> tuple:
    """Mean of ``sim_stat(v, n) - sim_stat_beyond(v, n)`` over anchors where both exist.

    Returns ``(gap, anchor_count)``.
    """
    if not 1 <= n <= k:
        raise ValueError(f"need 1 <= n <= k, got n={n}, k={k}")
    dist = distance_matrix(g)
    same = g.labels[None, :] == g.labels[:, None]
    near = dist == n
    far = dist > n
    if include_unreachable:
        far |= dist == UNREACHABLE
    n_near, n_far = near.sum(1), far.sum(1)
    ok = (n_near > 0) & (n_far > 0)
    if not ok.any():
        return float("nan"), 0
    a = (near & same).sum(1)[ok] / n_near[ok]
    b = (far & same).sum(1)[ok] / n_far[ok]
    return float(np.mean(a - b)), int(ok.sum())
