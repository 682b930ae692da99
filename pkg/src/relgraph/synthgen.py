"""Seeded stochastic block models with controllable homophily."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .graphcore import LabeledGraph, build_graph, connected_components


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SbmSpec:
    block_sizes: Sequence[int]
    p_intra: float
    p_inter: float
    seed: int = 0
    ensure_connected: bool = True
    add_self_loops: bool = True
    max_retries: int = 20
    augment: bool = True
    feature_dim: Optional[int] = None
    feature_separation: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.p_intra <= 1.0 and 0.0 <= self.p_inter <= 1.0):
            raise ValueError("edge probabilities must lie in [0, 1]")
        if len(self.block_sizes) == 0 or min(self.block_sizes) < 1:
            raise ValueError("block sizes must be >= 1")
        if self.feature_dim is not None and self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")

    @property
    def num_nodes(self) -> int:
        return int(sum(self.block_sizes))


def homophilic_default(seed: int = 0, **kw) -> SbmSpec:
    return SbmSpec(block_sizes=(200, 200), p_intra=0.05, p_inter=0.005, seed=seed, **kw)


def heterophilic_default(seed: int = 0, **kw) -> SbmSpec:
    return SbmSpec(block_sizes=(200, 200), p_intra=0.005, p_inter=0.05, seed=seed, **kw)


def _block_labels(sizes) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def _sample_edges(labels: np.ndarray, p_intra: float, p_inter: float, rng) -> np.ndarray:
    n = labels.size
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_intra, p_inter)
    keep = rng.random(iu.size) < prob
    return np.stack([iu[keep], ju[keep]], axis=1)


def _augment_within_blocks(n: int, edges: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Chain together, inside each block, one representative per graph component
    the block touches. Never adds a cross-block edge."""
    g = build_graph(edges, labels, num_labels=int(labels.max()) + 1)
    _, comp = connected_components(g)
    extra = []
    for b in range(int(labels.max()) + 1):
        nodes = np.flatnonzero(labels == b)
        _, first = np.unique(comp[nodes], return_index=True)
        reps = np.sort(nodes[first])
        extra.extend(zip(reps[:-1], reps[1:]))
    if not extra:
        return edges
    return np.concatenate([edges, np.array(extra, dtype=np.int64)])


def generate_sbm(spec: SbmSpec) -> LabeledGraph:
    """Sample an SBM; every unordered pair is an independent Bernoulli draw.

    With ``ensure_connected`` the sample is redrawn up to ``max_retries``
    times; if still disconnected and ``augment`` is on, each block's
    components are joined by a chain of intra-block edges. Self-loops are
    added last.
    """
    labels = _block_labels(spec.block_sizes)
    n = labels.size
    rng = np.random.default_rng(spec.seed)
    c = len(spec.block_sizes)

    edges = _sample_edges(labels, spec.p_intra, spec.p_inter, rng)
    if spec.ensure_connected:
        for _ in range(spec.max_retries):
            if connected_components(build_graph(edges, labels, num_labels=c))[0] == 1:
                break
            edges = _sample_edges(labels, spec.p_intra, spec.p_inter, rng)
        else:
            if not spec.augment:
                raise GenerationError(f"no connected sample after {spec.max_retries} retries")
            edges = _augment_within_blocks(n, edges, labels)
            if connected_components(build_graph(edges, labels, num_labels=c))[0] != 1:
                raise GenerationError(
                    "blocks cannot be joined without cross-block edges (p_inter too small)"
                )

    features = None
    if spec.feature_dim is not None:
        features = label_gaussian_features(labels, spec.feature_dim, spec.feature_separation, rng)
    return build_graph(edges, labels, features=features, add_self_loops=spec.add_self_loops, num_labels=c)


def label_gaussian_features(labels, dim: int, separation: float, rng) -> np.ndarray:
    """One random mean vector per label (scaled by ``separation``) plus unit noise."""
    c = int(np.max(labels)) + 1
    means = rng.normal(size=(c, dim)) * separation / np.sqrt(dim)
    return means[labels] + rng.normal(size=(len(labels), dim))


def expected_transition(spec: SbmSpec) -> np.ndarray:
    """Closed-form label transition matrix from expected edge counts.

    Expected adjacency mass from block i into block j is
    ``n_i (p_intra (n_i - 1) + s)`` on the diagonal (``s`` = 1 with self-loops)
    and ``n_i n_j p_inter`` off it; rows are normalized by their sums.
    """
    n = np.asarray(spec.block_sizes, dtype=np.float64)
    loop = 1.0 if spec.add_self_loops else 0.0
    mass = np.outer(n, n) * spec.p_inter
    np.fill_diagonal(mass, n * (spec.p_intra * (n - 1) + loop))
    rows = mass.sum(1, keepdims=True)
    if (rows == 0).any():
        raise ValueError("a block has zero expected degree")
    return mass / rows


def seeds_of(spec: SbmSpec, seeds) -> list:
    return [replace(spec, seed=int(s)) for s in seeds]
