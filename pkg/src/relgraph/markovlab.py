"""Label-level random walks: transition matrix, stationary law, spectrum, decay.

A node-level walk moves from ``u`` to a uniformly chosen stored neighbor
(``P_uv = A_uv / deg(u)``). Aggregating those moves over the nodes of each
label class, weighted by degree, gives the c x c label transition matrix.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .graphcore import GraphError, LabeledGraph, degree_by_label, require_connected

ROW_TOL = 1e-12
FIXED_POINT_TOL = 1e-9


@dataclass(frozen=True)
class LabelTransition:
    T: np.ndarray
    pi: np.ndarray
    eigvals: np.ndarray
    lambda2: Optional[complex]

    @property
    def num_labels(self) -> int:
        return self.T.shape[0]

    @property
    def lambda2_is_complex(self) -> bool:
        return self.lambda2 is not None and abs(self.lambda2.imag) > 1e-12

    @property
    def lambda2_real(self) -> Optional[float]:
        return None if self.lambda2 is None else float(self.lambda2.real)

    @property
    def lambda2_modulus(self) -> float:
        return 0.0 if self.lambda2 is None else float(abs(self.lambda2))


def sorted_eigvals(T: np.ndarray) -> np.ndarray:
    """Eigenvalues ordered by modulus, descending; ties put the larger real part first."""
    ev = np.linalg.eigvals(T).astype(complex)
    # round the modulus so numerically equal moduli compare equal
    order = np.lexsort((-ev.real, -np.round(np.abs(ev), 12)))
    return ev[order]


def stationary_distribution(T: np.ndarray) -> np.ndarray:
    """Left Perron vector of a row-stochastic matrix, normalized to sum 1."""
    w, V = np.linalg.eig(T.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    v = np.real(V[:, i])
    return v / v.sum()


def _from_matrix(T: np.ndarray, pi: np.ndarray, eigvals: Optional[np.ndarray] = None) -> LabelTransition:
    if eigvals is None:
        eigvals = sorted_eigvals(T)
    lam2 = complex(eigvals[1]) if len(eigvals) > 1 else None
    return LabelTransition(T=T, pi=pi, eigvals=eigvals, lambda2=lam2)


def transition_from_matrix(T) -> LabelTransition:
    """Wrap an arbitrary row-stochastic matrix (pi from the left eigenvector)."""
    T = np.array(T, dtype=np.float64)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError("T must be square")
    if (T < 0).any() or np.abs(T.sum(1) - 1).max() > ROW_TOL:
        raise ValueError("T must be row-stochastic")
    return _from_matrix(T, stationary_distribution(T))


def label_edge_counts(g: LabeledGraph) -> np.ndarray:
    """``E[i, j] = sum over u with label i, v with label j of A_uv``."""
    Y = sp.csr_matrix(
        (np.ones(g.num_nodes), (np.arange(g.num_nodes), g.labels)),
        shape=(g.num_nodes, g.num_labels),
    )
    return np.asarray((Y.T @ g.adjacency() @ Y).todense())


def build_transition(g: LabeledGraph) -> LabelTransition:
    """Degree-weighted label transition matrix of a connected graph.

    ``T_ij`` is the number of adjacency entries from label-i nodes into
    label-j nodes divided by the total degree of label i. The stationary
    distribution is the per-label share of total degree; it is checked
    against ``pi T = pi`` before returning.
    """
    require_connected(g)
    E = label_edge_counts(g)
    deg = degree_by_label(g)
    if (deg == 0).any():
        j = int(np.flatnonzero(deg == 0)[0])
        raise GraphError(f"label class {j} has zero total degree")
    T = E / deg[:, None]
    pi = deg / deg.sum()
    resid = np.abs(pi @ T - pi).max()
    if resid > FIXED_POINT_TOL:
        raise ArithmeticError(f"degree-share distribution is not stationary (residual {resid:.3e})")
    return _from_matrix(T, pi)


def two_label_model(p: float, orientation: str = "homophilic") -> LabelTransition:
    """Symmetric two-label chain; eigenvalues are {1, 2p-1} or {1, 1-2p}."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if orientation == "homophilic":
        stay = p
    elif orientation == "heterophilic":
        stay = 1.0 - p
    else:
        raise ValueError(f"orientation must be 'homophilic' or 'heterophilic', got {orientation!r}")
    T = np.array([[stay, 1.0 - stay], [1.0 - stay, stay]])
    lam2 = 2.0 * stay - 1.0
    eig = np.array([1.0, lam2], dtype=complex)
    return LabelTransition(T=T, pi=np.array([0.5, 0.5]), eigvals=eig, lambda2=complex(lam2))


def matrix_powers(T: np.ndarray, max_k: int) -> np.ndarray:
    """Stack of ``T^0 .. T^max_k`` by repeated multiplication."""
    out = np.empty((max_k + 1,) + T.shape)
    out[0] = np.eye(T.shape[0])
    for k in range(1, max_k + 1):
        out[k] = out[k - 1] @ T
    return out


@dataclass(frozen=True)
class DecayReport:
    label: int
    lc_prob: np.ndarray
    pi_target: float
    bound_C: float
    bound_lambda: float

    @property
    def deviation(self) -> np.ndarray:
        return self.lc_prob - self.pi_target

    def bound(self) -> np.ndarray:
        return self.bound_C * self.bound_lambda ** np.arange(len(self.lc_prob))


def lc_prob(t: LabelTransition, label: int, max_k: int) -> DecayReport:
    """Return probabilities ``(T^k)_ii`` for k = 0..max_k and an empirical geometric bound.

    The bound uses ``lambda = |lambda2|`` and the smallest ``C`` that makes
    ``|LC_prob(k) - pi_i| <= C lambda^k`` hold on the computed range (powers
    that underflow to zero are left out of the fit).
    """
    if not 0 <= label < t.num_labels:
        raise ValueError(f"label {label} out of range [0, {t.num_labels})")
    powers = matrix_powers(t.T, max_k)
    values = powers[:, label, label].copy()
    values[0] = 1.0
    np.clip(values, 0.0, 1.0, out=values)
    lam = t.lambda2_modulus
    dev = np.abs(values - t.pi[label])
    scale = lam ** np.arange(max_k + 1)
    ok = scale > 1e-300
    C = float(np.max(dev[ok] / scale[ok]))
    if not math.isfinite(C):
        raise ArithmeticError("decay bound constant is not finite")
    return DecayReport(label=label, lc_prob=values, pi_target=float(t.pi[label]), bound_C=C, bound_lambda=lam)


@dataclass(frozen=True)
class MarkovProperties:
    row_stochastic: bool
    irreducible: bool
    aperiodic: bool
    period: int
    graph_connected: Optional[bool] = None


def _period(support: np.ndarray) -> int:
    """Period of the chain on the support digraph, via BFS levels from state 0."""
    c = support.shape[0]
    level = np.full(c, -1)
    level[0] = 0
    queue = [0]
    while queue:
        u = queue.pop(0)
        for v in np.flatnonzero(support[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
    diffs = [
        int(level[u] + 1 - level[v])
        for u, v in zip(*np.nonzero(support))
        if level[u] >= 0 and level[v] >= 0
    ]
    g = reduce(math.gcd, (abs(d) for d in diffs), 0)
    return g if g > 0 else 0


def markov_properties(t: LabelTransition, g: Optional[LabeledGraph] = None) -> MarkovProperties:
    T = t.T
    row_ok = bool((T >= 0).all() and np.abs(T.sum(1) - 1.0).max() <= ROW_TOL)
    support = T > 0
    ncomp, _ = csgraph.connected_components(sp.csr_matrix(support), directed=True, connection="strong")
    irreducible = ncomp == 1
    if np.all(np.diag(T) > 0):
        period = 1
    else:
        period = _period(support)
    connected = None
    if g is not None:
        from .graphcore import is_connected

        connected = is_connected(g)
    return MarkovProperties(row_ok, irreducible, period == 1, period, connected)


MC_CHUNKS = 16


def _walk_chunk(g, label_nodes, label_probs, start_label, max_k, walks, rng, resample):
    deg = g.degrees
    counts = np.zeros((max_k + 1, g.num_labels), dtype=np.int64)
    pos = rng.choice(label_nodes[start_label], size=walks, p=label_probs[start_label])
    counts[0] = np.bincount(g.labels[pos], minlength=g.num_labels)
    for k in range(1, max_k + 1):
        if resample and k > 1:
            # redraw each walker's node from its current label class, degree-weighted
            cur = g.labels[pos]
            for j in np.unique(cur):
                sel = np.flatnonzero(cur == j)
                pos[sel] = rng.choice(label_nodes[j], size=sel.size, p=label_probs[j])
        step = np.floor(rng.random(walks) * deg[pos]).astype(np.int64)
        pos = g.indices[g.indptr[pos] + step]
        counts[k] = np.bincount(g.labels[pos], minlength=g.num_labels)
    return counts


def monte_carlo_lc(
    g: LabeledGraph,
    start_label: int,
    max_k: int,
    walks: int,
    seed: int,
    mode: str = "lumped",
    uniform_start: bool = False,
    threads: int = 1,
) -> np.ndarray:
    """Estimate ``p_k(j | i)`` for k = 0..max_k by simulating walkers.

    Walkers start on label-``start_label`` nodes drawn proportionally to degree
    (uniformly with ``uniform_start``) and move with the node-level kernel.

    ``mode="lumped"`` redraws every walker's position from its current label
    class (degree-weighted) before each step, which samples the label-level
    chain exactly. ``mode="trajectory"`` keeps plain node trajectories; for
    k >= 2 it differs from ``T^k`` whenever the label process is not lumpable.

    Walks are split into a fixed number of independently seeded chunks, so the
    estimate does not depend on ``threads``. Returns a (max_k + 1, c) array.
    """
    if mode not in ("lumped", "trajectory"):
        raise ValueError(f"unknown mode {mode!r}")
    if walks < 1:
        raise ValueError("walks must be >= 1")
    require_connected(g)
    deg = g.degrees.astype(np.float64)
    label_nodes, label_probs = [], []
    for j in range(g.num_labels):
        nodes = np.flatnonzero(g.labels == j)
        w = np.ones(nodes.size) if uniform_start else deg[nodes]
        label_nodes.append(nodes)
        label_probs.append(w / w.sum() if w.sum() > 0 else None)
    if not 0 <= start_label < g.num_labels or label_nodes[start_label].size == 0:
        raise ValueError(f"no nodes with label {start_label}")
    if mode == "lumped" and uniform_start:
        raise ValueError("uniform_start only applies to mode='trajectory'")

    nchunks = min(MC_CHUNKS, walks)
    sizes = [walks // nchunks + (1 if i < walks % nchunks else 0) for i in range(nchunks)]
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(nchunks)]
    run = lambda args: _walk_chunk(
        g, label_nodes, label_probs, start_label, max_k, args[0], args[1], mode == "lumped"
    )
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, zip(sizes, rngs)))
    else:
        parts = [run(a) for a in zip(sizes, rngs)]
    total = sum(parts)
    return total / walks


def exact_trajectory_lc(g: LabeledGraph, start_label: int, max_k: int) -> np.ndarray:
    """Exact label occupancy of degree-started node trajectories, by propagating
    the node distribution through ``P``. Shape (max_k + 1, c)."""
    deg = g.degrees.astype(np.float64)
    mu = np.where(g.labels == start_label, deg, 0.0)
    mu /= mu.sum()
    P = sp.diags(1.0 / deg) @ g.adjacency()
    out = np.empty((max_k + 1, g.num_labels))
    for k in range(max_k + 1):
        out[k] = np.bincount(g.labels, weights=mu, minlength=g.num_labels)
        mu = P.T @ mu
    return out


def exact_transition(g: LabeledGraph) -> list:
    """Label transition matrix as nested lists of exact Fractions.

    Entries are integer edge counts over integer degree sums, so powers of
    this matrix carry no rounding error however small the deviations get.
    """
    from fractions import Fraction

    E = label_edge_counts(g).round().astype(np.int64)
    deg = degree_by_label(g).round().astype(np.int64)
    return [[Fraction(int(E[i, j]), int(deg[i])) for j in range(g.num_labels)] for i in range(g.num_labels)]


def exact_return_deviation(g: LabeledGraph, max_k: int) -> np.ndarray:
    """``max_i |(T^k)_ii - pi_i|`` for k = 0..max_k, computed in exact arithmetic
    and rounded to float only at the end."""
    from fractions import Fraction

    T = exact_transition(g)
    c = len(T)
    deg = degree_by_label(g).round().astype(np.int64)
    total = int(deg.sum())
    pi = [Fraction(int(d), total) for d in deg]
    P = [[Fraction(int(i == j)) for j in range(c)] for i in range(c)]
    out = np.empty(max_k + 1)
    for k in range(max_k + 1):
        out[k] = float(max(abs(P[i][i] - pi[i]) for i in range(c)))
        P = [[sum(P[i][m] * T[m][j] for m in range(c)) for j in range(c)] for i in range(c)]
    return out
