"""Relative-similarity contrastive losses over multi-hop neighborhoods.

For an anchor ``i`` with exact-hop sets ``S_1..S_k`` and beyond-set
``S_{k+1}``, write ``M_j = sum_{x in S_j} exp(theta(h_i, h_x) / tau)``.

pairwise    r_{n,m} = M_n / (M_n + M_{n+m}),   1 <= n <= k, 1 <= m <= k - n + 1
listwise    r_n     = M_n / sum_{j=n}^{k+1} M_j, 1 <= n <= k

Each loss sums ``-log(min(r, alpha)) / k`` over anchors and terms. The
temperature of a term is the one belonging to its numerator hop ``n``.
Terms whose sets are empty are skipped without changing the ``1/k`` factor.
All masses are handled in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import tensormath as tm
from .encoder import EncoderState, hop_temperature, project, theta
from .graphcore import HopSets, LabeledGraph, distance_matrix, hop_masks
from .tensormath import Tensor

VARIANTS = ("pair", "list", "in", "out")


@dataclass(frozen=True)
class LossConfig:
    k: int = 2
    alpha: float = 0.5
    variant: str = "list"
    beyond_sample: Optional[int] = None
    anchor_batch: Optional[int] = None
    include_unreachable: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.beyond_sample is not None and self.beyond_sample < 1:
            raise ValueError("beyond_sample must be >= 1")
        if self.anchor_batch is not None and self.anchor_batch < 1:
            raise ValueError("anchor_batch must be >= 1")


@dataclass
class LossReport:
    loss: Tensor
    per_anchor_terms: np.ndarray
    anchors: np.ndarray
    ratios: np.ndarray
    clamp_fraction: float
    sim_op_count: int
    cached_sim_op_count: int
    term_count: int
    skipped_terms: int
    hop_ratio_means: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.loss.item()


class HopIndex:
    """Hop masks for every anchor, computed once per graph.

    ``masks[j - 1, i, x]`` is true when node ``x`` lies in hop ``j`` of anchor
    ``i`` (``j = k + 1`` is the beyond set).
    """

    def __init__(self, g: LabeledGraph, k: int, include_unreachable: bool = True):
        self.k = k
        self.num_nodes = g.num_nodes
        self.masks = hop_masks(distance_matrix(g), k, include_unreachable)
        self.masks.flags.writeable = False

    def sizes(self) -> np.ndarray:
        """(N, k + 1) set sizes."""
        return self.masks.sum(axis=2).T


def _sample_masks(masks: np.ndarray, cap: int, rng) -> np.ndarray:
    """Keep at most ``cap`` uniformly chosen members of every (hop, anchor) set."""
    keys = np.where(masks, rng.random(masks.shape), np.inf)
    if cap >= masks.shape[-1]:
        return masks
    kth = np.partition(keys, cap - 1, axis=-1)[..., cap - 1:cap]
    return masks & (keys <= kth)


def _prepare(hops, g, cfg: LossConfig):
    if hops is None:
        if g is None:
            raise ValueError("pass a graph or a HopIndex")
        hops = HopIndex(g, cfg.k, cfg.include_unreachable)
    if hops.k != cfg.k:
        raise ValueError(f"HopIndex was built for k={hops.k}, config has k={cfg.k}")
    return hops


def relative_loss(
    state: EncoderState,
    H: Tensor,
    cfg: LossConfig,
    g: Optional[LabeledGraph] = None,
    hops: Optional[HopIndex] = None,
    epoch: int = 0,
    anchors: Optional[Sequence[int]] = None,
) -> LossReport:
    """Differentiable pairwise or listwise loss for the anchors in one step."""
    if cfg.variant not in ("pair", "list"):
        raise ValueError("relative_loss handles the 'pair' and 'list' variants")
    hops = _prepare(hops, g, cfg)
    k = cfg.k
    N = hops.num_nodes
    rng = np.random.default_rng([cfg.seed, epoch])
    if anchors is None:
        if cfg.anchor_batch is not None and cfg.anchor_batch < N:
            anchors = np.sort(rng.choice(N, size=cfg.anchor_batch, replace=False))
        else:
            anchors = np.arange(N)
    anchors = np.asarray(anchors, dtype=np.int64)
    masks = hops.masks[:, anchors]
    if cfg.beyond_sample is not None:
        masks = _sample_masks(masks, cfg.beyond_sample, rng)
    sizes = masks.sum(axis=2)          # (k + 1, A)
    present = sizes > 0

    Zn = tm.row_normalize(project(state, H))
    S = tm.matmul(tm.take_rows(Zn, anchors), tm.transpose(Zn))   # (A, N) cosine values

    log_alpha = math.log(cfg.alpha)
    terms, valid_masks, costs = [], [], []
    hop_of_term = []
    for n in range(1, k + 1):
        scaled = tm.scale(S, 1.0 / hop_temperature(state, n))
        lse = {j: tm.masked_logsumexp(scaled, masks[j - 1]) for j in range(n, k + 2)}
        if cfg.variant == "pair":
            for m in range(1, k - n + 2):
                j = n + m
                log_r = tm.add(lse[n], tm.scale(tm.logaddexp(lse[n], lse[j]), -1.0))
                terms.append(log_r)
                valid_masks.append(present[n - 1] & present[j - 1])
                costs.append(sizes[n - 1] + sizes[j - 1])
                hop_of_term.append((n, j))
        else:
            cols = tm.hstack([lse[j] for j in range(n, k + 2)])
            denom = tm.masked_logsumexp(cols, present[n - 1:, :].T)
            terms.append(tm.add(lse[n], tm.scale(denom, -1.0)))
            valid_masks.append(present[n - 1])
            costs.append(sizes[n - 1:].sum(axis=0))
            hop_of_term.append((n, k + 1))

    valid = np.stack(valid_masks, axis=1).astype(np.float64)   # (A, T)
    log_r = tm.hstack(terms)
    clamped = tm.clamp_max(log_r, log_alpha)
    contrib = tm.scale(tm.mul_const(clamped, valid), -1.0 / k)
    loss = tm.total(contrib)

    vb = valid.astype(bool)
    ratio_vals = np.exp(log_r.data[vb])
    clamp_hits = log_r.data[vb] >= log_alpha
    cost = np.stack(costs, axis=1)
    cached = np.where(vb.any(axis=1), sizes.sum(axis=0), 0)
    hop_means = {}
    for t, key in enumerate(hop_of_term):
        if vb[:, t].any():
            hop_means[key] = float(np.mean(np.exp(log_r.data[vb[:, t], t])))
    return LossReport(
        loss=loss,
        per_anchor_terms=contrib.data.sum(axis=1),
        anchors=anchors,
        ratios=ratio_vals,
        clamp_fraction=float(clamp_hits.mean()) if clamp_hits.size else 0.0,
        sim_op_count=int(cost[vb].sum()),
        cached_sim_op_count=int(cached.sum()),
        term_count=int(vb.sum()),
        skipped_terms=int(vb.size - vb.sum()),
        hop_ratio_means=hop_means,
    )


def loss_pair(state, H, g=None, cfg: LossConfig = LossConfig(variant="pair"), **kw) -> LossReport:
    if cfg.variant != "pair":
        cfg = _with_variant(cfg, "pair")
    return relative_loss(state, H, cfg, g=g, **kw)


def loss_list(state, H, g=None, cfg: LossConfig = LossConfig(variant="list"), **kw) -> LossReport:
    if cfg.variant != "list":
        cfg = _with_variant(cfg, "list")
    return relative_loss(state, H, cfg, g=g, **kw)


def _with_variant(cfg: LossConfig, variant: str) -> LossConfig:
    from dataclasses import replace

    return replace(cfg, variant=variant)


def _lse(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return -math.inf
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def loss_in(pos, neg, tau: float) -> float:
    """Positives summed inside the log: ``-log(sum_P e / (sum_P e + sum_N e))``."""
    pos = np.asarray(pos, dtype=np.float64) / tau
    neg = np.asarray(neg, dtype=np.float64) / tau
    if pos.size == 0:
        raise ValueError("need at least one positive")
    lp = _lse(pos)
    return -(lp - np.logaddexp(lp, _lse(neg)))


def loss_out(pos, neg, tau: float) -> float:
    """Positives summed outside the log: one InfoNCE term per positive."""
    pos = np.asarray(pos, dtype=np.float64) / tau
    neg = np.asarray(neg, dtype=np.float64) / tau
    if pos.size == 0:
        raise ValueError("need at least one positive")
    ln = _lse(neg)
    return float(sum(-(p - np.logaddexp(p, ln)) for p in pos))


class SimCounter:
    """Counts similarity evaluations."""

    def __init__(self):
        self.count = 0


def _as_array(H) -> np.ndarray:
    return H.data if isinstance(H, Tensor) else np.asarray(H, dtype=np.float64)


def _log_mass(state, Hd, anchor, nodes, tau, counter):
    vals = []
    for x in nodes:
        vals.append(theta(state, Hd[anchor], Hd[x]) / tau)
        if counter is not None:
            counter.count += 1
    return _lse(vals)


def pairwise_ratio(
    state: EncoderState, H, anchor: int, hops: HopSets, n: int, m: int,
    counter: Optional[SimCounter] = None,
) -> Optional[float]:
    """``r_{n,m}`` for one anchor, one similarity call per set member.

    Returns None (term skipped) when either set is empty.
    """
    if not (1 <= n <= hops.k and 1 <= m <= hops.k - n + 1):
        raise ValueError(f"invalid hop pair n={n}, m={m} for k={hops.k}")
    a, b = hops.hop(n), hops.hop(n + m)
    if len(a) == 0 or len(b) == 0:
        return None
    Hd = _as_array(H)
    tau = hop_temperature(state, n)
    la = _log_mass(state, Hd, anchor, a, tau, counter)
    lb = _log_mass(state, Hd, anchor, b, tau, counter)
    return float(math.exp(la - np.logaddexp(la, lb)))


def listwise_ratio(
    state: EncoderState, H, anchor: int, hops: HopSets, n: int,
    counter: Optional[SimCounter] = None,
) -> Optional[float]:
    """``r_n`` for one anchor; the numerator's similarities are reused in the denominator."""
    if not 1 <= n <= hops.k:
        raise ValueError(f"invalid hop n={n} for k={hops.k}")
    if len(hops.hop(n)) == 0:
        return None
    Hd = _as_array(H)
    tau = hop_temperature(state, n)
    parts = [_log_mass(state, Hd, anchor, hops.hop(j), tau, counter) for j in range(n, hops.k + 2)]
    return float(math.exp(parts[0] - _lse(parts)))


def count_sim_ops(k: int, hop_sizes: Sequence[int], variant: str) -> tuple:
    """Similarity evaluations per anchor, ``(uncached, cached)``.

    ``hop_sizes`` lists ``|S_1| .. |S_{k+1}|``. Without caching, the pairwise
    loss needs ``k * sum_i |S_i|`` and the listwise loss
    ``sum_{i<=k} i |S_i| + k |S_{k+1}|``; with caching each similarity is
    computed once, ``sum_i |S_i|``.
    """
    sizes = [int(s) for s in hop_sizes]
    if len(sizes) != k + 1:
        raise ValueError(f"need k + 1 = {k + 1} hop sizes, got {len(sizes)}")
    if variant == "pair":
        uncached = k * sum(sizes)
    elif variant == "list":
        uncached = sum(i * s for i, s in enumerate(sizes[:k], 1)) + k * sizes[k]
    else:
        raise ValueError("variant must be 'pair' or 'list'")
    return uncached, sum(sizes)
