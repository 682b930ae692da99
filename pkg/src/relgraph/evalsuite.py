"""Frozen-embedding evaluation: linear probe, clustering NMI, Sim@5, hop similarity."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics import normalized_mutual_info_score

from .graphcore import LabeledGraph, distance_matrix, hop_masks

EPS = 1e-12


@dataclass(frozen=True)
class ProbeConfig:
    l2: float = 1e-4
    lr: float = 0.5
    steps: int = 500
    standardize: bool = True


@dataclass
class EvalReport:
    accuracy: float
    nmi: float
    sim_at_5: float
    hop_sim: list = field(default_factory=list)


def random_split(num_nodes: int, seed: int, train: float = 0.1, valid: float = 0.1) -> dict:
    rng = np.random.default_rng(seed)
    perm = rng.permutation(num_nodes)
    a = int(round(train * num_nodes))
    b = a + int(round(valid * num_nodes))
    return {"train": np.sort(perm[:a]), "valid": np.sort(perm[a:b]), "test": np.sort(perm[b:])}


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fit_logreg(X, y, num_classes: int, cfg: ProbeConfig = ProbeConfig()):
    """Multinomial logistic regression by full-batch gradient descent with L2.

    Returns ``(W, b)``. Starts from zeros, so the fit is deterministic.
    """
    n, d = X.shape
    W = np.zeros((d, num_classes))
    b = np.zeros(num_classes)
    Y = np.eye(num_classes)[y]
    for _ in range(cfg.steps):
        P = _softmax(X @ W + b)
        G = (P - Y) / n
        W -= cfg.lr * (X.T @ G + cfg.l2 * W)
        b -= cfg.lr * G.sum(axis=0)
    return W, b


def linear_probe(H, labels, splits: Mapping[str, np.ndarray], cfg: ProbeConfig = ProbeConfig()) -> float:
    """Test accuracy of a logistic-regression probe trained on the train split."""
    H = np.asarray(H, dtype=np.float64)
    labels = np.asarray(labels)
    tr, te = np.asarray(splits["train"]), np.asarray(splits["test"])
    if len(tr) == 0 or len(te) == 0:
        raise ValueError("train and test splits must be non-empty")
    if np.unique(labels[tr]).size < 2:
        raise ValueError("train split contains a single class")
    Xtr, Xte = H[tr], H[te]
    if cfg.standardize:
        mu = Xtr.mean(axis=0)
        sd = Xtr.std(axis=0)
        sd[sd < EPS] = 1.0
        Xtr, Xte = (Xtr - mu) / sd, (Xte - mu) / sd
    c = int(labels.max()) + 1
    W, b = fit_logreg(Xtr, labels[tr], c, cfg)
    pred = np.argmax(Xte @ W + b, axis=1)
    return float(np.mean(pred == labels[te]))


def nmi(a, b) -> float:
    """Arithmetic-mean normalized mutual information."""
    return float(normalized_mutual_info_score(a, b, average_method="arithmetic"))


def cluster_nmi(H, labels, c: Optional[int] = None, seed: int = 0) -> float:
    """k-means (k-means++ init, 10 restarts, best inertia) then NMI against labels."""
    H = np.asarray(H, dtype=np.float64)
    labels = np.asarray(labels)
    if c is None:
        c = int(np.unique(labels).size)
    if c < 2:
        raise ValueError("need at least 2 clusters")
    if H.shape[0] < c:
        raise ValueError(f"{H.shape[0]} points cannot form {c} clusters")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        km = KMeans(n_clusters=c, init="k-means++", n_init=10, random_state=seed).fit(H)
    return nmi(labels, km.labels_)


def cosine_matrix(H) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    Hn = H / np.sqrt(np.sum(H * H, axis=1, keepdims=True) + EPS * EPS)
    return Hn @ Hn.T


def sim_at_k(H, labels, k: int = 5) -> float:
    """Mean same-label fraction among each node's top-k cosine neighbors.

    Ties in cosine go to the smaller node id.
    """
    labels = np.asarray(labels)
    n = labels.size
    if n < k + 1:
        raise ValueError(f"need at least {k + 1} nodes")
    S = cosine_matrix(H)
    np.fill_diagonal(S, -np.inf)
    # stable sort on -S keeps ascending node id among equal similarities
    top = np.argsort(-S, axis=1, kind="stable")[:, :k]
    return float(np.mean(labels[top] == labels[:, None]))


def sim_at_5(H, labels) -> float:
    return sim_at_k(H, labels, 5)


@dataclass(frozen=True)
class HopSimilarity:
    hop: int
    mean: float
    q1: float
    median: float
    q3: float
    pairs: int


def hop_similarity(H, g: LabeledGraph, k: int, include_unreachable: bool = True) -> list:
    """Cosine similarity between anchors and their hop-n nodes, n = 1..k+1.

    Hop ``k + 1`` is the beyond set. Each entry summarizes all
    (anchor, hop-n node) pairs.
    """
    S = cosine_matrix(H)
    masks = hop_masks(distance_matrix(g), k, include_unreachable)
    out = []
    for j in range(k + 1):
        vals = S[masks[j]]
        if vals.size:
            q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
            out.append(HopSimilarity(j + 1, float(vals.mean()), float(q1), float(med), float(q3), int(vals.size)))
        else:
            nan = float("nan")
            out.append(HopSimilarity(j + 1, nan, nan, nan, nan, 0))
    return out


def evaluate(H, g: LabeledGraph, splits, k: int = 2, seed: int = 0,
             probe_cfg: ProbeConfig = ProbeConfig()) -> EvalReport:
    return EvalReport(
        accuracy=linear_probe(H, g.labels, splits, probe_cfg),
        nmi=cluster_nmi(H, g.labels, g.num_labels, seed),
        sim_at_5=sim_at_5(H, g.labels),
        hop_sim=hop_similarity(H, g, k),
    )
