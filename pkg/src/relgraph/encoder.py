"""GCN encoder with a projection head used inside the similarity function."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import tensormath as tm
from .graphcore import LabeledGraph
from .tensormath import Tensor

MIN_TAU = 0.01
ACTIVATIONS = ("relu", "prelu", "rrelu")


@dataclass(frozen=True)
class EncoderConfig:
    embed_dim: int = 64
    layers: int = 2
    activation: str = "prelu"
    tau_base: float = 0.5
    tau_spacing: float = 0.0
    hidden_dim: int = 0  # 0 means 2 * embed_dim for the first of two layers

    def __post_init__(self):
        if self.embed_dim <= 0:
            raise ValueError("embed_dim must be positive")
        if self.layers not in (1, 2):
            raise ValueError("layers must be 1 or 2")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")


@dataclass
class EncoderState:
    """Weights of f (GCN) and g (projection head) plus the normalized adjacency.

    ``params`` maps names to leaf tensors; ``layer_names`` and ``proj_names``
    give the order in which they are applied.
    """

    config: EncoderConfig
    norm_adj: sp.csr_matrix
    params: dict = field(default_factory=dict)
    num_nodes: int = 0

    @property
    def arrays(self) -> dict:
        return {k: t.data for k, t in self.params.items()}

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def grads(self) -> dict:
        return {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in self.params.items()}


def normalized_adjacency(g: LabeledGraph) -> sp.csr_matrix:
    """``D^-1/2 (A + I) D^-1/2`` with any stored self-loop counted once."""
    A = g.adjacency().tolil()
    A.setdiag(1.0)
    A = A.tocsr()
    d = np.asarray(A.sum(axis=1)).ravel()
    inv = 1.0 / np.sqrt(d)
    return (sp.diags(inv) @ A @ sp.diags(inv)).tocsr()


def _glorot(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def build_encoder(g: LabeledGraph, config: EncoderConfig, seed: int) -> EncoderState:
    if g.features is None:
        raise ValueError("graph has no node features; the encoder needs X")
    D = g.features.shape[1]
    d = config.embed_dim
    if d >= D:
        warnings.warn(f"embed_dim {d} is not smaller than feature dim {D}", stacklevel=2)
    rng = np.random.default_rng(seed)
    params = {}
    if config.layers == 1:
        dims = [D, d]
    else:
        dims = [D, config.hidden_dim or 2 * d, d]
    for i in range(config.layers):
        params[f"gcn{i}.weight"] = tm.parameter(_glorot(rng, dims[i], dims[i + 1]), f"gcn{i}.weight")
        if config.activation == "prelu":
            params[f"gcn{i}.slope"] = tm.parameter([[0.25]], f"gcn{i}.slope")
    params["proj0.weight"] = tm.parameter(_glorot(rng, d, d), "proj0.weight")
    params["proj0.bias"] = tm.parameter(np.zeros((1, d)), "proj0.bias")
    if config.activation == "prelu":
        params["proj0.slope"] = tm.parameter([[0.25]], "proj0.slope")
    params["proj1.weight"] = tm.parameter(_glorot(rng, d, d), "proj1.weight")
    params["proj1.bias"] = tm.parameter(np.zeros((1, d)), "proj1.bias")
    return EncoderState(config=config, norm_adj=normalized_adjacency(g), params=params, num_nodes=g.num_nodes)


def _act(state: EncoderState, prefix: str, x: Tensor) -> Tensor:
    return tm.activation(state.config.activation, x, state.params.get(f"{prefix}.slope"))


def forward(state: EncoderState, X) -> Tensor:
    """``H = act(A_hat act(A_hat X W0) W1)`` (one layer: ``act(A_hat X W0)``)."""
    X = X if isinstance(X, Tensor) else Tensor(X)
    if X.shape[0] != state.norm_adj.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows, graph has {state.norm_adj.shape[0]} nodes")
    W0 = state.params["gcn0.weight"]
    if X.shape[1] != W0.shape[0]:
        raise ValueError(f"X has {X.shape[1]} columns, encoder expects {W0.shape[0]}")
    h = X
    for i in range(state.config.layers):
        h = _act(state, f"gcn{i}", tm.spmm(state.norm_adj, h @ state.params[f"gcn{i}.weight"]))
    return h


def project(state: EncoderState, H: Tensor) -> Tensor:
    p = state.params
    z = _act(state, "proj0", tm.add(H @ p["proj0.weight"], p["proj0.bias"]))
    return tm.add(z @ p["proj1.weight"], p["proj1.bias"])


def theta(state: EncoderState, h_i, h_j) -> float:
    """Cosine similarity of the projected vectors."""
    zi = project(state, Tensor(np.reshape(h_i, (1, -1))))
    zj = project(state, Tensor(np.reshape(h_j, (1, -1))))
    return tm.cosine(zi, zj).item()


def hop_temperature(state_or_config, n: int) -> float:
    """``tau_base + (n - 1) * tau_spacing``, floored at 0.01."""
    cfg = state_or_config.config if isinstance(state_or_config, EncoderState) else state_or_config
    if n < 1:
        raise ValueError("hop index must be >= 1")
    return max(cfg.tau_base + (n - 1) * cfg.tau_spacing, MIN_TAU)


def embed(state: EncoderState, g: LabeledGraph) -> np.ndarray:
    """Pre-projection embeddings H for downstream evaluation."""
    if g.num_nodes != state.num_nodes:
        raise ValueError(f"graph has {g.num_nodes} nodes, encoder was built for {state.num_nodes}")
    if g.features is None:
        raise ValueError("graph has no node features")
    A = normalized_adjacency(g)
    if (A != state.norm_adj).nnz:
        raise ValueError("graph structure differs from the one the encoder was built on")
    return forward(state, g.features).data.copy()
