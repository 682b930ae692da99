"""Full-batch training loop, checkpoints and key=value run configs."""

from __future__ import annotations

import dataclasses
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import dataio
from .encoder import EncoderConfig, EncoderState, build_encoder, embed, forward
from .graphcore import LabeledGraph
from .relloss import HopIndex, LossConfig, relative_loss
from .tensormath import AdamMoments, adam_step

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 1e-3
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss: LossConfig = field(default_factory=LossConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    seed: int = 0
    checkpoint_every: int = 0
    log_path: Optional[str] = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        for name in ("lr", "weight_decay"):
            v = getattr(self, name)
            if v and not 1e-8 <= v <= 1e-2:
                warnings.warn(f"{name}={v} is outside the usual [1e-8, 1e-2] range", stacklevel=3)


_SECTIONS = {"loss": LossConfig, "encoder": EncoderConfig}


def _coerce(typ, raw: str):
    if raw.lower() in ("none", ""):
        return None
    if typ in (bool, "bool"):
        return raw.lower() in ("1", "true", "yes", "on")
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_config_text(text: str) -> TrainConfig:
    """Build a TrainConfig from ``key = value`` lines.

    Keys of the loss and encoder sub-configs may be given bare
    (``alpha = 0.5``) or dotted (``loss.alpha = 0.5``). ``#`` starts a comment.
    """
    top, sub = {}, {name: {} for name in _SECTIONS}
    owner = {}
    for name, cls in _SECTIONS.items():
        for f in dataclasses.fields(cls):
            owner.setdefault(f.name, name)
    top_fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if "." in key:
            section, key = key.split(".", 1)
            if section not in _SECTIONS:
                raise ValueError(f"config line {lineno}: unknown section {section!r}")
        elif key in top_fields and key not in _SECTIONS:
            top[key] = _coerce(top_fields[key].type, val)
            continue
        elif key in owner:
            section = owner[key]
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        fields = {f.name: f for f in dataclasses.fields(_SECTIONS[section])}
        if key not in fields:
            raise ValueError(f"config line {lineno}: unknown key {section}.{key}")
        sub[section][key] = _coerce(fields[key].type, val)
    seed = top.get("seed", 0)
    loss = LossConfig(**{"seed": seed, **sub["loss"]})
    return TrainConfig(loss=loss, encoder=EncoderConfig(**sub["encoder"]), **top)


def load_config(path) -> TrainConfig:
    return parse_config_text(Path(path).read_text())


def config_to_dict(cfg: TrainConfig) -> dict:
    return dataclasses.asdict(cfg)


@dataclass
class TrainResult:
    state: EncoderState
    moments: AdamMoments
    history: list
    clamp_history: list
    epochs_done: int


def _param_norms(state: EncoderState) -> dict:
    return {k: float(np.linalg.norm(t.data)) for k, t in state.params.items()}


def train(
    g: LabeledGraph,
    cfg: TrainConfig,
    resume: Optional[TrainResult] = None,
    hops: Optional[HopIndex] = None,
    checkpoint_dir: Optional[str] = None,
    on_epoch: Optional[Callable[[int, object], None]] = None,
) -> TrainResult:
    """Run ``cfg.epochs`` epochs of forward, loss, backward and Adam.

    Randomness inside an epoch (anchor batches, neighbor sampling) is seeded
    from ``(seed, epoch)`` so a run restored from a checkpoint continues
    exactly as the uninterrupted run would. The graph is never modified.
    """
    if g.features is None:
        raise ValueError("training needs node features")
    if cfg.loss.variant not in ("pair", "list"):
        raise ValueError("training supports the 'pair' and 'list' variants")
    if hops is None:
        hops = HopIndex(g, cfg.loss.k, cfg.loss.include_unreachable)
    if resume is None:
        state = build_encoder(g, cfg.encoder, cfg.seed)
        result = TrainResult(state, AdamMoments(), [], [], 0)
    else:
        result = resume
    state = result.state
    X = g.features
    for epoch in range(result.epochs_done, cfg.epochs):
        state.zero_grad()
        H = forward(state, X)
        report = relative_loss(state, H, cfg.loss, hops=hops, epoch=epoch)
        value = report.value
        if not np.isfinite(value):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}; parameter norms {_param_norms(state)}")
        report.loss.backward()
        adam_step(
            state.arrays, state.grads(), result.moments, cfg.lr,
            cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay,
        )
        result.history.append(value)
        result.clamp_history.append(report.clamp_fraction)
        result.epochs_done = epoch + 1
        if on_epoch is not None:
            on_epoch(epoch, report)
        if checkpoint_dir and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(result, cfg, Path(checkpoint_dir) / f"checkpoint_{epoch + 1:05d}.npz")
    if cfg.log_path:
        write_history(result, cfg.log_path)
    return result


def write_history(result: TrainResult, path) -> None:
    dataio.write_csv_report(
        {
            "epoch": list(range(1, len(result.history) + 1)),
            "loss": result.history,
            "clamp_fraction": result.clamp_history,
        },
        path,
    )


def save_checkpoint(result: TrainResult, cfg: TrainConfig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {f"param/{k}": v for k, v in result.state.arrays.items()}
    arrays.update({f"adam_m/{k}": v for k, v in result.moments.m.items()})
    arrays.update({f"adam_v/{k}": v for k, v in result.moments.v.items()})
    meta = {
        "config": config_to_dict(cfg),
        "adam_t": result.moments.t,
        "epochs_done": result.epochs_done,
        "history": result.history,
        "clamp_history": result.clamp_history,
        "num_nodes": result.state.num_nodes,
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    loss = LossConfig(**d.pop("loss"))
    enc = EncoderConfig(**d.pop("encoder"))
    return TrainConfig(loss=loss, encoder=enc, **d)


def load_checkpoint(path, g: LabeledGraph) -> tuple:
    """Restore ``(TrainResult, TrainConfig)`` for graph ``g``."""
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        cfg = config_from_dict(meta["config"])
        if meta["num_nodes"] != g.num_nodes:
            raise ValueError(f"checkpoint is for {meta['num_nodes']} nodes, graph has {g.num_nodes}")
        state = build_encoder(g, cfg.encoder, cfg.seed)
        for k, t in state.params.items():
            t.data[...] = z[f"param/{k}"]
        moments = AdamMoments(
            m={k[len("adam_m/"):]: z[k].copy() for k in z.files if k.startswith("adam_m/")},
            v={k[len("adam_v/"):]: z[k].copy() for k in z.files if k.startswith("adam_v/")},
            t=meta["adam_t"],
        )
    result = TrainResult(state, moments, list(meta["history"]), list(meta["clamp_history"]), meta["epochs_done"])
    return result, cfg


__all__ = [
    "TrainConfig", "TrainResult", "TrainingDiverged", "train", "embed",
    "save_checkpoint", "load_checkpoint", "parse_config_text", "load_config",
]
