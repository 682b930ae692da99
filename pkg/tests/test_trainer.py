import numpy as np
import pytest

from relgraph.encoder import EncoderConfig, embed
from relgraph.relloss import LossConfig
from relgraph.synthgen import SbmSpec, generate_sbm
from relgraph.trainer import (
    TrainConfig,
    TrainingDiverged,
    load_checkpoint,
    parse_config_text,
    save_checkpoint,
    train,
)


@pytest.fixture(scope="module")
def small_graph():
    return generate_sbm(SbmSpec((30, 30), 0.2, 0.02, seed=1, feature_dim=16))


def _cfg(epochs=15, variant="list", **kw):
    return TrainConfig(epochs=epochs, lr=5e-3, loss=LossConfig(k=2, variant=variant),
                       encoder=EncoderConfig(embed_dim=8), seed=2, **kw)


def test_epochs_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)
    with pytest.warns(UserWarning):
        TrainConfig(lr=0.5)


def test_deterministic_history(small_graph):
    a = train(small_graph, _cfg())
    b = train(small_graph, _cfg())
    assert a.history == b.history
    assert embed(a.state, small_graph).tobytes() == embed(b.state, small_graph).tobytes()


@pytest.mark.parametrize("variant", ["pair", "list"])
def test_loss_decreases(small_graph, variant):
    r = train(small_graph, _cfg(epochs=40, variant=variant))
    assert r.history[-1] < r.history[0]


def test_graph_not_mutated(small_graph):
    before = (small_graph.indptr.copy(), small_graph.indices.copy(), small_graph.features.copy())
    train(small_graph, _cfg(epochs=3))
    assert np.array_equal(before[0], small_graph.indptr)
    assert np.array_equal(before[1], small_graph.indices)
    assert np.array_equal(before[2], small_graph.features)


def test_checkpoint_resume_is_bit_identical(small_graph, tmp_path):
    full = train(small_graph, _cfg(epochs=12))
    half = train(small_graph, _cfg(epochs=6))
    save_checkpoint(half, _cfg(epochs=6), tmp_path / "c.npz")
    restored, cfg = load_checkpoint(tmp_path / "c.npz", small_graph)
    resumed = train(small_graph, _cfg(epochs=12), resume=restored)
    assert resumed.history == full.history
    assert cfg.epochs == 6


def test_periodic_checkpoints_and_log(small_graph, tmp_path):
    cfg = _cfg(epochs=4, checkpoint_every=2, log_path=str(tmp_path / "h.csv"))
    train(small_graph, cfg, checkpoint_dir=str(tmp_path))
    assert sorted(p.name for p in tmp_path.glob("checkpoint_*.npz")) == ["checkpoint_00002.npz", "checkpoint_00004.npz"]
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "epoch,loss,clamp_fraction"


def test_non_finite_loss_aborts(small_graph):
    first = train(small_graph, _cfg(epochs=1))
    for t in first.state.params.values():
        t.data[:] = np.nan
    with pytest.raises(TrainingDiverged, match="epoch 1"):
        train(small_graph, _cfg(epochs=3), resume=first)


def test_config_text():
    cfg = parse_config_text(
        "# run\nepochs = 50\nlr = 0.002\nseed = 7\nalpha = 0.3\nloss.variant = pair\n"
        "embed_dim = 16\nencoder.tau_spacing = 0.05\nbeyond_sample = none\n"
    )
    assert cfg.epochs == 50 and cfg.lr == 0.002 and cfg.seed == 7
    assert cfg.loss.alpha == 0.3 and cfg.loss.variant == "pair" and cfg.loss.seed == 7
    assert cfg.encoder.embed_dim == 16 and cfg.encoder.tau_spacing == 0.05
    for bad in ("nonsense = 1", "loss.nonsense = 1", "foo.alpha = 1", "epochs 5"):
        with pytest.raises(ValueError):
            parse_config_text(bad)
