import math

import numpy as np
import pytest

from relgraph import tensormath as tm
from relgraph.encoder import EncoderConfig, build_encoder, forward, hop_temperature
from relgraph.graphcore import build_graph, hop_sets
from relgraph.relloss import (
    HopIndex,
    LossConfig,
    SimCounter,
    count_sim_ops,
    listwise_ratio,
    loss_in,
    loss_list,
    loss_out,
    loss_pair,
    pairwise_ratio,
    relative_loss,
)
from relgraph.tensormath import Tensor

from conftest import brute_force_loss, connected_random_graph


def _setup(n=12, D=6, seed=0, k=2, p=0.15, dim=4, **enc):
    rng = np.random.default_rng(seed)
    g = connected_random_graph(rng, n, p, 2, features=rng.normal(size=(n, D)))
    s = build_encoder(g, EncoderConfig(embed_dim=dim, **enc), seed)
    return g, s


def _equal_state(n):
    """Path graph whose embeddings are all equal, so every theta is 1."""
    g = build_graph([(i, i + 1) for i in range(n - 1)], [i % 2 for i in range(n)],
                    features=np.ones((n, 5)))
    s = build_encoder(g, EncoderConfig(embed_dim=3), 0)
    return g, s, Tensor(np.tile([0.3, -0.2, 0.9], (n, 1)))


def test_loss_in_examples():
    assert loss_in([0.2], [0.2], 1.0) == pytest.approx(math.log(2), abs=1e-9)
    assert loss_in([0.7, 0.1], [], 0.5) == 0.0
    assert loss_in([1.0], [0.0], 0.5) == pytest.approx(-math.log(math.e ** 2 / (math.e ** 2 + 1)), abs=1e-9)
    assert loss_in([1.0], [0.0], 0.5) == pytest.approx(0.126928, abs=1e-6)
    with pytest.raises(ValueError):
        loss_in([], [1.0], 1.0)


def test_loss_out_examples():
    rng = np.random.default_rng(0)
    neg = rng.normal(size=4)
    assert loss_out([0.4], neg, 0.3) == pytest.approx(loss_in([0.4], neg, 0.3), abs=1e-15)
    assert loss_out([0.4, 0.4], neg, 0.3) == pytest.approx(2 * loss_out([0.4], neg, 0.3), abs=1e-15)
    pos = rng.normal(size=3)
    want = 0.0
    for p in pos:
        den = math.exp(p / 0.3) + sum(math.exp(x / 0.3) for x in neg)
        want -= math.log(math.exp(p / 0.3) / den)
    assert loss_out(pos, neg, 0.3) == pytest.approx(want, abs=1e-12)


def test_ratio_examples():
    g, s, H = _equal_state(3)
    hs = hop_sets(g, 0, 1)
    assert pairwise_ratio(s, H, 0, hs, 1, 1) == pytest.approx(0.5, abs=1e-12)
    hs2 = hop_sets(g, 0, 2)
    assert pairwise_ratio(s, H, 0, hs2, 1, 2) is None  # beyond set empty
    g4, s4, H4 = _equal_state(5)
    hs3 = hop_sets(g4, 0, 3)
    for n in range(1, 4):
        assert listwise_ratio(s4, H4, 0, hs3, n) == pytest.approx(1 / (3 - n + 2), abs=1e-12)
    assert listwise_ratio(s, H, 0, hop_sets(g, 0, 2), 2) == pytest.approx(1.0)


def test_closed_form_losses():
    g, s, H = _equal_state(3)
    rep = loss_list(s, H, g, LossConfig(k=1, alpha=1.0))
    assert rep.per_anchor_terms[0] == pytest.approx(math.log(2), abs=1e-9)
    g4, s4, H4 = _equal_state(4)
    rep = loss_pair(s4, H4, g4, LossConfig(k=2, alpha=1.0))
    assert rep.per_anchor_terms[0] == pytest.approx(3 * math.log(2) / 2, abs=1e-9)


def test_full_clamp_value_and_zero_gradient():
    g, s = _setup()
    alpha = 1e-6
    for variant in ("pair", "list"):
        s.zero_grad()
        H = forward(s, g.features)
        rep = relative_loss(s, H, LossConfig(k=2, alpha=alpha, variant=variant), g=g)
        assert rep.clamp_fraction == 1.0
        assert rep.value == pytest.approx(rep.term_count * -math.log(alpha) / 2, abs=1e-9)
        rep.loss.backward()
        for t in s.params.values():
            assert t.grad is None or not np.any(t.grad)


def test_clamp_acts_per_term():
    g, s = _setup(seed=3)
    H = forward(s, g.features)
    r1 = loss_list(s, H, g, LossConfig(k=2, alpha=1.0))
    alpha = float(np.median(r1.ratios))
    r2 = loss_list(s, H, g, LossConfig(k=2, alpha=alpha))
    want = -np.sum(np.log(np.minimum(r1.ratios, alpha))) / 2
    assert r2.value == pytest.approx(want, abs=1e-12)
    assert r2.clamp_fraction == pytest.approx(np.mean(r1.ratios >= alpha))


def test_vectorized_matches_reference_ratios():
    g, s = _setup(seed=2, k=3)
    H = forward(s, g.features)
    k = 3
    idx = HopIndex(g, k)
    rep = relative_loss(s, H, LossConfig(k=k, alpha=1.0, variant="pair"), hops=idx)
    ref = []
    for a in range(g.num_nodes):
        hs = hop_sets(g, a, k)
        for n in range(1, k + 1):
            for m in range(1, k - n + 2):
                r = pairwise_ratio(s, H, a, hs, n, m)
                if r is not None:
                    ref.append(r)
    assert np.allclose(np.sort(rep.ratios), np.sort(ref), atol=1e-12)


@pytest.mark.parametrize("variant", ["pair", "list"])
def test_matches_brute_force_with_temperature_spacing(variant):
    g, s = _setup(n=10, seed=7, tau_base=0.4, tau_spacing=0.1)
    H = forward(s, g.features)
    rep = relative_loss(s, H, LossConfig(k=2, alpha=0.6, variant=variant), g=g)
    want = brute_force_loss(s, H.data, g.edge_array(), g.num_nodes, 2, 0.6, variant,
                            lambda n: hop_temperature(s, n))
    assert rep.value == pytest.approx(want, abs=1e-10)


def test_ratios_in_unit_interval_and_finite():
    g, s = _setup(seed=1)
    H = Tensor(np.random.default_rng(0).normal(size=(12, 4)) * 1e3)
    for v in ("pair", "list"):
        rep = relative_loss(s, H, LossConfig(k=2, variant=v), g=g)
        assert np.all((rep.ratios > 0) & (rep.ratios <= 1))
        assert math.isfinite(rep.value)


def test_count_sim_ops_examples():
    assert count_sim_ops(2, [2, 4, 8], "pair") == (28, 14)
    assert count_sim_ops(2, [2, 4, 8], "list") == (26, 14)
    assert count_sim_ops(1, [5, 7], "pair")[0] == 12
    with pytest.raises(ValueError):
        count_sim_ops(2, [1, 2], "pair")


def test_counter_instrumentation_small():
    g, s, H = _equal_state(4)
    hs = hop_sets(g, 0, 2)
    c = SimCounter()
    for n in (1, 2):
        for m in range(1, 2 - n + 2):
            pairwise_ratio(s, H, 0, hs, n, m, counter=c)
    assert c.count == count_sim_ops(2, hs.sizes(), "pair")[0]


def test_beyond_sample_caps_set_sizes():
    g, s = _setup(n=30, p=0.05, seed=4)
    H = forward(s, g.features)
    full = relative_loss(s, H, LossConfig(k=1, variant="list"), g=g)
    capped = relative_loss(s, H, LossConfig(k=1, variant="list", beyond_sample=3), g=g)
    assert capped.cached_sim_op_count <= 6 * 30
    assert capped.cached_sim_op_count < full.cached_sim_op_count
    again = relative_loss(s, H, LossConfig(k=1, variant="list", beyond_sample=3), g=g)
    assert again.value == capped.value
    other = relative_loss(s, H, LossConfig(k=1, variant="list", beyond_sample=3), g=g, epoch=1)
    assert other.value != capped.value


def test_anchor_batch():
    g, s = _setup(n=20)
    H = forward(s, g.features)
    rep = relative_loss(s, H, LossConfig(k=2, anchor_batch=5), g=g)
    assert rep.anchors.size == 5 and np.all(np.diff(rep.anchors) > 0)


@pytest.mark.parametrize("variant", ["pair", "list"])
def test_descent_step_reduces_loss(variant):
    g, s = _setup(seed=6)
    cfg = LossConfig(k=2, alpha=1.0, variant=variant)
    rep = relative_loss(s, forward(s, g.features), cfg, g=g)
    rep.loss.backward()
    before = rep.value
    for t in s.params.values():
        if t.grad is not None:
            t.data -= 1e-3 * t.grad
    after = relative_loss(s, forward(s, g.features), cfg, g=g).value
    assert after < before


def test_config_validation():
    for bad in ({"k": 0}, {"alpha": 0.0}, {"alpha": 1.5}, {"variant": "x"}, {"beyond_sample": 0}):
        with pytest.raises(ValueError):
            LossConfig(**bad)
    with pytest.raises(ValueError):
        relative_loss(None, None, LossConfig(variant="in"))
