import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from relgraph import tensormath as tm
from relgraph.tensormath import AdamMoments, NonFiniteGradient, TapeError, Tensor, adam_step

from conftest import central_diff, rel_error

SEEDS = range(10)


def _away_from_kinks(rng, shape):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < 0.05, 0.3, x)


def _unary_cases(rng):
    A = sp.random(4, 5, density=0.5, random_state=int(rng.integers(1 << 30)), format="csr")
    mask = rng.random((4, 5)) < 0.6
    mask[0] = False  # one empty row
    return {
        "matmul_left": lambda x: tm.matmul(x, Tensor(rng_fixed[0])),
        "spmm": lambda x: tm.spmm(A, tm.transpose(x)),
        "transpose": tm.transpose,
        "scale": lambda x: tm.scale(x, -1.7),
        "take_rows": lambda x: tm.take_rows(x, [0, 2, 2, 3]),
        "relu": tm.relu,
        "leaky": lambda x: tm.leaky(x, 0.1),
        "rrelu_eval": tm.rrelu_eval,
        "row_normalize": tm.row_normalize,
        "logsumexp": tm.logsumexp,
        "masked_logsumexp": lambda x: tm.masked_logsumexp(x, mask),
        "clamp_max": lambda x: tm.clamp_max(x, 0.15),
        "hstack": lambda x: tm.hstack([x, tm.scale(x, 2.0)]),
        "add_row": lambda x: tm.add(Tensor(np.ones((3, 5))), tm.take_rows(x, [1])),
    }


rng_fixed = [np.random.default_rng(99).normal(size=(5, 3))]


@pytest.mark.parametrize("seed", SEEDS)
def test_unary_ops_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    for name, op in _unary_cases(rng).items():
        x0 = _away_from_kinks(rng, (4, 5))
        x0 = np.where(np.abs(x0 - 0.15) < 0.05, 0.4, x0)
        out_shape = op(Tensor(x0)).shape
        R = rng.normal(size=out_shape)
        x = tm.parameter(x0.copy())
        tm.total(tm.mul_const(op(x), R)).backward()
        num = central_diff(lambda: float(np.sum(op(Tensor(x0)).data * R)), x0)
        assert rel_error(x.grad, num) <= 1e-4, name


@pytest.mark.parametrize("seed", SEEDS)
def test_binary_ops_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    a0, b0 = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    cases = {
        "add": tm.add,
        "mul_rows": tm.mul_rows,
        "logaddexp": tm.logaddexp,
        "matmul": lambda a, b: tm.matmul(a, tm.transpose(b)),
        "cosine": lambda a, b: tm.cosine(tm.take_rows(a, [0]), tm.take_rows(b, [1])),
    }
    for name, op in cases.items():
        R = rng.normal(size=op(Tensor(a0), Tensor(b0)).shape)
        a, b = tm.parameter(a0.copy()), tm.parameter(b0.copy())
        tm.total(tm.mul_const(op(a, b), R)).backward()
        f = lambda: float(np.sum(op(Tensor(a0), Tensor(b0)).data * R))
        assert rel_error(a.grad, central_diff(f, a0)) <= 1e-4, name
        assert rel_error(b.grad, central_diff(f, b0)) <= 1e-4, name


@pytest.mark.parametrize("seed", SEEDS)
def test_prelu_gradients(seed):
    rng = np.random.default_rng(seed)
    x0 = _away_from_kinks(rng, (4, 3))
    s0 = np.array([[0.25]])
    R = rng.normal(size=(4, 3))
    x, s = tm.parameter(x0.copy()), tm.parameter(s0.copy())
    tm.total(tm.mul_const(tm.prelu(x, s), R)).backward()
    f = lambda: float(np.sum(tm.prelu(Tensor(x0), Tensor(s0)).data * R))
    assert rel_error(x.grad, central_diff(f, x0)) <= 1e-4
    assert rel_error(s.grad, central_diff(f, s0)) <= 1e-4


def test_cosine_examples():
    v = Tensor([[0.3, -2.0, 5.0]])
    assert abs(tm.cosine(v, v).item() - 1.0) <= 1e-12
    assert abs(tm.cosine(v, -v).item() + 1.0) <= 1e-12
    z = tm.cosine(Tensor([[0.0, 0.0]]), Tensor([[1.0, 0.0]]))
    assert z.item() == 0.0
    with pytest.raises(ValueError):
        tm.cosine(v, v, eps=0.0)


def test_cosine_gradient_at_tight_tolerance():
    a0, b0 = np.array([[0.4, -1.2, 2.0]]), np.array([[1.0, 0.5, -0.3]])
    a = tm.parameter(a0.copy())
    tm.cosine(a, Tensor(b0)).backward()
    num = central_diff(lambda: tm.cosine(Tensor(a0), Tensor(b0)).item(), a0)
    assert rel_error(a.grad, num) <= 1e-5


def test_zero_row_gradient_is_finite():
    x = tm.parameter(np.zeros((2, 3)))
    tm.total(tm.row_normalize(x)).backward()
    assert np.all(np.isfinite(x.grad))


def test_logsumexp_no_overflow():
    out = tm.logsumexp(Tensor([[1000.0, 1000.0]])).item()
    assert out == pytest.approx(1000 + math.log(2), abs=1e-12)
    assert tm.logsumexp(Tensor([[1e300, 1e300]])).item() == 1e300


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-700, 700), min_size=1, max_size=8))
def test_logsumexp_identity(xs):
    x = np.array(xs)
    m = x.max()
    assert tm.logsumexp(Tensor(x)).item() == pytest.approx(m + math.log(np.sum(np.exp(x - m))), rel=1e-12, abs=1e-12)


def test_sum_backward_gives_ones():
    W = tm.parameter(np.arange(6.0).reshape(2, 3))
    tm.total(W).backward()
    assert np.array_equal(W.grad, np.ones((2, 3)))


def test_backward_errors():
    W = tm.parameter(np.ones((2, 2)))
    loss = tm.total(W)
    loss.backward()
    with pytest.raises(TapeError):
        loss.backward()
    with pytest.raises(TapeError):
        (W @ W).backward()
    other = tm.parameter(np.ones((1, 1)))
    with pytest.raises(TapeError):
        tm.total(tm.scale(W, 2.0)).backward(require=[other])


def test_shape_errors():
    with pytest.raises(ValueError):
        tm.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ValueError):
        tm.add(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))


def test_adam_single_step_matches_hand_formula():
    p = {"w": np.array([[0.5]])}
    g = 0.2
    adam_step(p, {"w": np.array([[g]])}, AdamMoments(), lr=0.01)
    m_hat = (0.1 * g) / 0.1
    v_hat = (0.001 * g * g) / 0.001
    assert abs(p["w"][0, 0] - (0.5 - 0.01 * m_hat / (math.sqrt(v_hat) + 1e-8))) <= 1e-15


def test_adam_zero_gradient():
    p = {"w": np.array([[1.5, -2.0]])}
    adam_step(p, {"w": np.zeros((1, 2))}, AdamMoments(), lr=0.1)
    assert p["w"].tolist() == [[1.5, -2.0]]
    q = {"w": np.array([[1.5]])}
    adam_step(q, {"w": np.zeros((1, 1))}, AdamMoments(), lr=0.1, weight_decay=0.01, decoupled=True)
    assert q["w"][0, 0] == pytest.approx(1.5 - 0.1 * 0.01 * 1.5)


def test_adam_constant_gradient_direction():
    p = {"w": np.array([[0.0]])}
    mom = AdamMoments()
    for _ in range(50):
        adam_step(p, {"w": np.array([[3.0]])}, mom, lr=0.01)
    assert p["w"][0, 0] < -0.4


def test_adam_non_finite_names_parameter():
    with pytest.raises(NonFiniteGradient, match="bad"):
        adam_step({"bad": np.zeros((1, 1))}, {"bad": np.array([[np.nan]])}, AdamMoments(), lr=0.1)


def test_masked_logsumexp_propagates_nan():
    out = tm.masked_logsumexp(Tensor([[np.nan, 1.0], [2.0, 3.0]]), np.array([[True, True], [False, False]]))
    assert np.isnan(out.data[0, 0]) and out.data[1, 0] == 0.0
