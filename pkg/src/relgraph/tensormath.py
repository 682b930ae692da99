"""Small dense reverse-mode autodiff on 2-D float64 arrays.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure pushing the upstream gradient back to them. Only what the encoder and
the contrastive losses need is here; broadcasting is limited to adding a
``1 x d`` row to an ``N x d`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

RRELU_LOWER = 1.0 / 8.0
RRELU_UPPER = 1.0 / 3.0
COSINE_EPS = 1e-12


class TapeError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_spent")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None,
                 _parents: tuple = (), _backward: Optional[Callable] = None):
        a = np.array(data, dtype=np.float64)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        elif a.ndim == 1:
            a = a.reshape(1, -1)
        elif a.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {a.shape}")
        self.data = a
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.name = name
        self._parents = _parents
        self._backward = _backward
        self._spent = False

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(_wrap(other), -1.0))

    def __mul__(self, c):
        return scale(self, c)

    __rmul__ = __mul__

    def backward(self, require: Iterable["Tensor"] = ()) -> None:
        """Populate ``.grad`` of every leaf that requires a gradient.

        The root must be 1 x 1. Calling backward twice on the same root
        without rebuilding the graph raises :class:`TapeError`, as does a
        tensor in ``require`` that the root does not depend on.
        """
        if self.data.shape != (1, 1):
            raise TapeError(f"backward() needs a scalar (1x1) root, got {self.shape}")
        if self._spent:
            raise TapeError("backward() already called on this graph; rebuild it first")
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        for leaf in require:
            if id(leaf) not in seen:
                raise TapeError(f"tensor {leaf.name or leaf!r} is not connected to the loss")
        grads = {id(self): np.ones((1, 1))}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg
        self._spent = True


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: Optional[str] = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return Tensor(a.data @ b.data, _parents=(a, b),
                  _backward=lambda g: (g @ b.data.T, a.data.T @ g))


def spmm(A, x: Tensor) -> Tensor:
    """Constant (possibly sparse) matrix times tensor."""
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"spmm shape mismatch: {A.shape} @ {x.shape}")
    out = A @ x.data
    out = np.asarray(out)
    return Tensor(out, _parents=(x,), _backward=lambda g: (np.asarray(A.T @ g),))


def transpose(a: Tensor) -> Tensor:
    return Tensor(a.data.T, _parents=(a,), _backward=lambda g: (g.T,))


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.shape == b.shape:
        return Tensor(a.data + b.data, _parents=(a, b), _backward=lambda g: (g, g))
    if b.shape == (1, a.shape[1]):
        return Tensor(a.data + b.data, _parents=(a, b),
                      _backward=lambda g: (g, g.sum(axis=0, keepdims=True)))
    raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")


def scale(a: Tensor, c: float) -> Tensor:
    return Tensor(a.data * c, _parents=(a,), _backward=lambda g: (g * c,))


def mul_const(a: Tensor, M) -> Tensor:
    """Elementwise product with a constant array of the same shape."""
    M = np.asarray(M, dtype=np.float64)
    if M.shape != a.shape:
        raise ValueError(f"mul_const shape mismatch: {a.shape} * {M.shape}")
    return Tensor(a.data * M, _parents=(a,), _backward=lambda g: (g * M,))


def total(a: Tensor) -> Tensor:
    """Sum of all entries, as a 1x1 tensor."""
    return Tensor(a.data.sum(), _parents=(a,), _backward=lambda g: (np.full(a.shape, g[0, 0]),))


def take_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)

    def back(g):
        out = np.zeros(a.shape)
        np.add.at(out, idx, g)
        return (out,)

    return Tensor(a.data[idx], _parents=(a,), _backward=back)


def relu(a: Tensor) -> Tensor:
    pos = a.data > 0
    return Tensor(np.where(pos, a.data, 0.0), _parents=(a,), _backward=lambda g: (g * pos,))


def leaky(a: Tensor, slope: float) -> Tensor:
    pos = a.data > 0
    return Tensor(np.where(pos, a.data, slope * a.data), _parents=(a,),
                  _backward=lambda g: (np.where(pos, g, slope * g),))


def prelu(a: Tensor, slope: Tensor) -> Tensor:
    """Leaky ReLU with a learnable 1x1 negative-side slope."""
    if slope.shape != (1, 1):
        raise ValueError("prelu slope must be 1x1")
    s = slope.data[0, 0]
    pos = a.data > 0

    def back(g):
        return np.where(pos, g, s * g), np.array([[np.sum(np.where(pos, 0.0, g * a.data))]])

    return Tensor(np.where(pos, a.data, s * a.data), _parents=(a, slope), _backward=back)


def rrelu_eval(a: Tensor, lower: float = RRELU_LOWER, upper: float = RRELU_UPPER) -> Tensor:
    """Randomized leaky ReLU in evaluation form: fixed slope at the range midpoint."""
    return leaky(a, 0.5 * (lower + upper))


def activation(name: str, x: Tensor, slope: Optional[Tensor] = None) -> Tensor:
    if name == "relu":
        return relu(x)
    if name == "prelu":
        if slope is None:
            raise ValueError("prelu needs a slope tensor")
        return prelu(x, slope)
    if name == "rrelu":
        return rrelu_eval(x)
    if name == "identity":
        return x
    raise ValueError(f"unknown activation {name!r}")


def row_normalize(a: Tensor, eps: float = COSINE_EPS) -> Tensor:
    """Scale each row to unit length using ``sqrt(|x|^2 + eps^2)`` as the norm."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    r = np.sqrt(np.sum(a.data ** 2, axis=1, keepdims=True) + eps * eps)
    y = a.data / r

    def back(g):
        return ((g - y * np.sum(g * y, axis=1, keepdims=True)) / r,)

    return Tensor(y, _parents=(a,), _backward=back)


def cosine(a: Tensor, b: Tensor, eps: float = COSINE_EPS) -> Tensor:
    """Cosine similarity of two 1 x d vectors, eps-regularized."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if a.shape != b.shape or a.shape[0] != 1:
        raise ValueError(f"cosine needs two 1 x d vectors, got {a.shape} and {b.shape}")
    return total(mul_rows(row_normalize(a, eps), row_normalize(b, eps)))


def mul_rows(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of two same-shape tensors."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} * {b.shape}")
    return Tensor(a.data * b.data, _parents=(a, b), _backward=lambda g: (g * b.data, g * a.data))


def logsumexp(a: Tensor) -> Tensor:
    """Row-wise log-sum-exp, N x 1."""
    return masked_logsumexp(a, np.ones(a.shape, dtype=bool))


def masked_logsumexp(a: Tensor, mask) -> Tensor:
    """Row-wise log-sum-exp over entries where ``mask`` is true.

    Rows with no selected entry yield 0 and receive no gradient; callers
    track those rows separately.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise ValueError(f"mask shape {mask.shape} does not match {a.shape}")
    x = np.where(mask, a.data, -np.inf)
    empty = ~mask.any(axis=1, keepdims=True)
    m = np.where(empty, 0.0, np.max(x, axis=1, keepdims=True))
    # every selected entry at -inf: the sum is zero and the result is -inf
    m = np.where(m == -np.inf, 0.0, m)
    with np.errstate(under="ignore"):
        s = np.sum(np.exp(x - m), axis=1, keepdims=True)
    out = np.where(empty, 0.0, m + np.log(np.where(empty, 1.0, s)))

    def back(g):
        with np.errstate(under="ignore"):
            p = np.where(mask, np.exp(np.where(mask, a.data, 0.0) - out), 0.0)
        return (p * g,)

    return Tensor(out, _parents=(a,), _backward=back)


def logaddexp(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    out = np.logaddexp(a.data, b.data)

    def back(g):
        return g * np.exp(a.data - out), g * np.exp(b.data - out)

    return Tensor(out, _parents=(a, b), _backward=back)


def clamp_max(a: Tensor, c: float) -> Tensor:
    """``min(a, c)``; gradient is zero where ``a > c`` (the unclamped branch wins ties)."""
    over = a.data > c
    return Tensor(np.where(over, c, a.data), _parents=(a,), _backward=lambda g: (np.where(over, 0.0, g),))


@dataclass
class AdamMoments:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


class NonFiniteGradient(FloatingPointError):
    pass


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    moments: AdamMoments,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
    decoupled: bool = False,
) -> None:
    """One bias-corrected Adam update, in place on ``params``.

    Weight decay is added to the gradient (L2) by default; ``decoupled=True``
    applies it directly to the weights instead.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for parameter {name!r}")
    moments.t += 1
    t = moments.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if weight_decay and not decoupled:
            g = g + weight_decay * p
        m = moments.m.get(name)
        v = moments.v.get(name)
        m = (1 - beta1) * g if m is None else beta1 * m + (1 - beta1) * g
        v = (1 - beta2) * g * g if v is None else beta2 * v + (1 - beta2) * g * g
        moments.m[name], moments.v[name] = m, v
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        if weight_decay and decoupled:
            p -= lr * weight_decay * p
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def hstack(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate tensors with equal row counts along columns."""
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ValueError("hstack needs equal row counts")
    widths = np.cumsum([0] + [p.shape[1] for p in parts])

    def back(g):
        return tuple(g[:, widths[i]:widths[i + 1]] for i in range(len(parts)))

    return Tensor(np.hstack([p.data for p in parts]), _parents=tuple(parts), _backward=back)
