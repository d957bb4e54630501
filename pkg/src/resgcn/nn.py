"""Tiny reverse-mode autodiff over float64 numpy matrices, plus Adam.

Only the operators the detector needs are provided. Every operator checks
that its output is finite and raises :class:`NumericalError` otherwise, so
a NaN is reported at the op that produced it instead of propagating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError, ShapeError, StateError, TrainingError


class Tensor:
    """A 2-D float64 array that remembers how it was computed."""

    __slots__ = ("data", "grad", "requires_grad", "name", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _op=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.name = name
        self.op = _op
        self._parents = _parents
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        label = self.name or self.op or "leaf"
        return f"Tensor({label}, shape={self.shape})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, op, backward) -> Tensor:
    # any NaN/inf entry makes the sum non-finite
    if not np.isfinite(data.sum()):
        raise NumericalError(f"non-finite value produced by {op}")
    out = Tensor(data, _parents=parents, _op=op)
    if out.requires_grad:
        out._backward = backward
    return out


def _same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# operators


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ out.grad)

    return _result(a.data @ b.data, (a, b), "matmul", backward)


def spmm(s, h) -> Tensor:
    """Sparse constant times dense tensor. ``s`` may be a NormalizedAdjacency or scipy matrix."""
    mat = getattr(s, "matrix", s)
    if not sp.issparse(mat):
        raise TypeError("spmm expects a sparse left operand")
    h = as_tensor(h)
    if mat.shape[1] != h.shape[0]:
        raise ShapeError(f"spmm: cannot multiply {mat.shape} by {h.shape}")
    if not sp.isspmatrix_csr(mat):
        mat = sp.csr_matrix(mat)

    def backward(out):
        h._accumulate(mat.T @ out.grad)

    return _result(np.asarray(mat @ h.data), (h,), "spmm", backward)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "add")

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad)
        if b.requires_grad:
            b._accumulate(out.grad)

    return _result(a.data + b.data, (a, b), "add", backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "sub")

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad)
        if b.requires_grad:
            b._accumulate(-out.grad)

    return _result(a.data - b.data, (a, b), "sub", backward)


def mul(a, b) -> Tensor:
    """Elementwise (Hadamard) product."""
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "mul")

    def backward(out):
        if a.requires_grad:
            a._accumulate(out.grad * b.data)
        if b.requires_grad:
            b._accumulate(out.grad * a.data)

    return _result(a.data * b.data, (a, b), "mul", backward)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)

    def backward(out):
        a._accumulate(c * out.grad)

    return _result(c * a.data, (a,), "scale", backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0  # subgradient at 0 is 0

    def backward(out):
        x._accumulate(out.grad * mask)

    return _result(np.where(mask, x.data, 0.0), (x,), "relu", backward)


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)

    def backward(out):
        x._accumulate(out.grad * y * (1.0 - y))

    return _result(y, (x,), "sigmoid", backward)


def exp_neg(x, gamma: float) -> Tensor:
    """Elementwise ``exp(-gamma * x)``."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    x = as_tensor(x)
    y = np.exp(-gamma * x.data)

    def backward(out):
        x._accumulate(-gamma * y * out.grad)

    return _result(y, (x,), "exp_neg", backward)


def gram(z) -> Tensor:
    """``z @ z.T``."""
    z = as_tensor(z)

    def backward(out):
        z._accumulate((out.grad + out.grad.T) @ z.data)

    return _result(z.data @ z.data.T, (z,), "gram", backward)


def sq_frobenius(x) -> Tensor:
    """Squared Frobenius norm as a 1x1 tensor."""
    x = as_tensor(x)

    def backward(out):
        x._accumulate(2.0 * out.grad[0, 0] * x.data)

    return _result(np.array([[np.sum(x.data * x.data)]]), (x,), "sq_frobenius", backward)


def structure_error(adjacency, z, block_rows: int = 2048) -> Tensor:
    """``||A - sigmoid(z z^T)||_F^2`` evaluated in row blocks.

    Equivalent to ``sq_frobenius(sub(A, sigmoid(gram(z))))`` but never holds
    more than ``block_rows x n`` reconstruction entries at once; the backward
    pass recomputes each block instead of caching the dense matrix.
    """
    a = adjacency if sp.isspmatrix_csr(adjacency) else sp.csr_matrix(adjacency)
    z = as_tensor(z)
    n = z.shape[0]
    if a.shape != (n, n):
        raise ShapeError(f"structure_error: adjacency {a.shape} vs embedding {z.shape}")
    zd = z.data
    total = 0.0
    for lo in range(0, n, block_rows):
        hi = min(lo + block_rows, n)
        a_hat = _sigmoid(zd[lo:hi] @ zd.T)
        diff = a[lo:hi].toarray() - a_hat
        total += float(np.sum(diff * diff))

    def backward(out):
        g = np.zeros_like(zd)
        for lo in range(0, n, block_rows):
            hi = min(lo + block_rows, n)
            a_hat = _sigmoid(zd[lo:hi] @ zd.T)
            # d/dP of (A - sigmoid(P))^2 for P = z z^T, one row block
            gp = -2.0 * (a[lo:hi].toarray() - a_hat) * a_hat * (1.0 - a_hat)
            g[lo:hi] += gp @ zd
            g += gp.T @ zd[lo:hi]
        z._accumulate(out.grad[0, 0] * g)

    return _result(np.array([[total]]), (z,), "structure_error", backward)


# ---------------------------------------------------------------------------
# reverse pass


def _topological(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires grad."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise StateError("loss does not depend on any trainable tensor")
    order = _topological(loss)
    for node in order:
        if node._backward is not None:
            node.grad = None
    loss.grad = np.ones((1, 1))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node)


def gradients(loss: Tensor, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradients of ``loss`` for each named parameter; unused parameters get zeros."""
    for p in params.values():
        p.grad = None
    backward(loss)
    return {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }


# ---------------------------------------------------------------------------
# initialisation and optimisation


def glorot_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ShapeError(f"glorot_init needs positive dims, got ({rows}, {cols})")
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param), 0)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    states: dict[str, AdamState],
    lr: float = 0.01,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update, in place on ``params`` and ``states``.

    Gradients are validated for every parameter before anything is modified.
    """
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient for {name!r} has shape {g.shape}, expected {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
    for name, g in grads.items():
        st = states.setdefault(name, AdamState.zeros_like(params[name]))
        st.t += 1
        st.m *= beta1
        st.m += (1.0 - beta1) * g
        st.v *= beta2
        st.v += (1.0 - beta2) * (g * g)
        m_hat = st.m / (1.0 - beta1**st.t)
        v_hat = st.v / (1.0 - beta2**st.t)
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)
