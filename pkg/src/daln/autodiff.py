"""Reverse-mode automatic differentiation over dense float64 matrices.

Every value is a 2-D ``numpy.ndarray``.  Operations record a :class:`Node` on
a :class:`Tape`; :meth:`Tape.backward` walks the tape in reverse creation
order and accumulates gradients into every node that requires them.

Parameters are long-lived leaf nodes that do not belong to any tape.  They
are picked up by whichever tape first consumes them, so that
:meth:`Tape.clear` can zero their gradients between steps.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import linalg

__all__ = [
    "Node",
    "Tape",
    "ShapeError",
    "LabelError",
    "as_matrix",
    "matmul",
    "matmul_bt",
    "transpose",
    "add",
    "add_row",
    "sub",
    "hadamard",
    "scale",
    "sum_all",
    "softmax_rows",
    "sigmoid",
    "relu",
    "tanh",
    "cross_entropy_rows",
    "binary_cross_entropy",
    "frobenius_norm",
    "nuclear_norm",
    "grad_reverse",
]

CE_EPS = 1e-12


class ShapeError(ValueError):
    pass


class LabelError(ValueError):
    pass


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce ``data`` to a finite, C-contiguous float64 matrix."""
    m = np.array(data, dtype=np.float64, copy=True)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(m)


class Node:
    """A value on the tape together with its accumulated gradient."""

    __slots__ = ("value", "grad", "parents", "requires_grad", "tape", "_backward", "__weakref__")

    def __init__(self, value, requires_grad: bool = False, *, name: str = "matrix"):
        self.value = as_matrix(value, name)
        self.grad = np.zeros_like(self.value)
        self.parents: tuple[Node, ...] = ()
        self.requires_grad = requires_grad
        self.tape: Tape | None = None
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 node, got {self.value.shape}")
        return float(self.value[0, 0])

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def __repr__(self) -> str:
        return f"Node(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Creation-ordered record of intermediate nodes."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: list[Node] = []
        self._param_ids: set[int] = set()

    def constant(self, value) -> Node:
        node = Node(value, requires_grad=False)
        node.tape = self
        self.nodes.append(node)
        return node

    def variable(self, value) -> Node:
        node = Node(value, requires_grad=True)
        node.tape = self
        self.nodes.append(node)
        return node

    def _watch(self, node: Node) -> None:
        if node.tape is None and id(node) not in self._param_ids:
            self._param_ids.add(id(node))
            self.params.append(node)

    def backward(self, root: Node) -> None:
        if root.value.shape != (1, 1):
            raise ShapeError(f"backward() needs a scalar root, got {root.value.shape}")
        if root.tape is not self:
            raise ValueError("root node was not recorded on this tape")
        root.grad = np.ones((1, 1))
        for node in reversed(self.nodes):
            if node._backward is not None and node.requires_grad:
                node._backward(node.grad)

    def clear(self) -> None:
        for node in self.nodes:
            node.zero_grad()
        for p in self.params:
            p.zero_grad()
        self.nodes = []
        self.params = []
        self._param_ids = set()


def _record(value: np.ndarray, parents: Sequence[Node], backward) -> Node:
    tape = next((p.tape for p in parents if p.tape is not None), None)
    if tape is None:
        raise ValueError("operation has no taped input; create inputs with Tape.constant()")
    for p in parents:
        if p.tape is not tape:
            if p.tape is None:
                tape._watch(p)
            else:
                raise ValueError("inputs belong to different tapes")
    out = Node.__new__(Node)
    out.value = value
    out.grad = np.zeros_like(value)
    out.parents = tuple(parents)
    out.requires_grad = any(p.requires_grad for p in parents)
    out.tape = tape
    out._backward = backward if out.requires_grad else None
    tape.nodes.append(out)
    return out


def matmul(a: Node, b: Node) -> Node:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.grad += g @ b.value.T
        if b.requires_grad:
            b.grad += a.value.T @ g

    return _record(a.value @ b.value, (a, b), backward)


def matmul_bt(a: Node, b: Node) -> Node:
    """``a @ b.T``; lets a taped input meet an untaped ``k x d`` weight directly."""
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"matmul_bt shape mismatch: {a.shape} @ {b.shape}.T")

    def backward(g):
        if a.requires_grad:
            a.grad += g @ b.value
        if b.requires_grad:
            b.grad += g.T @ a.value

    return _record(a.value @ b.value.T, (a, b), backward)


def transpose(x: Node) -> Node:
    def backward(g):
        x.grad += g.T

    return _record(np.ascontiguousarray(x.value.T), (x,), backward)


def add(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} + {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.grad += g
        if b.requires_grad:
            b.grad += g

    return _record(a.value + b.value, (a, b), backward)


def add_row(x: Node, row: Node) -> Node:
    """``x + row`` with the 1xn ``row`` broadcast over every row of ``x``."""
    if row.shape[0] != 1 or row.shape[1] != x.shape[1]:
        raise ShapeError(f"add_row shape mismatch: {x.shape} + {row.shape}")

    def backward(g):
        if x.requires_grad:
            x.grad += g
        if row.requires_grad:
            row.grad += g.sum(axis=0, keepdims=True)

    return _record(x.value + row.value, (x, row), backward)


def sub(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise ShapeError(f"sub shape mismatch: {a.shape} - {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.grad += g
        if b.requires_grad:
            b.grad -= g

    return _record(a.value - b.value, (a, b), backward)


def hadamard(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise ShapeError(f"hadamard shape mismatch: {a.shape} * {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.grad += g * b.value
        if b.requires_grad:
            b.grad += g * a.value

    return _record(a.value * b.value, (a, b), backward)


def scale(x: Node, c: float) -> Node:
    c = float(c)

    def backward(g):
        x.grad += c * g

    return _record(c * x.value, (x,), backward)


def sum_all(x: Node) -> Node:
    def backward(g):
        x.grad += g[0, 0]

    return _record(np.array([[x.value.sum()]]), (x,), backward)


def softmax_rows(logits: Node) -> Node:
    shifted = logits.value - logits.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        # row-wise J^T g with J_ij = p_i (delta_ij - p_j)
        logits.grad += p * (g - (g * p).sum(axis=1, keepdims=True))

    return _record(p, (logits,), backward)


def sigmoid(x: Node) -> Node:
    v = x.value
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)

    def backward(g):
        x.grad += g * out * (1.0 - out)

    return _record(out, (x,), backward)


def relu(x: Node) -> Node:
    mask = x.value > 0

    def backward(g):
        x.grad += g * mask

    return _record(np.where(mask, x.value, 0.0), (x,), backward)


def tanh(x: Node) -> Node:
    t = np.tanh(x.value)

    def backward(g):
        x.grad += g * (1.0 - t * t)

    return _record(t, (x,), backward)


def _check_labels(labels, b: int, k: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != b:
        raise LabelError(f"expected {b} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise LabelError("labels must be integers")
        y = y.astype(np.int64)
    bad = np.flatnonzero((y < 0) | (y >= k))
    if bad.size:
        i = int(bad[0])
        raise LabelError(f"label {y[i]} at index {i} outside [0, {k})")
    return y.astype(np.int64)


def cross_entropy_rows(probs: Node, labels) -> Node:
    """Mean negative log-likelihood of ``labels`` under row distributions ``probs``."""
    b, k = probs.shape
    y = _check_labels(labels, b, k)
    rows = np.arange(b)
    picked = probs.value[rows, y] + CE_EPS
    value = -np.log(picked).sum() / b

    def backward(g):
        probs.grad[rows, y] -= g[0, 0] / (b * picked)

    return _record(np.array([[value]]), (probs,), backward)


def binary_cross_entropy(p: Node, targets) -> Node:
    """Mean binary cross-entropy of probabilities ``p`` (bx1) against 0/1 targets."""
    b = p.shape[0]
    if p.shape[1] != 1:
        raise ShapeError(f"binary_cross_entropy expects a column, got {p.shape}")
    t = np.asarray(targets, dtype=np.float64).reshape(b, 1)
    pv = p.value
    value = -(t * np.log(pv + CE_EPS) + (1 - t) * np.log(1 - pv + CE_EPS)).sum() / b

    def backward(g):
        p.grad += g[0, 0] * (-(t / (pv + CE_EPS)) + (1 - t) / (1 - pv + CE_EPS)) / b

    return _record(np.array([[value]]), (p,), backward)


def frobenius_norm(z: Node) -> Node:
    norm = float(np.sqrt(np.sum(z.value * z.value)))

    def backward(g):
        if norm > 0.0:
            z.grad += g[0, 0] * z.value / norm

    return _record(np.array([[norm]]), (z,), backward)


def nuclear_norm(z: Node) -> Node:
    """Sum of singular values; backpropagates the subgradient ``U @ V.T``."""
    res = linalg.svd(z.value)
    value = float(res.s.sum())
    sub_grad = res.u @ res.v.T

    def backward(g):
        z.grad += g[0, 0] * sub_grad

    return _record(np.array([[value]]), (z,), backward)


def grad_reverse(x: Node, coeff: float) -> Node:
    """Identity forward; multiplies the incoming gradient by ``-coeff``."""
    if coeff < 0:
        raise ValueError(f"grad_reverse coeff must be nonnegative, got {coeff}")
    c = float(coeff)

    def backward(g):
        x.grad -= c * g

    return _record(x.value.copy(), (x,), backward)
