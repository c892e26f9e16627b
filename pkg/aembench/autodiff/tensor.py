"""Reverse-mode automatic differentiation over dense float64 arrays.

The graph is rebuilt on every forward pass (define-by-run). Each operation
returns a new `Tensor` that remembers its parents and a closure that pushes
the output gradient back to them. `Tensor.backward` walks the graph in
reverse topological order.

Gradients are overwritten, not accumulated: every call to `backward` first
clears the gradients of all nodes reachable from the loss.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp as _logsumexp

from aembench.errors import NumericError, ShapeError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]

_ids = itertools.count()


class Tensor:
    """A node in the differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "name", "node_id", "_parents", "_backward")
    # ndarray <op> Tensor dispatches to the Tensor's reflected operator.
    __array_ufunc__ = None

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: str = "",
        _parents: Tuple["Tensor", ...] = (),
    ):
        arr = np.array(data, dtype=np.float64)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self.node_id = next(_ids)
        self._parents = _parents
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    # ------------------------------------------------------------------
    # Basic properties
    # ------------------------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", [self.shape], "tensor is not a scalar")
        return float(self.data.item())

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    # ------------------------------------------------------------------
    # Backward pass
    # ------------------------------------------------------------------
    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeError("backward", [self.shape], "loss must be a scalar")

        topo: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        # Iterative DFS; deep MLP graphs overflow the recursion limit.
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if node.node_id in seen:
                continue
            seen.add(node.node_id)
            stack.append((node, True))
            for p in node._parents:
                if p.node_id not in seen:
                    stack.append((p, False))

        for node in topo:
            node.grad = np.zeros_like(node.data) if node.requires_grad else None

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ------------------------------------------------------------------
    # Operator sugar
    # ------------------------------------------------------------------
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return add(as_tensor(other), neg(self))

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        if isinstance(other, Tensor):
            return multiply(self, power(other, -1.0))
        return multiply(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return multiply(as_tensor(other), power(self, -1.0))

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __getitem__(self, key) -> "Tensor":
        return slice_(self, key)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str = "") -> Tensor:
    """A leaf tensor that receives gradients."""
    return Tensor(data, requires_grad=True, name=name)


def _make(data: np.ndarray, parents: Iterable[Tensor], backward) -> Tensor:
    parents = tuple(parents)
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents), _parents=parents)
    if out.requires_grad:
        out._backward = backward
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad and t.grad is not None:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, [a.shape, b.shape]) from None


# ----------------------------------------------------------------------
# Elementwise binary ops
# ----------------------------------------------------------------------
def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def multiply(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("multiply", a, b)

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: _accumulate(a, -g))


def power(a: ArrayLike, exponent: float) -> Tensor:
    a = as_tensor(a)
    p = float(exponent)

    def backward(g):
        _accumulate(a, g * p * a.data ** (p - 1.0))

    return _make(a.data**p, (a,), backward)


# ----------------------------------------------------------------------
# Linear algebra
# ----------------------------------------------------------------------
def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", [a.shape, b.shape])

    def backward(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), backward)


# ----------------------------------------------------------------------
# Elementwise unary ops
# ----------------------------------------------------------------------
def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: _accumulate(a, g * mask))


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: _accumulate(a, g * (1.0 - y * y)))


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: _accumulate(a, g * y))


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: _accumulate(a, g / a.data))


def square(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: _accumulate(a, 2.0 * g * a.data))


def sqrt(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    y = np.sqrt(a.data)
    return _make(y, (a,), lambda g: _accumulate(a, 0.5 * g / y))


def abs_(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _make(np.abs(a.data), (a,), lambda g: _accumulate(a, g * np.sign(a.data)))


def softplus(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    y = np.logaddexp(0.0, a.data)
    # d/dx log(1 + e^x) = sigmoid(x)
    sig = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(y, (a,), lambda g: _accumulate(a, g * sig))


# ----------------------------------------------------------------------
# Reductions
# ----------------------------------------------------------------------
def _expand(g: np.ndarray, shape: Tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % len(shape) for ax in axes)
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def sum_(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    y = a.data.sum(axis=axis, keepdims=keepdims)
    return _make(y, (a,), lambda g: _accumulate(a, _expand(g, a.shape, axis, keepdims).copy()))


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    y = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / max(y.size, 1)

    def backward(g):
        _accumulate(a, _expand(g, a.shape, axis, keepdims) / count)

    return _make(y, (a,), backward)


def logsumexp(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    y = _logsumexp(a.data, axis=axis)

    def backward(g):
        w = np.exp(a.data - np.expand_dims(y, axis))
        _accumulate(a, np.expand_dims(g, axis) * w)

    return _make(y, (a,), backward)


# ----------------------------------------------------------------------
# Structural ops
# ----------------------------------------------------------------------
def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        y = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("concat", [t.shape for t in ts]) from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def backward(g):
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return _make(y, ts, backward)


def slice_(a: ArrayLike, key) -> Tensor:
    """Basic or fancy indexing; the backward pass scatters with `np.add.at`."""
    a = as_tensor(a)
    try:
        y = a.data[key]
    except IndexError as e:
        raise ShapeError("slice", [a.shape], str(e)) from None

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        _accumulate(a, full)

    return _make(np.array(y, dtype=np.float64), (a,), backward)


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        y = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", [a.shape, tuple(shape)]) from None
    return _make(y, (a,), lambda g: _accumulate(a, g.reshape(a.shape)))


def soft_clamp(a: ArrayLike, bound: float) -> Tensor:
    """bound * tanh(a / bound)."""
    return multiply(tanh(multiply(a, 1.0 / bound)), bound)


# ----------------------------------------------------------------------
# Op-sequence interpreter
# ----------------------------------------------------------------------
OPS = {
    "matmul": matmul,
    "add": add,
    "multiply": multiply,
    "relu": relu,
    "tanh": tanh,
    "exp": exp,
    "log": log,
    "sum": sum_,
    "mean": mean,
    "square": square,
    "concat": lambda *ts, axis=-1: concat(ts, axis=axis),
    "slice": slice_,
    "softplus": softplus,
}


def forward_graph(inputs: Sequence[ArrayLike], program: Sequence[tuple]) -> Tensor:
    """Evaluate a straight-line op sequence.

    Each step is ``(op_name, operand_refs, kwargs)`` (kwargs optional). Operand
    refs index a value list that starts with `inputs` and grows by one per step.
    Non-integer refs are passed through as literal arguments (slice keys).
    """
    values: List[Tensor] = [as_tensor(x) for x in inputs]
    if not program:
        raise ValueError("forward_graph: empty program")
    for step in program:
        op, refs = step[0], step[1]
        kwargs = step[2] if len(step) > 2 else {}
        if op not in OPS:
            raise ValueError(f"forward_graph: unknown op {op!r}")
        args = [values[r] if isinstance(r, int) else r for r in refs]
        values.append(OPS[op](*args, **kwargs))
    return values[-1]


def check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {name}")
