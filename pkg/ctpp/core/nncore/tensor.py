"""
Reverse-mode differentiable arrays.

Every operation returns a new Tensor that remembers its parents and a
backward function mapping the output gradient to one gradient per parent.
Intermediate gradients live in a per-call table during backward(), so
independent graphs that share leaf parameters can be differentiated from
different threads; only the final write into the leaves is serialized.
"""

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ctpp.core.exceptions import ShapeError

ArrayLike = Union["Tensor", np.ndarray, float, int]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_leaf_lock = threading.Lock()
_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Evaluate without recording the graph (inference, finite differences)."""
    previous = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


class Tensor:
    """A float64 array that participates in reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "__weakref__")

    # make ndarray (op) Tensor dispatch to the Tensor's reflected operator
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    # shape helpers
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # operators
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return getitem(self, index)

    # method forms looked up at call time, so the module functions stay patchable
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def sin(self) -> "Tensor":
        return sin(self)

    def tanh(self) -> "Tensor":
        return tanh(self)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)

    def square(self) -> "Tensor":
        return square(self)

    def sqrt(self) -> "Tensor":
        return sqrt(self)

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        leaf_grads = backprop(self, grad)
        with _leaf_lock:
            for leaf, g in leaf_grads:
                leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def make_node(data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """Wrap an op result; records the graph only when a parent needs gradients."""
    out = Tensor(data)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backprop(root: Tensor, grad: Optional[np.ndarray] = None) -> List[Tuple[Tensor, np.ndarray]]:
    """Run the backward pass and return (leaf, gradient) pairs without touching the leaves."""
    if not root.requires_grad:
        return []
    if grad is None:
        if root.size != 1:
            raise ShapeError(f"backward() needs an explicit gradient for shape {root.shape}")
        grad = np.ones_like(root.data)
    grads = {id(root): np.asarray(grad, dtype=np.float64)}
    leaves: List[Tuple[Tensor, np.ndarray]] = []
    for node in reversed(_topological_order(root)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            leaves.append((node, g))
            continue
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = parent_grad if key not in grads else grads[key] + parent_grad
    return leaves


def grad(loss: Tensor, params: Iterable[Tensor]) -> List[np.ndarray]:
    """Gradients of ``loss`` w.r.t. ``params``; zeros for unreachable ones."""
    params = list(params)
    found = {id(leaf): g for leaf, g in backprop(loss)}
    return [np.array(found[id(p)]) if id(p) in found else np.zeros_like(p.data) for p in params]


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise arithmetic


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return make_node(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
    )


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_node(out, (a,), lambda g: (g * out,))


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_node(np.log(a.data), (a,), lambda g: (g / a.data,))


def sin(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_node(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (np.tanh(0.5 * a.data) + 1.0)
    return make_node(out, (a,), lambda g: (g * out * (1.0 - out),))


def square(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_node(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def sqrt(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return make_node(out, (a,), lambda g: (0.5 * g / out,))


def clamp(a: ArrayLike, low: float, high: float) -> Tensor:
    """Clip to [low, high]; the gradient is zero where clipping is active."""
    a = as_tensor(a)
    inside = (a.data >= low) & (a.data <= high)
    return make_node(np.clip(a.data, low, high), (a,), lambda g: (g * inside,))


# reductions


def _expand(g: np.ndarray, shape: Tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    return make_node(
        a.data.sum(axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims),),
    )


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return sum_(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def logsumexp(a: ArrayLike, axis: int = -1, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    peak = np.max(a.data, axis=axis, keepdims=True)
    shifted = np.exp(a.data - peak)
    total = shifted.sum(axis=axis, keepdims=True)
    out = peak + np.log(total)
    weights = shifted / total
    return make_node(
        out if keepdims else np.squeeze(out, axis=axis),
        (a,),
        lambda g: ((g if keepdims else np.expand_dims(g, axis)) * weights,),
    )


def log_softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    probs = np.exp(out)
    return make_node(
        out,
        (a,),
        lambda g: (g - probs * g.sum(axis=axis, keepdims=True),),
    )


# linear algebra


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """``(..., k) @ (k, n)``; batched left operand against a single matrix."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    k, n = b.shape

    def backward(g):
        ga = g @ b.data.T
        gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
        return ga, gb

    return make_node(a.data @ b.data, (a, b), backward)


def pair_matvec(x: ArrayLike, w: ArrayLike) -> Tensor:
    """Row-wise vector-matrix products: ``out[p] = x[p] @ w[p]``."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 3 or x.ndim != 2 or x.shape[0] != w.shape[0] or x.shape[1] != w.shape[1]:
        raise ShapeError(f"pair_matvec expects (P, k) and (P, k, n), got {x.shape} and {w.shape}")
    return make_node(
        np.einsum("pk,pkn->pn", x.data, w.data),
        (x, w),
        lambda g: (np.einsum("pn,pkn->pk", g, w.data), np.einsum("pk,pn->pkn", x.data, g)),
    )


# shape manipulation


def reshape(a: ArrayLike, shape) -> Tensor:
    a = as_tensor(a)
    return make_node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def getitem(a: ArrayLike, index) -> Tensor:
    """Basic (slice/integer) indexing."""
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return make_node(a.data[index], (a,), backward)


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    return make_node(
        np.concatenate([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: tuple(np.split(g, bounds, axis=axis)),
    )


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    return make_node(
        np.stack([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: tuple(np.moveaxis(g, axis, 0)),
    )


def take_rows(table: ArrayLike, index: np.ndarray) -> Tensor:
    """Gather rows of a 2-D table: ``out[...] = table[index[...]]``."""
    table = as_tensor(table)
    index = np.asarray(index, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"take_rows expects a 2-D table, got {table.shape}")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, index.ravel(), g.reshape(-1, table.shape[1]))
        return (full,)

    return make_node(table.data[index], (table,), backward)


def scatter_rows(src: ArrayLike, index: np.ndarray, num_rows: int) -> Tensor:
    """Sum rows of ``src`` into ``num_rows`` buckets: ``out[index[p]] += src[p]``."""
    src = as_tensor(src)
    index = np.asarray(index, dtype=np.int64)
    out = np.zeros((num_rows,) + src.shape[1:])
    np.add.at(out, index, src.data)
    return make_node(out, (src,), lambda g: (g[index],))


def pick(a: ArrayLike, index: np.ndarray) -> Tensor:
    """Select one entry along the last axis: ``out[...] = a[..., index[...]]``."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)[..., None]

    def backward(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, index, g[..., None], axis=-1)
        return (full,)

    return make_node(np.take_along_axis(a.data, index, axis=-1)[..., 0], (a,), backward)
