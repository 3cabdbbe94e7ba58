"""
Minimaler Tensor mit Reverse-Mode-Autodiff
Tape-basiert: jeder Op merkt sich seine Eltern und eine Backward-Closure, backward() läuft in
umgekehrter topologischer Reihenfolge. Enthält genau die Kernel, die das Netzwerk braucht.
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import get_dtype

logger = logging.getLogger(__name__)

Axis = Union[int, Tuple[int, ...], None]


class Tensor:
    """Dichtes, row-major Array mit optionalem Gradienten-Puffer."""

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, copy: bool = True):
        if isinstance(data, Tensor):
            data = data.data
        if copy:
            array = np.array(data, dtype=get_dtype())
        else:
            array = np.asarray(data, dtype=get_dtype())
        # 0-d bleibt 0-d, ascontiguousarray würde auf (1,) anheben
        self.data: np.ndarray = np.require(array, requirements="C")
        if any(dim <= 0 for dim in self.data.shape):
            raise ValueError(f"Tensor dimensions must be positive, got shape {self.data.shape}")
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    # --- convenience ---
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.data.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{req}{nm})"

    # --- operators ---
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def sum(self, axis: Axis = None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis: Axis = None, keepdims: bool = False) -> "Tensor":
        return tensor_mean(self, axis, keepdims)

    def abs(self) -> "Tensor":
        return tensor_abs(self)

    def square(self) -> "Tensor":
        return square(self)

    def backward(self) -> None:
        backward(self)


# ---------------------------------------------------------------------------
# Graph-Hilfsfunktionen

def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data, copy=False)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if not tensor.requires_grad:
        return
    grad = _unbroadcast(np.asarray(grad), tensor.data.shape).astype(tensor.data.dtype, copy=False)
    if tensor.grad is None:
        tensor.grad = np.array(grad)
    else:
        tensor.grad = tensor.grad + grad


def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    normalized = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise ValueError(f"Axis {ax} out of range for tensor with {ndim} dimensions")
        normalized.append(ax % ndim)
    return tuple(sorted(set(normalized)))


def _expand_reduced(grad: np.ndarray, axes: Tuple[int, ...], keepdims: bool, shape: Tuple[int, ...]) -> np.ndarray:
    if not keepdims:
        for ax in axes:
            grad = np.expand_dims(grad, ax)
    return np.broadcast_to(grad, shape)


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, finished = stack.pop()
        if finished:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """
    Reverse-Mode-Durchlauf ab einem skalaren Loss.

    Nach dem Aufruf hat jeder vom Loss erreichbare Tensor mit requires_grad einen vollständigen grad-Puffer.
    Gradienten werden akkumuliert; vor einem neuen Schritt zero_grad() auf den Blättern aufrufen.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = _topological_order(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grad(tensors) -> None:
    for tensor in tensors:
        tensor.grad = None


# ---------------------------------------------------------------------------
# Elementweise Ops

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def _backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.data + b.data, (a, b), _backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def _backward(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _result(a.data - b.data, (a, b), _backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def _backward(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _result(a.data * b.data, (a, b), _backward)


def neg(a: Tensor) -> Tensor:
    def _backward(g):
        _accumulate(a, -g)

    return _result(-a.data, (a,), _backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def _backward(g):
        _accumulate(a, g * mask)

    return _result(np.where(mask, a.data, 0.0), (a,), _backward)


def sigmoid(a: Tensor) -> Tensor:
    # tanh-Form ist numerisch stabil für große |x|
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def _backward(g):
        _accumulate(a, g * out * (1.0 - out))

    return _result(out, (a,), _backward)


def tensor_abs(a: Tensor) -> Tensor:
    # Subgradient 0 bei x == 0
    sign = np.sign(a.data)

    def _backward(g):
        _accumulate(a, g * sign)

    return _result(np.abs(a.data), (a,), _backward)


def square(a: Tensor) -> Tensor:
    def _backward(g):
        _accumulate(a, 2.0 * g * a.data)

    return _result(a.data * a.data, (a,), _backward)


_ELEMENTWISE = {"relu": relu, "sigmoid": sigmoid, "abs": tensor_abs, "square": square}


def elementwise(a: Tensor, f: str) -> Tensor:
    try:
        return _ELEMENTWISE[f](a)
    except KeyError:
        raise ValueError(f"Unknown elementwise function '{f}' (expected one of {sorted(_ELEMENTWISE)})")


# ---------------------------------------------------------------------------
# Form-Ops

def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    def _backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _result(a.data.reshape(tuple(shape)), (a,), _backward)


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def _backward(g):
        _accumulate(a, g.transpose(inverse))

    return _result(a.data.transpose(axes), (a,), _backward)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def _backward(g):
        for tensor, part in zip(tensors, np.split(g, splits, axis=axis)):
            _accumulate(tensor, part)

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, _backward)


# ---------------------------------------------------------------------------
# Reduktionen

def tensor_sum(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)

    def _backward(g):
        _accumulate(a, _expand_reduced(g, axes, keepdims, a.data.shape))

    return _result(a.data.sum(axis=axes, keepdims=keepdims), (a,), _backward)


def tensor_mean(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.data.shape[ax] for ax in axes]))

    def _backward(g):
        _accumulate(a, _expand_reduced(g, axes, keepdims, a.data.shape) / count)

    return _result(a.data.mean(axis=axes, keepdims=keepdims), (a,), _backward)


def tensor_max(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    peak = a.data.max(axis=axes, keepdims=True)
    # Bei Gleichstand wird der Gradient gleichmäßig verteilt
    mask = (a.data == peak).astype(a.data.dtype)
    mask /= mask.sum(axis=axes, keepdims=True)

    def _backward(g):
        _accumulate(a, _expand_reduced(g, axes, keepdims, a.data.shape) * mask)

    out = peak if keepdims else peak.reshape([d for i, d in enumerate(peak.shape) if i not in axes])
    return _result(out, (a,), _backward)


def _pooled_mean(a: Tensor, axis: Axis, keepdims: bool) -> Tensor:
    # Summe über sortierte Werte: Ergebnis hängt nicht von der Reihenfolge der Spalten ab
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.data.shape[ax] for ax in axes]))
    moved = np.moveaxis(a.data, axes, tuple(range(a.ndim - len(axes), a.ndim)))
    flat = np.sort(moved.reshape(moved.shape[:a.ndim - len(axes)] + (count,)), axis=-1)
    out = flat.sum(axis=-1) / count
    if keepdims:
        out = np.expand_dims(out, axes)

    def _backward(g):
        _accumulate(a, _expand_reduced(g, axes, keepdims, a.data.shape) / count)

    return _result(out, (a,), _backward)


def pool(a: Tensor, kind: str, axes: Axis, keepdims: bool = True) -> Tensor:
    """Mean- oder Max-Pooling über die angegebenen Achsen; beide invariant gegen Permutation der Einträge."""
    if kind == "mean":
        return _pooled_mean(a, axes, keepdims)
    if kind == "max":
        return tensor_max(a, axes, keepdims)
    raise ValueError(f"Unknown pooling kind '{kind}' (expected mean or max)")


# ---------------------------------------------------------------------------
# Lineare Algebra und Normalisierung

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs operands with at least 2 dimensions, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def _backward(g):
        _accumulate(a, g @ np.swapaxes(b.data, -1, -2))
        _accumulate(b, np.swapaxes(a.data, -1, -2) @ g)

    return _result(a.data @ b.data, (a, b), _backward)


def softmax(a: Tensor, axis: int) -> Tensor:
    (axis,) = _normalize_axes(axis, a.ndim)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=axis, keepdims=True)

    def _backward(g):
        _accumulate(a, out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return _result(out, (a,), _backward)


def l2norm(a: Tensor, axis: int) -> Tensor:
    """
    Normiert auf Einheitslänge entlang einer Achse.

    Raises:
        ValueError: Wenn ein Slice komplett null ist (Richtung undefiniert)
    """
    (axis,) = _normalize_axes(axis, a.ndim)
    norm = np.sqrt((a.data * a.data).sum(axis=axis, keepdims=True))
    if np.any(norm == 0):
        raise ValueError(f"l2norm: all-zero slice along axis {axis} has no direction")
    out = a.data / norm

    def _backward(g):
        _accumulate(a, (g - out * (g * out).sum(axis=axis, keepdims=True)) / norm)

    return _result(out, (a,), _backward)
