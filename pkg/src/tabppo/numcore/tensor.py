"""Dense float64 tensors with reverse-mode automatic differentiation.

A dynamic tape: every op records its parents and a backward closure on the
output tensor. ``Tensor.backward()`` topologically sorts the tape reachable
from a scalar loss and visits each node exactly once, accumulating gradients
into ``.grad`` of tensors created with ``requires_grad=True``.

Design points:
  * float64 everywhere; shapes are plain numpy shapes.
  * broadcasting follows numpy; backward sums gradients over broadcast axes.
  * row-wise softmax / layer normalization go through the kernel backend
    (compiled extension when built, numpy otherwise).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class NumericalError(ArithmeticError):
    """Raised when a non-finite value surfaces where finiteness is required."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / collection)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def _from_op(data: np.ndarray, parents: Sequence["Tensor"],
                 backward: Callable[[np.ndarray], None]) -> "Tensor":
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # backward() is attached below (module-level _run_backward) so the
    # closures in the op definitions can reference Tensor freely.


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _run_backward(loss: Tensor) -> None:
    """Topologically sort the tape, then one reverse sweep visiting each node once."""
    if loss.data.size != 1:
        raise ValueError(f"backward() requires a scalar loss, got shape {loss.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, int]] = [(loss, 0)]
    while stack:
        node, state = stack.pop()
        if state == 1:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, 1))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, 0))
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        if node._backward is None:
            node._accumulate(grad)
            continue
        for parent, pgrad in node._backward(grad):
            if not parent.requires_grad:
                continue
            pid = id(parent)
            if pid in grads:
                grads[pid] = grads[pid] + pgrad
            else:
                grads[pid] = pgrad


Tensor.backward = _run_backward  # type: ignore[method-assign]


def tensor(value, requires_grad: bool = False) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value, requires_grad)


# -- elementwise arithmetic ----------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = tensor(a), tensor(b)
    out_data = a.data + b.data

    def backward(grad):
        return ((a, _unbroadcast(grad, a.data.shape)),
                (b, _unbroadcast(grad, b.data.shape)))

    return Tensor._from_op(out_data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = tensor(a), tensor(b)
    out_data = a.data - b.data

    def backward(grad):
        return ((a, _unbroadcast(grad, a.data.shape)),
                (b, _unbroadcast(-grad, b.data.shape)))

    return Tensor._from_op(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = tensor(a), tensor(b)
    out_data = a.data * b.data

    def backward(grad):
        return ((a, _unbroadcast(grad * b.data, a.data.shape)),
                (b, _unbroadcast(grad * a.data, b.data.shape)))

    return Tensor._from_op(out_data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    a, b = tensor(a), tensor(b)
    out_data = a.data / b.data

    def backward(grad):
        return ((a, _unbroadcast(grad / b.data, a.data.shape)),
                (b, _unbroadcast(-grad * a.data / (b.data * b.data), b.data.shape)))

    return Tensor._from_op(out_data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    a = tensor(a)

    def backward(grad):
        return ((a, -grad),)

    return Tensor._from_op(-a.data, (a,), backward)


def scale(a: Tensor, c: float) -> Tensor:
    a = tensor(a)
    c = float(c)

    def backward(grad):
        return ((a, grad * c),)

    return Tensor._from_op(a.data * c, (a,), backward)


def square(a: Tensor) -> Tensor:
    a = tensor(a)

    def backward(grad):
        return ((a, grad * 2.0 * a.data),)

    return Tensor._from_op(a.data * a.data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    a = tensor(a)
    out_data = np.exp(a.data)

    def backward(grad):
        return ((a, grad * out_data),)

    return Tensor._from_op(out_data, (a,), backward)


def log(a: Tensor) -> Tensor:
    a = tensor(a)
    out_data = np.log(a.data)

    def backward(grad):
        return ((a, grad / a.data),)

    return Tensor._from_op(out_data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    a = tensor(a)
    mask = a.data > 0

    def backward(grad):
        return ((a, grad * mask),)

    return Tensor._from_op(a.data * mask, (a,), backward)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; on ties the gradient flows to `a` (deterministic)."""
    a, b = tensor(a), tensor(b)
    take_a = a.data <= b.data

    def backward(grad):
        return ((a, _unbroadcast(grad * take_a, a.data.shape)),
                (b, _unbroadcast(grad * ~take_a, b.data.shape)))

    return Tensor._from_op(np.where(take_a, a.data, b.data), (a, b), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes through the interior and boundary."""
    a = tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)

    def backward(grad):
        return ((a, grad * inside),)

    return Tensor._from_op(np.clip(a.data, lo, hi), (a,), backward)


# -- reductions and shape ops --------------------------------------------


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    a = tensor(a)
    out_data = a.data.mean(axis=axis)
    if axis is None:
        n = a.data.size

        def backward(grad):
            return ((a, np.broadcast_to(grad / n, a.data.shape).copy()),)
    else:
        n = a.data.shape[axis]

        def backward(grad):
            g = np.expand_dims(grad, axis) / n
            return ((a, np.broadcast_to(g, a.data.shape).copy()),)

    return Tensor._from_op(out_data, (a,), backward)


def total(a: Tensor, axis: int | None = None) -> Tensor:
    """Sum over all elements or along one axis."""
    a = tensor(a)
    out_data = a.data.sum(axis=axis)
    if axis is None:

        def backward(grad):
            return ((a, np.broadcast_to(grad, a.data.shape).copy()),)
    else:

        def backward(grad):
            g = np.expand_dims(grad, axis)
            return ((a, np.broadcast_to(g, a.data.shape).copy()),)

    return Tensor._from_op(out_data, (a,), backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    a = tensor(a)

    def backward(grad):
        return ((a, grad.reshape(a.data.shape)),)

    return Tensor._from_op(a.data.reshape(shape), (a,), backward)


def permute(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    a = tensor(a)
    inverse = np.argsort(axes)

    def backward(grad):
        return ((a, grad.transpose(inverse)),)

    return Tensor._from_op(a.data.transpose(axes), (a,), backward)


def concat(parts: Iterable[Tensor], axis: int) -> Tensor:
    parts = [tensor(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        pieces = []
        for p, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * grad.ndim
            sl[axis] = slice(start, stop)
            pieces.append((p, grad[tuple(sl)]))
        return tuple(pieces)

    return Tensor._from_op(out_data, parts, backward)


# -- linear algebra -------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = tensor(a), tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(
            f"matmul requires >=2-D operands, got {a.shape} and {b.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"matmul inner dimensions disagree: {a.shape} x {b.shape}"
        )
    out_data = np.matmul(a.data, b.data)

    def backward(grad):
        ga = np.matmul(grad, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), grad)
        return ((a, _unbroadcast(ga, a.data.shape)),
                (b, _unbroadcast(gb, b.data.shape)))

    return Tensor._from_op(out_data, (a, b), backward)


# -- fused row-wise ops (kernel backend) ----------------------------------


def _rows_view(data: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(data.reshape(-1, data.shape[-1]))


def softmax(a: Tensor, check: bool = True) -> Tensor:
    """Numerically-stabilized softmax over the last axis."""
    a = tensor(a)
    if a.data.shape[-1] < 1:
        raise DimensionError("softmax needs at least one logit")
    if check and not np.isfinite(a.data).all():
        raise NumericalError("softmax received non-finite logits")
    flat = _rows_view(a.data)
    y = kernels.softmax_fwd(flat).reshape(a.data.shape)

    def backward(grad):
        g = kernels.softmax_bwd(
            _rows_view(y), _rows_view(np.ascontiguousarray(grad))
        )
        return ((a, g.reshape(a.data.shape)),)

    return Tensor._from_op(y, (a,), backward)


def layer_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance (no affine)."""
    a = tensor(a)
    flat = _rows_view(a.data)
    y, rstd = kernels.layernorm_fwd(flat, eps)

    def backward(grad):
        g = kernels.layernorm_bwd(
            y, rstd, _rows_view(np.ascontiguousarray(grad))
        )
        return ((a, g.reshape(a.data.shape)),)

    return Tensor._from_op(y.reshape(a.data.shape), (a,), backward)


# -- indexed ops ----------------------------------------------------------


def gather_rows(table: Tensor, idx: np.ndarray) -> Tensor:
    """Embedding lookup: rows of `table` selected by integer array `idx`.

    Output shape is idx.shape + (table.shape[1],). The backward pass
    scatter-adds only into the looked-up rows.
    """
    table = tensor(table)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError(
            f"gather_rows index out of range for table with "
            f"{table.data.shape[0]} rows"
        )
    out_data = table.data[idx]

    def backward(grad):
        g = np.zeros_like(table.data)
        kernels.scatter_add_rows(
            g,
            np.ascontiguousarray(idx.reshape(-1)),
            _rows_view(np.ascontiguousarray(grad)),
        )
        return ((table, g),)

    return Tensor._from_op(out_data, (table,), backward)


def gather_index(a: Tensor, idx: np.ndarray) -> Tensor:
    """Pick a[i, idx[i]] for each row i of a 2-D tensor."""
    a = tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(a.data.shape[0])
    out_data = a.data[rows, idx]

    def backward(grad):
        g = np.zeros_like(a.data)
        np.add.at(g, (rows, idx), grad)
        return ((a, g),)

    return Tensor._from_op(out_data, (a,), backward)


# -- parameters -----------------------------------------------------------


def init_uniform(shape: tuple[int, ...], fan_in: int,
                 rng: np.random.Generator) -> Tensor:
    """Trainable parameter drawn uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def zeros(shape: tuple[int, ...], requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def check_finite(t: Tensor, context: str) -> Tensor:
    if not np.isfinite(t.data).all():
        raise NumericalError(f"non-finite values in {context}")
    return t


# operator sugar on Tensor
Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__truediv__ = lambda self, other: div(self, other)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__matmul__ = lambda self, other: matmul(self, other)
