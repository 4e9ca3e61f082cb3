"""Minimal reverse-mode automatic differentiation over NumPy arrays.

A Tensor wraps a float64 ndarray and remembers how it was produced;
calling ``backward()`` on a scalar walks the graph in reverse
topological order (iteratively, so deep event chains cannot overflow the
interpreter stack) and accumulates gradients into every tensor that
requires them. Broadcasting follows NumPy rules with gradients summed
back over the broadcast axes.
"""

from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to ``shape`` after NumPy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100  # keep ndarray.__op__ from hijacking mixed expressions

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad) and _GRAD_ENABLED
        self._parents: tuple = ()
        self._backward = None

    # -- construction ---------------------------------------------------------

    @staticmethod
    def _result(data, parents, backward_fn) -> "Tensor":
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward_fn
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def detach(self) -> "Tensor":
        """Same values, no history."""
        return Tensor(self.data)

    def __array__(self, dtype=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = ensure_tensor(other)

        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor._result(self.data + other.data, (self, other), backward_fn)

    __radd__ = __add__

    def __sub__(self, other):
        other = ensure_tensor(other)

        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(-g, other.data.shape))

        return Tensor._result(self.data - other.data, (self, other), backward_fn)

    def __rsub__(self, other):
        return ensure_tensor(other) - self

    def __neg__(self):
        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(-g)

        return Tensor._result(-self.data, (self,), backward_fn)

    def __mul__(self, other):
        other = ensure_tensor(other)

        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return Tensor._result(self.data * other.data, (self, other), backward_fn)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = ensure_tensor(other)

        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(
                    _unbroadcast(-g * self.data / (other.data * other.data), other.data.shape)
                )

        return Tensor._result(self.data / other.data, (self, other), backward_fn)

    def __rtruediv__(self, other):
        return ensure_tensor(other) / self

    def __matmul__(self, other):
        other = ensure_tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul expects 2-d operands")

        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        return Tensor._result(self.data @ other.data, (self, other), backward_fn)

    @property
    def T(self) -> "Tensor":
        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(g.T)

        return Tensor._result(self.data.T, (self,), backward_fn)

    def __getitem__(self, key):
        def backward_fn(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                np.add.at(full, key, g)
                self._accumulate(full)

        return Tensor._result(self.data[key], (self,), backward_fn)

    # -- reductions -------------------------------------------------------------

    def sum(self, axis=None, keepdims=False) -> "Tensor":
        def backward_fn(g):
            if not self.requires_grad:
                return
            if axis is None:
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())
            else:
                expanded = g if keepdims else np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(expanded, self.data.shape).copy())

        return Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward_fn)

    def mean(self, axis=None, keepdims=False) -> "Tensor":
        if axis is None:
            count = self.data.size
        else:
            count = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- elementwise nonlinearities ------------------------------------------------

    def relu(self) -> "Tensor":
        mask = self.data > 0

        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(g * mask)

        return Tensor._result(self.data * mask, (self,), backward_fn)

    def sigmoid(self) -> "Tensor":
        value = 1.0 / (1.0 + np.exp(-self.data))

        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(g * value * (1.0 - value))

        return Tensor._result(value, (self,), backward_fn)

    def tanh(self) -> "Tensor":
        value = np.tanh(self.data)

        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(g * (1.0 - value * value))

        return Tensor._result(value, (self,), backward_fn)

    def exp(self) -> "Tensor":
        value = np.exp(self.data)

        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(g * value)

        return Tensor._result(value, (self,), backward_fn)

    def log(self) -> "Tensor":
        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(g / self.data)

        return Tensor._result(np.log(self.data), (self,), backward_fn)

    def cos(self) -> "Tensor":
        def backward_fn(g):
            if self.requires_grad:
                self._accumulate(-g * np.sin(self.data))

        return Tensor._result(np.cos(self.data), (self,), backward_fn)

    # -- backward pass ----------------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every requiring ancestor."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def ensure_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def concat(tensors, axis: int = -1) -> Tensor:
    """Concatenate tensors along an axis, routing gradients to each slice."""
    tensors = [ensure_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        for t, start, end in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(start, end)
                t._accumulate(g[tuple(index)])

    return Tensor._result(
        np.concatenate([t.data for t in tensors], axis=axis), tensors, backward_fn
    )


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically shifted softmax built from primitive ops."""
    shift = Tensor(np.max(x.data, axis=axis, keepdims=True))  # constant, no grad path
    exps = (x - shift).exp()
    return exps / exps.sum(axis=axis, keepdims=True)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shift = Tensor(np.max(x.data, axis=axis, keepdims=True))
    shifted = x - shift
    return shifted - shifted.exp().sum(axis=axis, keepdims=True).log()
