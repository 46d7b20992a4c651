"""Minimal reverse-mode autodiff on numpy arrays.

A :class:`Tensor` wraps an ndarray and remembers how it was produced; calling
:meth:`Tensor.backward` on a scalar walks the recorded graph in reverse
topological order and accumulates gradients into every tensor that has
``requires_grad`` set.  Everything is batched: ops follow numpy broadcasting
and ``matmul`` semantics, and gradients are un-broadcast back to the operand
shapes.

Supported dtypes are float32 (training default) and float64 (used by the
finite-difference test harness).  Graph recording can be suspended with
:func:`no_grad` for evaluation rollouts.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ValidationError

__all__ = [
    "Tensor",
    "no_grad",
    "is_grad_enabled",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "relu",
    "exp",
    "log",
    "sqrt",
    "power",
    "xlogx",
    "tensor_sum",
    "mean",
    "tensor_max",
    "softmax",
    "concat",
    "stack",
    "reshape",
    "transpose",
    "broadcast_to",
    "take_rows",
    "permute_rows",
    "layer_norm",
    "linear",
    "fd_gradient",
    "gradcheck",
]

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Context manager that disables graph recording (evaluation mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """An ndarray plus the tape machinery for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    # -- construction helpers ------------------------------------------------
    @staticmethod
    def param(data, name: str) -> "Tensor":
        return Tensor(data, requires_grad=True, name=name)

    @staticmethod
    def const(data, dtype=None) -> "Tensor":
        arr = np.asarray(data, dtype=dtype) if dtype is not None else np.asarray(data)
        return Tensor(arr)

    # -- basic introspection ---------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"

    def detached(self) -> np.ndarray:
        """The underlying array, exiting the graph (no copy)."""
        return self.data

    # -- graph ------------------------------------------------------------------
    def _track(self, parents: tuple["Tensor", ...], backward) -> "Tensor":
        if _grad_enabled and any(p.requires_grad or p._parents for p in parents):
            self._parents = parents
            self._backward = backward
            self.requires_grad = True
        return self

    def zero_grad(self):
        self.grad = None

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Accumulate gradients of this (scalar) tensor w.r.t. the graph."""
        if seed is None:
            if self.data.size != 1:
                raise ValidationError(
                    f"backward() without a seed needs a scalar, got shape {self.shape}"
                )
            seed = np.ones_like(self.data)
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(seed, dtype=self.dtype)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward is not None:
                for parent, pg in node._backward(g):
                    if pg is None:
                        continue
                    key = id(parent)
                    if key in grads:
                        grads[key] = grads[key] + pg
                    else:
                        grads[key] = pg

    # -- operator sugar -----------------------------------------------------------
    def __add__(self, other):
        return add(self, _wrap(other, self.dtype))

    def __radd__(self, other):
        return add(_wrap(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _wrap(other, self.dtype))

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _wrap(other, self.dtype))

    def __rmul__(self, other):
        return mul(_wrap(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, _wrap(other, self.dtype))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other, self.dtype))


def _wrap(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    return out._track(parents, backward)


# ---------------------------------------------------------------------------
# Elementwise arithmetic.
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape)))

    return _make(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape)))

    return _make(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return (
            (a, _unbroadcast(g * b.data, a.shape)),
            (b, _unbroadcast(g * a.data, b.shape)),
        )

    return _make(a.data * b.data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return (
            (a, _unbroadcast(g / b.data, a.shape)),
            (b, _unbroadcast(-g * a.data / (b.data**2), b.shape)),
        )

    return _make(a.data / b.data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: ((a, -g),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        return ((a, g * mask),)

    return _make(np.where(mask, a.data, 0.0), (a,), backward)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward(g):
        return ((a, g * out_data),)

    return _make(out_data, (a,), backward)


def log(a: Tensor) -> Tensor:
    def backward(g):
        return ((a, g / a.data),)

    return _make(np.log(a.data), (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def backward(g):
        return ((a, g / (2.0 * out_data)),)

    return _make(out_data, (a,), backward)


def power(a: Tensor, exponent: float) -> Tensor:
    def backward(g):
        return ((a, g * exponent * a.data ** (exponent - 1.0)),)

    return _make(a.data**exponent, (a,), backward)


def xlogx(a: Tensor) -> Tensor:
    """Elementwise ``x * log(x)`` with the continuous extension 0 at x = 0.

    The entropy of a distribution with exact zeros (masked actions) is then
    ``-sum(xlogx(p))`` without NaNs; the gradient at masked entries is 0.
    """
    pos = a.data > 0.0
    safe = np.where(pos, a.data, 1.0)
    out_data = np.where(pos, a.data * np.log(safe), 0.0)

    def backward(g):
        return ((a, g * np.where(pos, np.log(safe) + 1.0, 0.0)),)

    return _make(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# Linear algebra.
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with numpy ``matmul`` broadcasting (>=2-D)."""
    if a.ndim < 2 or b.ndim < 2:
        raise ValidationError("matmul operands must be at least 2-D")

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return ((a, _unbroadcast(ga, a.shape)), (b, _unbroadcast(gb, b.shape)))

    return _make(a.data @ b.data, (a, b), backward)


# ---------------------------------------------------------------------------
# Reductions.
# ---------------------------------------------------------------------------


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.shape).copy()),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return ((a, np.broadcast_to(gg, a.shape).copy()),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]

    def backward(g):
        if axis is None:
            return ((a, np.broadcast_to(g / count, a.shape).copy()),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return ((a, np.broadcast_to(gg / count, a.shape).copy()),)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


def tensor_max(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    out_data = a.data.max(axis=axis, keepdims=True)
    mask = a.data == out_data
    counts = mask.sum(axis=axis, keepdims=True)

    def backward(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        return ((a, mask * (gg / counts)),)

    return _make(out_data if keepdims else out_data.squeeze(axis), (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max subtraction); -inf logits give exact 0."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        return ((a, out_data * (g - dot)),)

    return _make(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# Shape manipulation.
# ---------------------------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = tuple(tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        slicer = [slice(None)] * g.ndim
        outs = []
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            slicer[axis] = slice(start, stop)
            outs.append((t, g[tuple(slicer)]))
        return tuple(outs)

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)

    def backward(g):
        pieces = np.split(g, len(tensors), axis=axis)
        return tuple((t, p.squeeze(axis)) for t, p in zip(tensors, pieces))

    return _make(np.stack([t.data for t in tensors], axis=axis), tensors, backward)


def reshape(a: Tensor, shape) -> Tensor:
    def backward(g):
        return ((a, g.reshape(a.shape)),)

    return _make(a.data.reshape(shape), (a,), backward)


def transpose(a: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)

    def backward(g):
        return ((a, g.transpose(inverse)),)

    return _make(a.data.transpose(axes), (a,), backward)


def broadcast_to(a: Tensor, shape) -> Tensor:
    def backward(g):
        return ((a, _unbroadcast(g, a.shape)),)

    return _make(np.broadcast_to(a.data, shape).copy(), (a,), backward)


# ---------------------------------------------------------------------------
# Indexed gathers (batch-aware).
# ---------------------------------------------------------------------------


def take_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Select one row per batch element: (B, n, ...) x (B,) -> (B, ...)."""
    idx = np.asarray(idx, dtype=np.int64)
    batch = np.arange(a.shape[0])

    def backward(g):
        out = np.zeros_like(a.data)
        np.add.at(out, (batch, idx), g)
        return ((a, out),)

    return _make(a.data[batch, idx], (a,), backward)


def permute_rows(a: Tensor, perm: np.ndarray) -> Tensor:
    """Reorder rows per batch element: (B, n, d) x (B, n) -> (B, n, d)."""
    perm = np.asarray(perm, dtype=np.int64)
    batch = np.arange(a.shape[0])[:, None]

    def backward(g):
        out = np.zeros_like(a.data)
        np.add.at(out, (batch, perm), g)
        return ((a, out),)

    return _make(a.data[batch, perm], (a,), backward)


# ---------------------------------------------------------------------------
# Composite layers.
# ---------------------------------------------------------------------------


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """LayerNorm over the last axis with learnable gain/bias (composite op)."""
    mu = mean(a, axis=-1, keepdims=True)
    centered = sub(a, mu)
    var = mean(mul(centered, centered), axis=-1, keepdims=True)
    inv = div(centered, sqrt(add(var, Tensor.const(np.asarray(eps, dtype=a.dtype)))))
    return add(mul(inv, gain), bias)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ weight + bias`` (weight is (in, out))."""
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return out


# ---------------------------------------------------------------------------
# Finite-difference harness.
# ---------------------------------------------------------------------------


def fd_gradient(fn: Callable[[], Tensor], x: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar ``fn()`` w.r.t. ``x.data``."""
    grad = np.zeros_like(x.data)
    flat = x.data.ravel()
    gflat = grad.ravel()
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = float(fn().data)
        flat[k] = orig - h
        fm = float(fn().data)
        flat[k] = orig
        gflat[k] = (fp - fm) / (2.0 * h)
    return grad


def gradcheck(
    fn: Callable[[], Tensor],
    inputs: Iterable[Tensor],
    h: float = 1e-5,
    rel_tol: float = 1e-5,
    abs_tol: float = 1e-7,
) -> float:
    """Compare analytic and finite-difference gradients; returns max rel err.

    ``fn`` must rebuild the graph from ``inputs`` on every call and return a
    scalar.  Inputs should be float64 for the tolerances to be meaningful.

    Raises:
        AssertionError: If any input's gradient disagrees beyond tolerance.
    """
    for t in inputs:
        t.zero_grad()
    out = fn()
    out.backward()
    worst = 0.0
    for t in inputs:
        assert t.grad is not None, f"no gradient reached input {t!r}"
        numeric = fd_gradient(fn, t, h=h)
        denom = np.maximum(np.abs(numeric), np.abs(t.grad))
        err = np.abs(t.grad - numeric)
        rel = err / np.maximum(denom, 1.0)
        bad = (err > abs_tol) & (rel > rel_tol)
        assert not bad.any(), (
            f"gradient mismatch for {t!r}: max abs err {err.max():.3e}, "
            f"max rel err {rel.max():.3e}"
        )
        worst = max(worst, float(rel.max()))
    return worst
