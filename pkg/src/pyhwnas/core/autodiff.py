"""Reverse-mode automatic differentiation over dense float64 tensors.

Only the operations the supernet and childnets need are provided. Every op
builds its output eagerly and records a closure that pushes the output
gradient back to its parents; :func:`backward` replays those closures in
exact reverse creation order.
"""
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..utils.exceptions import ErrorCodes, ShapeError


_node_ids = itertools.count()



class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward", "_op", "_id", "_released")

    def __init__(self, data, requires_grad=False):
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._prev: tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[], None]] = None
        self._op = "leaf"
        self._id = next(_node_ids)
        self._released = False

    @classmethod
    def _from_op(cls, data, parents, op, backward=None) -> "Tensor":
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._op = op
        out._id = next(_node_ids)
        out._released = False
        if out.requires_grad:
            out._prev = tuple(parents)
            out._backward = backward(out) if backward is not None else None
        else:
            out._prev = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._op == "leaf"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g) -> None:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.data.shape:
            g = np.broadcast_to(g, self.data.shape)
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def backward(self) -> None:
        backward(self)

    # ─────────────── operator sugar ───────────────
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return _shift(self, float(other))

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return _scale(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, -other)
        return _shift(self, -float(other))

    def __rsub__(self, other):
        return _shift(-self, float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return _scale(self, float(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return NotImplemented
        return _divide(self, float(other))

    def __pow__(self, exponent):
        return power(self, float(exponent))

    def __getitem__(self, idx):
        return index(self, idx)

    def sum(self):
        return tensor_sum(self)

    def mean(self):
        return tensor_sum(self) / float(self.size)

    def relu(self):
        return relu(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op!r}, requires_grad={self.requires_grad})"



@dataclass(frozen=True, slots=True)
class GraphNode:
    op: str
    inputs: tuple[int, ...]
    output: int
    tensor: Tensor = field(repr=False, compare=False)



@dataclass(slots=True)
class ComputationGraph:
    nodes: list[GraphNode]

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def ops(self) -> list[str]:
        return [n.op for n in self.nodes]



def trace(root: Tensor) -> ComputationGraph:
    """Collect every differentiable node reachable from ``root`` in forward order."""
    seen: dict[int, Tensor] = {}
    stack = [root]
    while stack:
        t = stack.pop()
        if t._id in seen or not t.requires_grad:
            continue
        seen[t._id] = t
        stack.extend(t._prev)
    ordered = sorted(seen.values(), key=lambda t: t._id)
    return ComputationGraph([
        GraphNode(t._op, tuple(p._id for p in t._prev), t._id, t)
        for t in ordered
    ])



def backward(loss: Tensor) -> None:
    if loss.size != 1:
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            f"backward() needs a scalar loss, got shape {loss.shape}."
        )
    if loss._released:
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            "The computation graph of this loss was already consumed by a previous backward()."
        )
    if not loss.requires_grad:
        return

    graph = trace(loss)
    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(graph.nodes):
        t = node.tensor
        if t._backward is not None and t.grad is not None:
            t._backward()

    # Graphs are single use.
    for node in graph.nodes:
        t = node.tensor
        if not t.is_leaf:
            t._backward = None
            t._prev = ()
            t._released = True



def _check_same_shape(x: Tensor, y: Tensor, op: str) -> None:
    if x.shape != y.shape:
        raise ShapeError(f"{op}: shape mismatch {x.shape} vs {y.shape}.")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g



# ─────────────── elementwise ───────────────
def add(x: Tensor, y: Tensor) -> Tensor:
    _check_same_shape(x, y, "add")

    def make(out):
        def _backward():
            if x.requires_grad:
                x._accumulate(out.grad)
            if y.requires_grad:
                y._accumulate(out.grad)
        return _backward
    return Tensor._from_op(x.data + y.data, (x, y), "add", make)


def mul(x: Tensor, y: Tensor) -> Tensor:
    try:
        data = x.data * y.data
    except ValueError as ve:
        raise ShapeError(f"mul: shapes {x.shape} and {y.shape} do not broadcast.") from ve

    def make(out):
        def _backward():
            if x.requires_grad:
                x._accumulate(_unbroadcast(out.grad * y.data, x.shape))
            if y.requires_grad:
                y._accumulate(_unbroadcast(out.grad * x.data, y.shape))
        return _backward
    return Tensor._from_op(data, (x, y), "mul", make)


def _shift(x: Tensor, c: float) -> Tensor:
    def make(out):
        def _backward():
            x._accumulate(out.grad)
        return _backward
    return Tensor._from_op(x.data + c, (x,), "shift", make)


def _scale(x: Tensor, c: float) -> Tensor:
    def make(out):
        def _backward():
            x._accumulate(out.grad * c)
        return _backward
    return Tensor._from_op(x.data * c, (x,), "scale", make)


def _divide(x: Tensor, c: float) -> Tensor:
    def make(out):
        def _backward():
            x._accumulate(out.grad / c)
        return _backward
    return Tensor._from_op(x.data / c, (x,), "div", make)


def power(x: Tensor, p: float) -> Tensor:
    def make(out):
        def _backward():
            x._accumulate(out.grad * p * np.power(x.data, p - 1.0))
        return _backward
    return Tensor._from_op(np.power(x.data, p), (x,), "pow", make)


def clamp_min(x: Tensor, floor: float) -> Tensor:
    def make(out):
        def _backward():
            x._accumulate(out.grad * (x.data > floor))
        return _backward
    return Tensor._from_op(np.maximum(x.data, floor), (x,), "clamp_min", make)


def relu(x: Tensor) -> Tensor:
    def make(out):
        def _backward():
            x._accumulate(out.grad * (x.data > 0))
        return _backward
    return Tensor._from_op(np.maximum(x.data, 0.0), (x,), "relu", make)


def tensor_sum(x: Tensor) -> Tensor:
    def make(out):
        def _backward():
            x._accumulate(np.broadcast_to(out.grad, x.shape))
        return _backward
    return Tensor._from_op(np.sum(x.data), (x,), "sum", make)


def index(x: Tensor, idx) -> Tensor:
    def make(out):
        def _backward():
            full = np.zeros_like(x.data)
            np.add.at(full, idx, out.grad)
            x._accumulate(full)
        return _backward
    return Tensor._from_op(np.array(x.data[idx]), (x,), "index", make)


def softmax(x: Tensor, axis=-1) -> Tensor:
    """Softmax along ``axis``; ``-inf`` entries receive exactly zero probability."""
    z = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / np.sum(e, axis=axis, keepdims=True)

    def make(out):
        def _backward():
            g = out.grad
            x._accumulate(s * (g - np.sum(g * s, axis=axis, keepdims=True)))
        return _backward
    return Tensor._from_op(s, (x,), "softmax", make)



# ─────────────── network ops ───────────────
def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(
    x: Tensor,
    w: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """Grouped 2-D cross-correlation, ``x[N,C_in,H,W] * w[C_out,C_in/groups,K,K]``."""
    if x.ndim != 4:
        raise ShapeError(f"conv2d: input must be 4-D [N,C,H,W], got shape {x.shape}.")
    if w.ndim != 4:
        raise ShapeError(f"conv2d: weight must be 4-D [C_out,C_in/groups,K,K], got shape {w.shape}.")

    n, c_in, h, width = x.shape
    c_out, c_per_group, k, k2 = w.shape

    if groups < 1 or c_in % groups:
        raise ShapeError(f"conv2d: C_in={c_in} is not divisible by groups={groups}.")
    if c_out % groups:
        raise ShapeError(f"conv2d: C_out={c_out} is not divisible by groups={groups}.")
    if c_per_group * groups != c_in:
        raise ShapeError(
            f"conv2d: weight dim 1 is {c_per_group} but C_in/groups = {c_in}/{groups} = {c_in // groups}."
        )
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be square and odd, got {k}x{k2}.")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"conv2d: bias must have shape ({c_out},), got {bias.shape}.")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d: invalid stride={stride} or padding={padding}.")

    h_out = conv_output_size(h, k, stride, padding)
    w_out = conv_output_size(width, k, stride, padding)
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"conv2d: output spatial size {h_out}x{w_out} is empty for input {h}x{width}, K={k}.")

    xp = _pad(x.data, padding)
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows.reshape(n, groups, c_per_group, h_out, w_out, k, k)
    o_per_group = c_out // groups
    wg = w.data.reshape(groups, o_per_group, c_per_group, k, k)

    data = np.einsum("ngchwij,gocij->ngohw", windows, wg, optimize=True)
    data = data.reshape(n, c_out, h_out, w_out)
    if bias is not None:
        data = data + bias.data[None, :, None, None]

    parents = (x, w) if bias is None else (x, w, bias)

    def make(out):
        def _backward():
            gout = out.grad.reshape(n, groups, o_per_group, h_out, w_out)
            if w.requires_grad:
                dw = np.einsum("ngohw,ngchwij->gocij", gout, windows, optimize=True)
                w._accumulate(dw.reshape(w.shape))
            if bias is not None and bias.requires_grad:
                bias._accumulate(out.grad.sum(axis=(0, 2, 3)))
            if x.requires_grad:
                dwin = np.einsum("ngohw,gocij->ngchwij", gout, wg, optimize=True)
                dwin = dwin.reshape(n, c_in, h_out, w_out, k, k)
                dxp = np.zeros_like(xp)
                for i in range(k):
                    for j in range(k):
                        dxp[:, :, i:i + stride * h_out:stride, j:j + stride * w_out:stride] += dwin[..., i, j]
                x._accumulate(dxp[:, :, padding:padding + h, padding:padding + width])
        return _backward
    return Tensor._from_op(data, parents, "conv2d", make)


def channel_shuffle(x: Tensor, groups: int) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"channel_shuffle: input must be 4-D, got shape {x.shape}.")
    n, c, h, w = x.shape
    if groups < 1 or c % groups:
        raise ShapeError(f"channel_shuffle: C={c} is not divisible by groups={groups}.")

    data = x.data.reshape(n, groups, c // groups, h, w).transpose(0, 2, 1, 3, 4).reshape(n, c, h, w)

    def make(out):
        def _backward():
            g = out.grad.reshape(n, c // groups, groups, h, w).transpose(0, 2, 1, 3, 4).reshape(n, c, h, w)
            x._accumulate(g)
        return _backward
    return Tensor._from_op(data, (x,), "channel_shuffle", make)


def linear(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    if x.ndim != 2 or w.ndim != 2:
        raise ShapeError(f"linear: expected x[N,F] and w[F,O], got {x.shape} and {w.shape}.")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: feature dimension F differs, x has {x.shape[1]} and w has {w.shape[0]}.")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError(f"linear: bias must have shape ({w.shape[1]},), got {b.shape}.")

    data = x.data @ w.data
    if b is not None:
        data = data + b.data
    parents = (x, w) if b is None else (x, w, b)

    def make(out):
        def _backward():
            g = out.grad
            if x.requires_grad:
                x._accumulate(g @ w.data.T)
            if w.requires_grad:
                w._accumulate(x.data.T @ g)
            if b is not None and b.requires_grad:
                b._accumulate(g.sum(axis=0))
        return _backward
    return Tensor._from_op(data, parents, "linear", make)


def global_avg_pool(x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool: input must be 4-D [N,C,H,W], got shape {x.shape}.")
    n, c, h, w = x.shape

    def make(out):
        def _backward():
            g = out.grad[:, :, None, None] / float(h * w)
            x._accumulate(np.broadcast_to(g, x.shape))
        return _backward
    return Tensor._from_op(x.data.mean(axis=(2, 3)), (x,), "global_avg_pool", make)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over the batch of ``-log softmax(logits)[label]``."""
    if logits.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: logits must be [N,K], got {logits.shape}.")
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"softmax_cross_entropy: expected {n} labels, got shape {labels.shape}.")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, "softmax_cross_entropy: labels must be integers.")
    if n and (labels.min() < 0 or labels.max() >= k):
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            f"softmax_cross_entropy: label {int(bad)} is outside [0, {k})."
        )

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean()

    def make(out):
        def _backward():
            g = np.exp(log_probs)
            g[rows, labels] -= 1.0
            logits._accumulate(g * (out.grad / n))
        return _backward
    return Tensor._from_op(loss, (logits,), "softmax_cross_entropy", make)
