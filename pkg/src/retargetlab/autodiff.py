"""Dense float64 tensors with taped reverse-mode differentiation.

A Tape records one node per primitive op (op name, input node ids, backward
closure over saved values). Tensors are immutable; a Tensor either lives on a
tape (node_id set) or is a constant that never receives gradients. Ops that see
only constants return constants, so the same forward code serves both recorded
and detached evaluation.

Broadcasting is deliberately restricted: two shapes are compatible when they
are equal or one is a suffix of the other (scalars included). The gradient of
the smaller operand is the sum over the extra leading axes.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteError, ShapeError

__all__ = [
    "Tape",
    "Tensor",
    "backward",
    "gradcheck",
    "add",
    "subtract",
    "multiply",
    "matmul",
    "sigmoid",
    "tensor_sum",
    "tensor_mean",
    "square",
    "concat",
    "slice_axis",
    "transpose",
    "reshape",
    "conv1d",
    "transposed_conv1d",
    "upsample_nearest",
    "gather_rows",
    "scatter_add_rows",
]


class _Node:
    __slots__ = ("op", "inputs", "backward")

    def __init__(self, op: str, inputs: tuple, backward):
        self.op = op
        self.inputs = inputs  # node ids; None marks a constant input
        self.backward = backward  # grad_out -> tuple of grads aligned with inputs


class Tape:
    """Append-only op record. Single-owner while recording."""

    def __init__(self):
        self._nodes: list[_Node] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def leaf(self, data, op: str = "leaf") -> "Tensor":
        arr = np.asarray(data, dtype=np.float64, order="C")
        self._nodes.append(_Node(op, (), None))
        return Tensor(arr, self, len(self._nodes) - 1)

    def _record(self, op: str, inputs: tuple, backward) -> int:
        self._nodes.append(_Node(op, inputs, backward))
        return len(self._nodes) - 1


class Tensor:
    """Immutable dense float64 value, optionally attached to a Tape node."""

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data: np.ndarray, tape: Tape | None = None, node_id: int | None = None):
        # immutability is by convention: no op ever writes to an input array
        self.data = data
        self.tape = tape
        self.node_id = node_id

    @staticmethod
    def constant(values) -> "Tensor":
        return Tensor(np.asarray(values, dtype=np.float64, order="C"))

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
        return float(self.data.reshape(()))

    def sum(self) -> "Tensor":
        return tensor_sum(self)

    def mean(self) -> "Tensor":
        return tensor_mean(self)

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return subtract(self, _lift(other))

    def __rsub__(self, other):
        return subtract(_lift(other), self)

    def __mul__(self, other):
        return multiply(self, _lift(other))

    def __rmul__(self, other):
        return multiply(_lift(other), self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __repr__(self):
        tag = "const" if self.tape is None else f"node {self.node_id}"
        return f"Tensor(shape={self.shape}, {tag})"


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor.constant(value)


def _resolve_tape(op: str, inputs: Sequence[Tensor]) -> Tape | None:
    tape = None
    for t in inputs:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif tape is not t.tape:
            raise ShapeError(f"{op}: inputs recorded on different tapes")
    return tape


def _emit(op: str, inputs: Sequence[Tensor], out_data: np.ndarray, backward) -> Tensor:
    if not np.isfinite(out_data).all():
        raise NonFiniteError(f"{op} produced non-finite values")
    tape = _resolve_tape(op, inputs)
    if tape is None:
        return Tensor(out_data)
    node_id = tape._record(op, tuple(t.node_id for t in inputs), backward)
    return Tensor(out_data, tape, node_id)


def _suffix_broadcast(op: str, a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    """Output shape when one operand shape is a suffix of the other."""
    if a == b:
        return a
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    if len(short) == len(long_) or (short and long_[len(long_) - len(short):] != short):
        raise ShapeError(f"{op}: shapes {a} and {b} are not suffix-compatible")
    return long_

def _reduce_to_shape(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out the extra leading axes a suffix-broadcast introduced."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


# ---------------------------------------------------------------------------
# elementwise and reduction primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    _suffix_broadcast("add", a.shape, b.shape)
    out = a.data + b.data
    sa, sb = a.shape, b.shape

    def back(g):
        return _reduce_to_shape(g, sa), _reduce_to_shape(g, sb)

    return _emit("add", (a, b), out, back)


def subtract(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    _suffix_broadcast("subtract", a.shape, b.shape)
    out = a.data - b.data
    sa, sb = a.shape, b.shape

    def back(g):
        return _reduce_to_shape(g, sa), _reduce_to_shape(-g, sb)

    return _emit("subtract", (a, b), out, back)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    _suffix_broadcast("multiply", a.shape, b.shape)
    out = a.data * b.data
    ad, bd = a.data, b.data
    sa, sb = a.shape, b.shape

    def back(g):
        return _reduce_to_shape(g * bd, sa), _reduce_to_shape(g * ad, sb)

    return _emit("multiply", (a, b), out, back)


def square(x: Tensor) -> Tensor:
    x = _lift(x)
    xd = x.data

    def back(g):
        return (2.0 * xd * g,)

    return _emit("square", (x,), xd * xd, back)


def sigmoid(x: Tensor) -> Tensor:
    x = _lift(x)
    xd = x.data
    out = np.empty_like(xd)
    pos = xd >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    out[~pos] = ex / (1.0 + ex)

    def back(g):
        return (g * out * (1.0 - out),)

    return _emit("sigmoid", (x,), out, back)


def tensor_sum(x: Tensor) -> Tensor:
    x = _lift(x)
    if x.size == 0:
        raise ShapeError("sum of an empty tensor")
    shape = x.shape

    def back(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _emit("sum", (x,), np.asarray(x.data.sum()), back)


def tensor_mean(x: Tensor) -> Tensor:
    x = _lift(x)
    if x.size == 0:
        raise ShapeError("mean of an empty tensor")
    shape, n = x.shape, x.size

    def back(g):
        return (np.broadcast_to(g / n, shape).copy(),)

    return _emit("mean", (x,), np.asarray(x.data.mean()), back)


# ---------------------------------------------------------------------------
# shape manipulation


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = [_lift(t) for t in tensors]
    if not ts:
        raise ShapeError("concat of zero tensors")
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _emit("concat", ts, out, back)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    x = _lift(x)
    n = x.shape[axis]
    if not (0 <= start <= stop <= n):
        raise ShapeError(f"slice [{start}:{stop}] out of range for axis {axis} of size {n}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    shape = x.shape

    def back(g):
        full = np.zeros(shape)
        full[index] = g
        return (full,)

    return _emit("slice", (x,), x.data[index].copy(), back)


def transpose(x: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    """Permute axes; default swaps the last two."""
    x = _lift(x)
    if x.ndim < 2 and axes is None:
        raise ShapeError(f"transpose needs ndim >= 2, got shape {x.shape}")
    if axes is None:
        axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose axes {axes} are not a permutation for shape {x.shape}")
    inverse = tuple(int(i) for i in np.argsort(axes))

    def back(g):
        return (np.ascontiguousarray(g.transpose(inverse)),)

    return _emit("transpose", (x,), np.ascontiguousarray(x.data.transpose(axes)), back)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = _lift(x)
    old = x.shape

    def back(g):
        return (g.reshape(old),)

    return _emit("reshape", (x,), x.data.reshape(shape).copy(), back)


# ---------------------------------------------------------------------------
# contraction and convolution


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two dims; batch dims follow the suffix rule."""
    a, b = _lift(a), _lift(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs ndim >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dims disagree for {a.shape} @ {b.shape}")
    _suffix_broadcast("matmul", a.shape[:-2], b.shape[:-2])
    out = np.matmul(a.data, b.data)
    ad, bd = a.data, b.data
    sa, sb = a.shape, b.shape

    def back(g):
        ga = _reduce_to_shape(np.matmul(g, bd.swapaxes(-1, -2)), sa)
        gb = _reduce_to_shape(np.matmul(ad.swapaxes(-1, -2), g), sb)
        return ga, gb

    return _emit("matmul", (a, b), out, back)


def _conv_windows(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    # (..., C, L_padded) -> (..., C, L_out, k), read-only strided view
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=-1)
    return win[..., ::stride, :]


def conv1d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """1-d convolution over the last dim with full channel mixing.

    x: (..., in_ch, L); kernel: (out_ch, in_ch, k); zero padding on both ends.
    Output length is (L + 2*padding - k) // stride + 1.
    """
    x, kernel = _lift(x), _lift(kernel)
    if x.ndim < 2 or kernel.ndim != 3:
        raise ShapeError(f"conv1d: got input {x.shape}, kernel {kernel.shape}")
    out_ch, in_ch, k = kernel.shape
    if x.shape[-2] != in_ch:
        raise ShapeError(
            f"conv1d: input has {x.shape[-2]} channels, kernel expects {in_ch}"
        )
    length = x.shape[-1]
    if length + 2 * padding < k:
        raise ShapeError(f"conv1d: length {length} too short for kernel {k} pad {padding}")
    pad_spec = [(0, 0)] * (x.ndim - 1) + [(padding, padding)]
    xp = np.pad(x.data, pad_spec)
    win = _conv_windows(xp, k, stride)  # (..., in_ch, L_out, k)
    out = np.einsum("oik,...itk->...ot", kernel.data, win, optimize=True)
    kd = kernel.data
    l_out = out.shape[-1]
    padded_len = xp.shape[-1]
    x_shape = x.shape

    def back(g):
        gk = np.einsum("...ot,...itk->oik", g, win, optimize=True)
        gxp = np.zeros(x_shape[:-1] + (padded_len,))
        for kk in range(k):
            seg = np.einsum("...ot,oi->...it", g, kd[:, :, kk], optimize=True)
            gxp[..., kk : kk + stride * l_out : stride] += seg
        gx = gxp[..., padding : padded_len - padding] if padding else gxp
        return np.ascontiguousarray(gx), gk

    return _emit("conv1d", (x, kernel), out, back)


def transposed_conv1d(
    x: Tensor,
    kernel: Tensor,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Transposed 1-d convolution (adjoint of conv1d's input map).

    x: (..., in_ch, L); kernel: (in_ch, out_ch, k).
    Output length is (L - 1) * stride - 2*padding + k + output_padding.
    """
    x, kernel = _lift(x), _lift(kernel)
    if x.ndim < 2 or kernel.ndim != 3:
        raise ShapeError(f"transposed_conv1d: input {x.shape}, kernel {kernel.shape}")
    in_ch, out_ch, k = kernel.shape
    if x.shape[-2] != in_ch:
        raise ShapeError(
            f"transposed_conv1d: input has {x.shape[-2]} channels, kernel expects {in_ch}"
        )
    length = x.shape[-1]
    full_len = (length - 1) * stride + k
    l_out = full_len - 2 * padding + output_padding
    if l_out < 1:
        raise ShapeError(f"transposed_conv1d: non-positive output length {l_out}")
    kd = kernel.data
    full = np.zeros(x.shape[:-2] + (out_ch, full_len))
    for kk in range(k):
        seg = np.einsum("...il,io->...ol", x.data, kd[:, :, kk], optimize=True)
        full[..., kk : kk + stride * length : stride] += seg
    out = np.zeros(x.shape[:-2] + (out_ch, l_out))
    usable = min(l_out, full_len - padding)
    out[..., :usable] = full[..., padding : padding + usable]
    x_shape = x.shape

    def back(g):
        g_full = np.zeros(x_shape[:-2] + (out_ch, full_len))
        g_full[..., padding : padding + usable] = g[..., :usable]
        gx = np.zeros(x_shape)
        gk = np.zeros(kd.shape)
        for kk in range(k):
            seg = g_full[..., kk : kk + stride * length : stride]
            gx += np.einsum("...ol,io->...il", seg, kd[:, :, kk], optimize=True)
            gk[:, :, kk] = np.einsum("...il,...ol->io", x.data, seg, optimize=True)
        return gx, gk

    return _emit("transposed_conv1d", (x, kernel), out, back)


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    """Repeat each entry of the last dim `factor` times."""
    x = _lift(x)
    if factor < 1:
        raise ShapeError(f"upsample factor must be >= 1, got {factor}")
    out = np.repeat(x.data, factor, axis=-1)
    shape = x.shape

    def back(g):
        return (g.reshape(shape + (factor,)).sum(axis=-1),)

    return _emit("upsample_nearest", (x,), out, back)


# ---------------------------------------------------------------------------
# indexed routing


def gather_rows(x: Tensor, index: Sequence[int]) -> Tensor:
    """out[i] = x[index[i]] along the first axis."""
    x = _lift(x)
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("gather_rows index must be 1-d")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ShapeError(f"gather_rows index out of range for {x.shape[0]} rows")
    shape = x.shape

    def back(g):
        gx = np.zeros(shape)
        np.add.at(gx, idx, g)
        return (gx,)

    return _emit("gather_rows", (x,), x.data[idx].copy(), back)


def scatter_add_rows(x: Tensor, index: Sequence[int], out_rows: int) -> Tensor:
    """out[index[i]] += x[i] along the first axis; out has out_rows rows."""
    x = _lift(x)
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1 or idx.shape[0] != x.shape[0]:
        raise ShapeError(
            f"scatter_add_rows needs one index per row, got {idx.shape} for {x.shape}"
        )
    if idx.size and (idx.min() < 0 or idx.max() >= out_rows):
        raise ShapeError(f"scatter_add_rows index out of range for {out_rows} rows")
    out = np.zeros((out_rows,) + x.shape[1:])
    np.add.at(out, idx, x.data)

    def back(g):
        return (g[idx].copy(),)

    return _emit("scatter_add_rows", (x,), out, back)


# ---------------------------------------------------------------------------
# reverse pass and the finite-difference oracle


class Gradients:
    """Per-node gradient accumulators from one backward sweep."""

    def __init__(self, tape: Tape, table: list):
        self._tape = tape
        self._table = table

    def wrt(self, t: Tensor) -> np.ndarray:
        """Gradient for a tensor on this tape; exact zeros if it had no influence."""
        if t.tape is not self._tape:
            raise ShapeError("tensor does not belong to this tape")
        g = self._table[t.node_id]
        return np.zeros(t.shape) if g is None else g


def backward(tape: Tape, output: Tensor) -> Gradients:
    """Reverse sweep from a scalar output; returns gradients for every node."""
    if output.tape is not tape:
        raise ShapeError("output tensor is not on the given tape")
    if output.shape not in ((), (1,)):
        raise ShapeError(f"backward needs a scalar output, got shape {output.shape}")
    table: list = [None] * len(tape._nodes)
    table[output.node_id] = np.ones(output.shape)
    for nid in range(output.node_id, -1, -1):
        g = table[nid]
        if g is None:
            continue
        node = tape._nodes[nid]
        if node.backward is None:
            continue
        grads = node.backward(g)
        for pid, pg in zip(node.inputs, grads):
            if pid is None or pg is None:
                continue
            table[pid] = pg if table[pid] is None else table[pid] + pg
    return Gradients(tape, table)


def gradcheck(f: Callable[[Tensor], Tensor], x, eps: float = 1e-6) -> float:
    """Max relative error between f's taped gradient at x and central differences.

    Relative error per component: |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
    """
    if eps <= 0:
        raise ShapeError(f"gradcheck eps must be positive, got {eps}")
    x0 = np.ascontiguousarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    tape = Tape()
    xt = tape.leaf(x0)
    out = f(xt)
    if out.shape not in ((), (1,)):
        raise ShapeError(f"gradcheck function must return a scalar, got shape {out.shape}")
    analytic = backward(tape, out).wrt(xt)
    numeric = np.zeros_like(x0)
    for idx in np.ndindex(*x0.shape) if x0.shape else [()]:
        xp = x0.copy()
        xp[idx] += eps
        fp = f(Tensor.constant(xp)).item()
        xm = x0.copy()
        xm[idx] -= eps
        fm = f(Tensor.constant(xm)).item()
        numeric[idx] = (fp - fm) / (2.0 * eps)
    denom = np.maximum(1e-12, np.abs(analytic) + np.abs(numeric))
    return float((np.abs(analytic - numeric) / denom).max())
