"""Neural building blocks over skeleton graphs.

Three layer families: directed node graph convolution, two-step edge-node
graph convolution conditioned on bone lengths, and temporal convolutions that
halve or double the time axis. All layers act on tensors shaped (..., T, N, C)
with any number of leading batch dims; graph-conv weights are shared over
frames, temporal kernels are shared over joints.

Neighbor sums are routed through constant 0/1 topology matrices (child-sum,
parent-sum, edge-endpoint selectors), so the whole layer is a composition of
taped primitives and the backward pass needs no special cases.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    add,
    conv1d,
    matmul,
    reshape,
    sigmoid,
    transpose,
    transposed_conv1d,
    upsample_nearest,
)
from .errors import ShapeError
from .validation import check_parents


class Topology:
    """Constant routing matrices for one parent array (root at index 0).

    Edges are indexed by their child joint minus one, matching per-bone arrays.
    """

    def __init__(self, parents):
        parents = check_parents(parents)
        n = parents.shape[0]
        if (
            n < 1
            or parents[0] != -1
            or np.any(parents[1:] < 0)
            or np.any(parents[1:] >= np.arange(1, n))
        ):
            raise ShapeError("topology requires parent[0] == -1 and 0 <= parent[i] < i")
        self.parents = parents
        self.joint_count = n
        child_sum = np.zeros((n, n))  # (child_sum @ y)[i] = sum over children j of y[j]
        for j in range(1, n):
            child_sum[parents[j], j] = 1.0
        self.child_sum = child_sum
        self.parent_sum = child_sum.T.copy()
        e = n - 1
        self.edge_parent = np.zeros((e, n))  # picks x[parent(edge)] per edge
        self.edge_child = np.zeros((e, n))  # picks x[child(edge)] per edge
        self.child_edge_sum = np.zeros((n, e))  # sums e_ij over child edges of i
        self.parent_edge = np.zeros((n, e))  # picks e_ji for i's (unique) parent edge
        for j in range(1, n):
            self.edge_parent[j - 1, parents[j]] = 1.0
            self.edge_child[j - 1, j] = 1.0
            self.child_edge_sum[parents[j], j - 1] = 1.0
            self.parent_edge[j, j - 1] = 1.0
        self.root_mask = np.ones((n, 3))
        self.root_mask[0] = 0.0


@dataclass
class GraphConvParams:
    """Weights of a directed node graph convolution: one matrix each for the
    node itself, its children, and its parents, plus a shared bias."""

    w_self: Tensor
    w_child: Tensor
    w_parent: Tensor
    bias: Tensor

    def __post_init__(self):
        if not (self.w_self.shape == self.w_child.shape == self.w_parent.shape):
            raise ShapeError(
                f"graph conv weights must share shape, got {self.w_self.shape}, "
                f"{self.w_child.shape}, {self.w_parent.shape}"
            )
        if self.bias.shape != (self.w_self.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} != ({self.w_self.shape[0]},)")


@dataclass
class EdgeGraphConvParams:
    """Two-step graph convolution weights: an edge update fed by the raw bone
    length plus both endpoint features, then a node update fed by the node
    itself and its incident edge features."""

    w_edge: Tensor  # (out, 1): applied to the bone length
    w_edge_parent: Tensor  # (out, in): applied to the parent-side node
    w_edge_child: Tensor  # (out, in): applied to the child-side node
    edge_bias: Tensor
    w_self: Tensor  # (out, in)
    w_child_edge: Tensor  # (out, out)
    w_parent_edge: Tensor  # (out, out)
    node_bias: Tensor

    def __post_init__(self):
        out = self.w_edge.shape[0]
        expected = {
            "w_edge": (out, 1),
            "w_edge_parent": (out, self.w_edge_parent.shape[1]),
            "w_edge_child": self.w_edge_parent.shape,
            "edge_bias": (out,),
            "w_self": self.w_edge_parent.shape,
            "w_child_edge": (out, out),
            "w_parent_edge": (out, out),
            "node_bias": (out,),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeError(f"edge graph conv {name} has shape {got}, expected {shape}")


@dataclass
class TemporalConvParams:
    """Kernel (out_ch, in_ch, 3) plus bias, shared across joints."""

    kernel: Tensor
    bias: Tensor

    def __post_init__(self):
        if self.kernel.ndim != 3 or self.kernel.shape[2] != 3:
            raise ShapeError(f"temporal kernel must be (out, in, 3), got {self.kernel.shape}")
        if self.bias.shape != (self.kernel.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} != ({self.kernel.shape[0]},)")


def _check_node_axis(x: Tensor, topo: Topology, op: str) -> None:
    if x.ndim < 3:
        raise ShapeError(f"{op}: input must be (..., T, N, C), got {x.shape}")
    if x.shape[-2] != topo.joint_count:
        raise ShapeError(
            f"{op}: input has {x.shape[-2]} joints, topology has {topo.joint_count}"
        )


def node_graph_conv(x: Tensor, topo: Topology, p: GraphConvParams) -> Tensor:
    """sigmoid(W_self x_i + sum_children W_child x_j + sum_parents W_parent x_j + b)."""
    _check_node_axis(x, topo, "node_graph_conv")
    if x.shape[-1] != p.w_self.shape[1]:
        raise ShapeError(
            f"node_graph_conv: {x.shape[-1]} input channels, weights expect {p.w_self.shape[1]}"
        )
    h = matmul(x, transpose(p.w_self))
    h = add(h, matmul(Tensor.constant(topo.child_sum), matmul(x, transpose(p.w_child))))
    h = add(h, matmul(Tensor.constant(topo.parent_sum), matmul(x, transpose(p.w_parent))))
    return sigmoid(add(h, p.bias))


def edge_node_graph_conv(
    x: Tensor, lengths: Tensor, topo: Topology, p: EdgeGraphConvParams
) -> Tensor:
    """Two-step conditioned convolution.

    Step 1 per bone (i parent, j child): e_ij = sigmoid(W_e * length + W_- x_i
    + W_+ x_j + b_e). The raw edge input is always the 1-channel bone length.
    Step 2 per node: sigmoid(W_self x_i + sum_children W_c e_ij +
    sum_parents W_p e_ji + b_n).
    """
    _check_node_axis(x, topo, "edge_node_graph_conv")
    n_bones = topo.joint_count - 1
    if lengths.shape != (n_bones,):
        raise ShapeError(
            f"edge_node_graph_conv: expected {n_bones} bone lengths, got shape {lengths.shape}"
        )
    if x.shape[-1] != p.w_edge_parent.shape[1]:
        raise ShapeError(
            f"edge_node_graph_conv: {x.shape[-1]} input channels, "
            f"weights expect {p.w_edge_parent.shape[1]}"
        )
    length_col = reshape(lengths, (n_bones, 1))
    h_len = matmul(length_col, transpose(p.w_edge))  # (n_bones, out)
    x_parent = matmul(Tensor.constant(topo.edge_parent), x)
    x_child = matmul(Tensor.constant(topo.edge_child), x)
    e = add(matmul(x_parent, transpose(p.w_edge_parent)), h_len)
    e = add(e, matmul(x_child, transpose(p.w_edge_child)))
    e = sigmoid(add(e, p.edge_bias))
    h = matmul(x, transpose(p.w_self))
    h = add(h, matmul(matmul(Tensor.constant(topo.child_edge_sum), e), transpose(p.w_child_edge)))
    h = add(h, matmul(matmul(Tensor.constant(topo.parent_edge), e), transpose(p.w_parent_edge)))
    return sigmoid(add(h, p.node_bias))


def _to_time_last(x: Tensor) -> Tensor:
    # (..., T, N, C) -> (..., N, C, T)
    nd = x.ndim
    axes = tuple(range(nd - 3)) + (nd - 2, nd - 1, nd - 3)
    return transpose(x, axes)


def _from_time_last(x: Tensor) -> Tensor:
    # (..., N, C, T) -> (..., T, N, C)
    nd = x.ndim
    axes = tuple(range(nd - 3)) + (nd - 1, nd - 3, nd - 2)
    return transpose(x, axes)


def temporal_down(x: Tensor, p: TemporalConvParams) -> Tensor:
    """Strided temporal convolution: (..., T, N, C) -> (..., T/2, N, out). T must be even."""
    if x.ndim < 3:
        raise ShapeError(f"temporal_down: input must be (..., T, N, C), got {x.shape}")
    t = x.shape[-3]
    if t % 2 != 0:
        raise ShapeError(f"temporal_down: time axis must be even, got {t}")
    h = conv1d(_to_time_last(x), p.kernel, stride=2, padding=1)
    return add(_from_time_last(h), p.bias)


def temporal_up(x: Tensor, p: TemporalConvParams, variant: str = "upsample") -> Tensor:
    """Time-doubling convolution: (..., T, N, C) -> (..., 2T, N, out).

    variant="upsample": nearest-neighbor x2 then kernel-3 stride-1 convolution
    (the default; avoids the uneven-overlap artifacts of the transposed form).
    variant="transposed": stride-2 transposed convolution, output padding
    chosen to land exactly on 2T.
    """
    if x.ndim < 3:
        raise ShapeError(f"temporal_up: input must be (..., T, N, C), got {x.shape}")
    if variant == "upsample":
        h = upsample_nearest(_to_time_last(x), factor=2)
        h = conv1d(h, p.kernel, stride=1, padding=1)
    elif variant == "transposed":
        kernel_t = transpose(p.kernel, (1, 0, 2))  # (in, out, 3)
        h = transposed_conv1d(
            _to_time_last(x), kernel_t, stride=2, padding=1, output_padding=1
        )
    else:
        raise ShapeError(f"unknown temporal_up variant {variant!r}")
    return add(_from_time_last(h), p.bias)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map W x + b, no activation. x: (features,) or (batch, features)."""
    if weight.ndim != 2:
        raise ShapeError(f"dense weight must be 2-d, got {weight.shape}")
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(
            f"dense: input has {x.shape[-1]} features, weight expects {weight.shape[1]}"
        )
    if x.ndim == 1:
        out = matmul(reshape(x, (1, x.shape[0])), transpose(weight))
        return reshape(add(out, bias), (weight.shape[0],))
    return add(matmul(x, transpose(weight)), bias)
