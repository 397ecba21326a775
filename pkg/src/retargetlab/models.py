"""Encoder, bone-length-conditioned decoder, and discriminator.

The encoder is three [node graph conv -> strided temporal conv] stages mapping
(..., T, N, 3) to a latent (..., T/8, N, latent_dim); it never sees bone
lengths. The decoder mirrors it with edge-node graph convolutions conditioned
on the target bone lengths and time-doubling stages, ending in a linear
per-node head (positions are unbounded, so no sigmoid) whose root row is
forced to the origin. The discriminator is encoder-shaped but uses the
conditioned convolutions, then flattens into a dense layer producing one
unbounded score per clip.

Checkpoint container: a .npz archive with one JSON entry "__meta__" (format
tag, hyper parameters, parent array, joint names, seed lineage, step, and any
training-state scalars) plus one float64 array per parameter named
"<group>.<key>" and optional training-state arrays named "state.<key>".
float64 arrays round-trip bitwise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor, add, matmul, multiply, reshape, transpose
from .errors import ShapeError, ValidationError
from .layers import (
    EdgeGraphConvParams,
    GraphConvParams,
    TemporalConvParams,
    Topology,
    dense,
    edge_node_graph_conv,
    node_graph_conv,
    temporal_down,
    temporal_up,
)
from .skeleton import Motion, root_center

CHECKPOINT_FORMAT = "retargetlab-checkpoint"
CHECKPOINT_VERSION = 1

VARIANTS = ("upsample", "transposed")


@dataclass(frozen=True)
class HyperParams:
    """Architecture knobs. clip_len must be divisible by 8 (three stride-2 stages)."""

    channels: tuple[int, int, int] = (16, 32, 64)
    latent_dim: int = 32
    clip_len: int = 32
    variant: str = "upsample"

    def __post_init__(self):
        channels = tuple(int(c) for c in self.channels)
        if len(channels) != 3 or any(c < 1 for c in channels):
            raise ValidationError(f"channels must be 3 widths >= 1, got {self.channels}")
        object.__setattr__(self, "channels", channels)
        if int(self.latent_dim) < 1:
            raise ValidationError(f"latent_dim must be >= 1, got {self.latent_dim}")
        object.__setattr__(self, "latent_dim", int(self.latent_dim))
        t = int(self.clip_len)
        if t < 8 or t % 8 != 0:
            raise ValidationError(f"clip_len must be a positive multiple of 8, got {t}")
        object.__setattr__(self, "clip_len", t)
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    def to_dict(self) -> dict:
        return {
            "channels": list(self.channels),
            "latent_dim": self.latent_dim,
            "clip_len": self.clip_len,
            "variant": self.variant,
        }

    @staticmethod
    def from_dict(d: dict) -> "HyperParams":
        return HyperParams(
            tuple(d["channels"]), d["latent_dim"], d["clip_len"], d["variant"]
        )


def _node_conv_spec(prefix: str, c_in: int, c_out: int) -> list[tuple[str, tuple, int]]:
    return [
        (f"{prefix}.w_self", (c_out, c_in), c_in),
        (f"{prefix}.w_child", (c_out, c_in), c_in),
        (f"{prefix}.w_parent", (c_out, c_in), c_in),
        (f"{prefix}.bias", (c_out,), 0),
    ]


def _edge_conv_spec(prefix: str, c_in: int, c_out: int) -> list[tuple[str, tuple, int]]:
    return [
        (f"{prefix}.w_edge", (c_out, 1), 1),
        (f"{prefix}.w_edge_parent", (c_out, c_in), c_in),
        (f"{prefix}.w_edge_child", (c_out, c_in), c_in),
        (f"{prefix}.edge_bias", (c_out,), 0),
        (f"{prefix}.w_self", (c_out, c_in), c_in),
        (f"{prefix}.w_child_edge", (c_out, c_out), c_out),
        (f"{prefix}.w_parent_edge", (c_out, c_out), c_out),
        (f"{prefix}.node_bias", (c_out,), 0),
    ]


def _temporal_spec(prefix: str, c_in: int, c_out: int) -> list[tuple[str, tuple, int]]:
    return [
        (f"{prefix}.kernel", (c_out, c_in, 3), 3 * c_in),
        (f"{prefix}.bias", (c_out,), 0),
    ]


def parameter_spec(hyper: HyperParams, n_joints: int) -> dict[str, list[tuple[str, tuple, int]]]:
    """Ordered (key, shape, fan_in) per network; fan_in 0 marks a zero-init bias."""
    c0, c1, c2 = hyper.channels
    dz = hyper.latent_dim
    enc: list = []
    graph_in = (3, c0, c1)
    time_out = (c0, c1, dz)
    for i in range(3):
        enc += _node_conv_spec(f"g{i}", graph_in[i], hyper.channels[i])
        enc += _temporal_spec(f"t{i}", hyper.channels[i], time_out[i])
    dec: list = []
    widths = (c2, c1, c0)
    dec_in = (dz, c2, c1)
    for i in range(3):
        dec += _edge_conv_spec(f"g{i}", dec_in[i], widths[i])
        dec += _temporal_spec(f"t{i}", widths[i], widths[i])
    dec += [("head.weight", (3, c0), c0), ("head.bias", (3,), 0)]
    disc: list = []
    for i in range(3):
        disc += _edge_conv_spec(f"g{i}", graph_in[i], hyper.channels[i])
        disc += _temporal_spec(f"t{i}", hyper.channels[i], hyper.channels[i])
    flat = (hyper.clip_len // 8) * n_joints * c2
    disc += [("head.weight", (1, flat), flat), ("head.bias", (1,), 0)]
    return {"enc": enc, "dec": dec, "disc": disc}


@dataclass
class ModelParams:
    """All trainable arrays, keyed per network, plus the shape context."""

    hyper: HyperParams
    parents: np.ndarray
    enc: dict[str, np.ndarray]
    dec: dict[str, np.ndarray]
    disc: dict[str, np.ndarray]
    joint_names: tuple[str, ...] = ()

    def group(self, name: str) -> dict[str, np.ndarray]:
        return {"enc": self.enc, "dec": self.dec, "disc": self.disc}[name]

    def validate_shapes(self) -> None:
        spec = parameter_spec(self.hyper, len(self.parents))
        for group_name, entries in spec.items():
            group = self.group(group_name)
            expected_keys = [k for k, _, _ in entries]
            if list(group.keys()) != expected_keys:
                raise ValidationError(
                    f"{group_name} parameter keys do not chain: expected "
                    f"{expected_keys}, got {list(group.keys())}"
                )
            for key, shape, _ in entries:
                if group[key].shape != shape:
                    raise ValidationError(
                        f"{group_name}.{key} has shape {group[key].shape}, expected {shape}"
                    )


def init_params(hyper: HyperParams, parents, seed: int, joint_names=()) -> ModelParams:
    """Weights uniform in +-1/sqrt(fan_in), biases zero; deterministic per seed."""
    topo = Topology(parents)  # validates the parent array
    rng = np.random.default_rng(seed)
    spec = parameter_spec(hyper, topo.joint_count)
    groups: dict[str, dict[str, np.ndarray]] = {}
    for group_name, entries in spec.items():
        group: dict[str, np.ndarray] = {}
        for key, shape, fan_in in entries:
            if fan_in == 0:
                group[key] = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(fan_in)
                group[key] = rng.uniform(-bound, bound, size=shape)
        groups[group_name] = group
    params = ModelParams(
        hyper, topo.parents, groups["enc"], groups["dec"], groups["disc"],
        tuple(joint_names),
    )
    params.validate_shapes()
    return params


def lift_group(group: dict[str, np.ndarray], tape: Tape | None) -> dict[str, Tensor]:
    """Wrap a parameter group as tape leaves (trainable) or constants (frozen)."""
    if tape is None:
        return {k: Tensor.constant(v) for k, v in group.items()}
    return {k: tape.leaf(v, op=f"leaf:{k}") for k, v in group.items()}


def _graph_params(t: dict[str, Tensor], prefix: str) -> GraphConvParams:
    return GraphConvParams(
        t[f"{prefix}.w_self"], t[f"{prefix}.w_child"], t[f"{prefix}.w_parent"],
        t[f"{prefix}.bias"],
    )


def _edge_params(t: dict[str, Tensor], prefix: str) -> EdgeGraphConvParams:
    return EdgeGraphConvParams(
        t[f"{prefix}.w_edge"], t[f"{prefix}.w_edge_parent"], t[f"{prefix}.w_edge_child"],
        t[f"{prefix}.edge_bias"], t[f"{prefix}.w_self"], t[f"{prefix}.w_child_edge"],
        t[f"{prefix}.w_parent_edge"], t[f"{prefix}.node_bias"],
    )


def _temporal_params(t: dict[str, Tensor], prefix: str) -> TemporalConvParams:
    return TemporalConvParams(t[f"{prefix}.kernel"], t[f"{prefix}.bias"])


def _check_motion_input(x: Tensor, topo: Topology, op: str) -> None:
    if x.ndim < 3 or x.shape[-1] != 3:
        raise ShapeError(f"{op}: input must be (..., T, N, 3), got {x.shape}")
    if x.shape[-2] != topo.joint_count:
        raise ShapeError(
            f"{op}: input has {x.shape[-2]} joints, topology has {topo.joint_count}"
        )
    t = x.shape[-3]
    if t % 8 != 0:
        raise ShapeError(f"{op}: time length {t} is not divisible by 8")


def encode(x: Tensor, enc: dict[str, Tensor], topo: Topology, hyper: HyperParams) -> Tensor:
    """Root-centered positions (..., T, N, 3) -> latent (..., T/8, N, latent_dim).

    No bone lengths enter here: performer identity reaches the latent only
    through whatever the positions themselves reveal.
    """
    _check_motion_input(x, topo, "encode")
    h = x
    for i in range(3):
        h = node_graph_conv(h, topo, _graph_params(enc, f"g{i}"))
        h = temporal_down(h, _temporal_params(enc, f"t{i}"))
    return h


def decode(
    z: Tensor, lengths: Tensor, dec: dict[str, Tensor], topo: Topology, hyper: HyperParams
) -> Tensor:
    """Latent (..., T/8, N, latent_dim) + target bone lengths -> (..., T, N, 3).

    Output is root-centered: the root row is exactly the origin in every frame.
    """
    if z.ndim < 3 or z.shape[-1] != hyper.latent_dim:
        raise ShapeError(
            f"decode: latent must be (..., T/8, N, {hyper.latent_dim}), got {z.shape}"
        )
    if z.shape[-2] != topo.joint_count:
        raise ShapeError(
            f"decode: latent has {z.shape[-2]} joints, topology has {topo.joint_count}"
        )
    lengths = lengths if isinstance(lengths, Tensor) else Tensor.constant(lengths)
    h = z
    for i in range(3):
        h = edge_node_graph_conv(h, lengths, topo, _edge_params(dec, f"g{i}"))
        h = temporal_up(h, _temporal_params(dec, f"t{i}"), hyper.variant)
    h = add(matmul(h, transpose(dec["head.weight"])), dec["head.bias"])
    return multiply(h, Tensor.constant(topo.root_mask))


def translate(
    x: Tensor,
    lengths: Tensor,
    enc: dict[str, Tensor],
    dec: dict[str, Tensor],
    topo: Topology,
    hyper: HyperParams,
) -> Tensor:
    """The full retargeting map: decode(encode(x), target lengths)."""
    return decode(encode(x, enc, topo, hyper), lengths, dec, topo, hyper)


def discriminate(
    x: Tensor, lengths: Tensor, disc: dict[str, Tensor], topo: Topology, hyper: HyperParams
) -> Tensor:
    """Score how well a (root-centered) motion fits the conditioned target
    distribution: one unbounded scalar per clip, () or (batch,)."""
    _check_motion_input(x, topo, "discriminate")
    if x.shape[-3] != hyper.clip_len:
        raise ShapeError(
            f"discriminate: time length {x.shape[-3]} != configured {hyper.clip_len}"
        )
    lengths = lengths if isinstance(lengths, Tensor) else Tensor.constant(lengths)
    h = x
    for i in range(3):
        h = edge_node_graph_conv(h, lengths, topo, _edge_params(disc, f"g{i}"))
        h = temporal_down(h, _temporal_params(disc, f"t{i}"))
    flat = int(np.prod(h.shape[-3:]))
    if h.ndim == 3:
        scores = dense(reshape(h, (flat,)), disc["head.weight"], disc["head.bias"])
        return reshape(scores, ())
    batch = h.shape[:-3]
    scores = dense(reshape(h, batch + (flat,)), disc["head.weight"], disc["head.bias"])
    return reshape(scores, batch)


def retarget_motion(motion: Motion, target_lengths, params: ModelParams) -> Motion:
    """Retarget a raw motion: root-center, translate, re-attach the source root
    trajectory. Frame count must be divisible by 8."""
    topo = Topology(params.parents)
    centered = root_center(motion)
    x = Tensor.constant(centered.frames)
    out = translate(
        x,
        Tensor.constant(target_lengths),
        lift_group(params.enc, None),
        lift_group(params.dec, None),
        topo,
        params.hyper,
    )
    return Motion(out.data + motion.frames[:, :1, :], motion.frame_rate)


def reconstruct_motion(motion: Motion, own_lengths, params: ModelParams) -> Motion:
    """Auto-encode a motion through the model with its own bone lengths."""
    return retarget_motion(motion, own_lengths, params)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(
    path,
    params: ModelParams,
    meta: dict | None = None,
    state_arrays: dict[str, np.ndarray] | None = None,
) -> None:
    """Write the documented .npz checkpoint container."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hyper": params.hyper.to_dict(),
        "parents": [int(p) for p in params.parents],
        "joint_names": list(params.joint_names),
    }
    if meta:
        header.update(meta)
    payload: dict[str, np.ndarray] = {}
    for group_name in ("enc", "dec", "disc"):
        for key, arr in params.group(group_name).items():
            payload[f"{group_name}.{key}"] = arr
    for key, arr in (state_arrays or {}).items():
        payload[f"state.{key}"] = arr
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=json.dumps(header, sort_keys=True), **payload)


def load_checkpoint(path) -> tuple[ModelParams, dict, dict[str, np.ndarray]]:
    """Read a checkpoint; returns (params, metadata, training-state arrays)."""
    with np.load(path, allow_pickle=False) as archive:
        if "__meta__" not in archive:
            raise ValidationError(f"{path}: not a {CHECKPOINT_FORMAT} file (missing meta)")
        header = json.loads(str(archive["__meta__"]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValidationError(f"{path}: unknown checkpoint format {header.get('format')!r}")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValidationError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
        hyper = HyperParams.from_dict(header["hyper"])
        parents = np.asarray(header["parents"], dtype=np.int64)
        groups: dict[str, dict[str, np.ndarray]] = {"enc": {}, "dec": {}, "disc": {}}
        state: dict[str, np.ndarray] = {}
        spec = parameter_spec(hyper, len(parents))
        for group_name, entries in spec.items():
            for key, _, _ in entries:
                full = f"{group_name}.{key}"
                if full not in archive:
                    raise ValidationError(f"{path}: missing parameter {full}")
                groups[group_name][key] = np.ascontiguousarray(archive[full], dtype=np.float64)
        for name in archive.files:
            if name.startswith("state."):
                state[name[len("state."):]] = np.ascontiguousarray(archive[name])
    params = ModelParams(
        hyper, parents, groups["enc"], groups["dec"], groups["disc"],
        tuple(header.get("joint_names", ())),
    )
    params.validate_shapes()
    return params, header, state
