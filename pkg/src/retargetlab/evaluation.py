"""Baselines, error metrics, report formatting, and frame rendering.

Two analytic baselines: position copy (the identity map onto the target) and
direction copy (keep every source bone direction, rebuild positions with the
target bone lengths). Errors are mean per-joint Euclidean distances after
root centering, reported in millimeters; baselines reconstruct their own
skeleton exactly, so their reconstruction columns are 0 by definition.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .datagen import TEST, TRAIN, Dataset
from .errors import ShapeError, ValidationError
from .layers import Topology
from .models import ModelParams, decode, encode, lift_group
from .skeleton import Motion, Skeleton, root_center
from .training import _fit_window

BASELINE_METHODS = ("position_copy", "direction_copy")


def position_copy(x: Motion, target: Skeleton | None = None) -> Motion:
    """Copy the source joint positions verbatim."""
    if target is not None and target.joint_count != x.joint_count:
        raise ShapeError(
            f"position_copy: motion has {x.joint_count} joints, "
            f"target skeleton has {target.joint_count}"
        )
    return x


def direction_copy(x: Motion, target_lengths, parents) -> Motion:
    """Keep source bone directions, rebuild positions with target lengths.

    The root trajectory is copied from the source; descending the tree, joint
    j goes at parent + target_length[j] * unit(source_j - source_parent).
    """
    parents = np.asarray(parents, dtype=np.int64)
    lengths = np.asarray(target_lengths, dtype=np.float64)
    n = x.joint_count
    if parents.shape != (n,) or lengths.shape != (n - 1,):
        raise ShapeError(
            f"direction_copy: motion has {n} joints, got {parents.shape} parents "
            f"and {lengths.shape} lengths"
        )
    src = x.frames
    out = np.empty_like(src)
    out[:, 0] = src[:, 0]
    for j in range(1, n):
        p = int(parents[j])
        delta = src[:, j] - src[:, p]
        norms = np.linalg.norm(delta, axis=-1)
        if np.any(norms == 0.0):
            frame = int(np.argmax(norms == 0.0))
            raise ValidationError(
                f"direction_copy: zero-length source bone {j - 1} at frame {frame}"
            )
        out[:, j] = out[:, p] + lengths[j - 1] * delta / norms[:, None]
    return Motion(out, x.frame_rate)


def _mean_joint_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean per-joint Euclidean distance between two root-centered stacks."""
    return float(np.linalg.norm(a - b, axis=-1).mean())


def _centered(frames: np.ndarray) -> np.ndarray:
    return frames - frames[:, :1, :]


def _model_reconstruct(frames: np.ndarray, lengths, params: ModelParams, topo: Topology):
    x = Tensor.constant(_centered(frames))
    z = encode(x, lift_group(params.enc, None), topo, params.hyper)
    recon = decode(z, Tensor.constant(lengths), lift_group(params.dec, None), topo, params.hyper)
    return recon.data


def reconstruction_error(params: ModelParams, dataset: Dataset, split: str) -> float:
    """Mean distance (mm) between root-centered clips and their own-length
    auto-encoding, over every clip of the split."""
    topo = Topology(params.parents)
    if topo.joint_count != dataset.characters[0].skeleton.joint_count:
        raise ShapeError("checkpoint and dataset topologies disagree")
    clip_len = params.hyper.clip_len
    total = 0.0
    count = 0
    for char_id in dataset.split_characters(split):
        lengths = dataset.character(char_id).skeleton.bone_length
        for clip in dataset.clips_of(char_id, split):
            frames = _fit_window(clip.motion.frames, clip_len, rng=None)
            recon = _model_reconstruct(frames, lengths, params, topo)
            total += _mean_joint_distance(_centered(frames), recon)
            count += 1
    if count == 0:
        raise ValidationError(f"no clips in split {split!r}")
    return 1000.0 * total / count


def _model_retarget_frames(
    frames: np.ndarray, target_lengths, params: ModelParams, topo: Topology
) -> np.ndarray:
    x = Tensor.constant(_centered(frames))
    z = encode(x, lift_group(params.enc, None), topo, params.hyper)
    out = decode(
        z, Tensor.constant(target_lengths), lift_group(params.dec, None), topo, params.hyper
    )
    return out.data


def retargeting_error(
    method: str,
    dataset: Dataset,
    params: ModelParams | None = None,
) -> float:
    """Mean distance (mm) between retargeted and ground-truth paired test clips,
    over every ordered pair of test characters and every pairing key."""
    test_chars = dataset.split_characters(TEST)
    keys = dataset.pairing_keys()
    if len(test_chars) < 2 or not keys:
        raise ValidationError("retargeting error needs >= 2 paired test characters")
    parents = dataset.characters[0].skeleton.parent
    if method == "model":
        if params is None:
            raise ValidationError("method 'model' needs checkpoint parameters")
        topo = Topology(params.parents)
        clip_len = params.hyper.clip_len
    total = 0.0
    count = 0
    for char_a in test_chars:
        for char_b in test_chars:
            if char_a == char_b:
                continue
            lengths_b = dataset.character(char_b).skeleton.bone_length
            for key in keys:
                src = dataset.paired_clip(key, char_a).motion
                truth = dataset.paired_clip(key, char_b).motion
                if method == "position_copy":
                    pred, gt = position_copy(src).frames, truth.frames
                elif method == "direction_copy":
                    pred = direction_copy(src, lengths_b, parents).frames
                    gt = truth.frames
                elif method == "model":
                    src_frames = _fit_window(src.frames, clip_len, rng=None)
                    gt = _fit_window(truth.frames, clip_len, rng=None)
                    pred = _model_retarget_frames(src_frames, lengths_b, params, topo)
                else:
                    raise ValidationError(f"unknown retargeting method {method!r}")
                total += _mean_joint_distance(_centered(pred), _centered(gt))
                count += 1
    return 1000.0 * total / count


# ---------------------------------------------------------------------------
# reports


@dataclass
class MethodRow:
    method: str
    recon_train_mm: float
    recon_test_mm: float
    retarget_mm: float

    def __post_init__(self):
        for name in ("recon_train_mm", "recon_test_mm", "retarget_mm"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ValidationError(f"{self.method}: {name} must be finite and >= 0, got {v}")


@dataclass
class EvalReport:
    rows: list[MethodRow]
    metadata: dict[str, str] = field(default_factory=dict)


def evaluate_all(params: ModelParams, dataset: Dataset, metadata: dict | None = None) -> EvalReport:
    """Both baselines plus the model on all three metric columns.

    Baselines are the identity on their own skeleton, so their reconstruction
    columns are exactly 0.
    """
    model_name = {"cyclegan": "CycleGAN", "unit": "UNIT"}.get(
        (metadata or {}).get("mode", ""), "Model"
    )
    rows = [
        MethodRow("Position copy", 0.0, 0.0, retargeting_error("position_copy", dataset)),
        MethodRow("Rotation copy", 0.0, 0.0, retargeting_error("direction_copy", dataset)),
        MethodRow(
            model_name,
            reconstruction_error(params, dataset, TRAIN),
            reconstruction_error(params, dataset, TEST),
            retargeting_error("model", dataset, params),
        ),
    ]
    return EvalReport(rows, dict(metadata or {}))


def _fmt_mm(value: float) -> str:
    return "0 mm" if value == 0.0 else f"{value:.1f} mm"


def format_report(report: EvalReport) -> str:
    """Fixed-width text table mirroring the published comparison layout."""
    headers = (
        "Method",
        "Reconstruction error (train)",
        "Reconstruction error (test)",
        "Retargeting error (test)",
    )
    body = [
        (row.method, _fmt_mm(row.recon_train_mm), _fmt_mm(row.recon_test_mm), _fmt_mm(row.retarget_mm))
        for row in report.rows
    ]
    widths = [
        max(len(headers[c]), *(len(line[c]) for line in body)) for c in range(4)
    ]
    def render(cells):
        return "  ".join(cell.ljust(widths[c]) for c, cell in enumerate(cells)).rstrip()
    lines = [render(headers), render(tuple("-" * w for w in widths))]
    lines.extend(render(line) for line in body)
    return "\n".join(lines) + "\n"


def write_report(path_text, path_kv, report: EvalReport) -> None:
    with open(path_text, "w") as fh:
        fh.write(format_report(report))
    with open(path_kv, "w") as fh:
        for key, value in sorted(report.metadata.items()):
            fh.write(f"meta.{key} = {value}\n")
        for row in report.rows:
            slug = row.method.lower().replace(" ", "_")
            fh.write(f"{slug}.reconstruction_train_mm = {row.recon_train_mm!r}\n")
            fh.write(f"{slug}.reconstruction_test_mm = {row.recon_test_mm!r}\n")
            fh.write(f"{slug}.retargeting_test_mm = {row.retarget_mm!r}\n")


def dataset_fingerprint(manifest_path) -> str:
    with open(manifest_path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# rendering


_PLANES = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}


def _panel_svg(frame: np.ndarray, parents: np.ndarray, plane: str, ox: float, label: str) -> list[str]:
    ax, ay = _PLANES[plane]
    pts = frame[:, (ax, ay)]
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-6))
    margin = 0.1 * span
    scale = 280.0 / (span + 2 * margin)

    def to_px(p):
        x = (p[0] - lo[0] + margin) * scale + 10.0 + ox
        y = 290.0 - (p[1] - lo[1] + margin) * scale
        return x, y

    parts = [f'<text x="{ox + 150:.1f}" y="14" text-anchor="middle" font-size="12">{label}</text>']
    for j in range(1, len(parents)):
        x1, y1 = to_px(pts[int(parents[j])])
        x2, y2 = to_px(pts[j])
        parts.append(
            f'<line x1="{x1:.4f}" y1="{y1:.4f}" x2="{x2:.4f}" y2="{y2:.4f}" '
            'stroke="black" stroke-width="2"/>'
        )
    for j in range(len(parents)):
        x, y = to_px(pts[j])
        fill = "crimson" if j == 0 else "steelblue"
        parts.append(f'<circle cx="{x:.4f}" cy="{y:.4f}" r="4" fill="{fill}"/>')
    return parts


def render_frame(
    motion: Motion, parents, frame_index: int, out_path, plane: str = "xy"
) -> None:
    """Orthographic 2D projection of one frame: bones as segments, joints as
    dots. Deterministic bytes for identical inputs."""
    render_comparison([("frame", motion)], parents, frame_index, out_path, plane)


def render_comparison(
    panels: list[tuple[str, Motion]], parents, frame_index: int, out_path, plane: str = "xy"
) -> None:
    """Side-by-side panels (e.g. source / prediction / ground truth)."""
    if plane not in _PLANES:
        raise ValidationError(f"plane must be one of {sorted(_PLANES)}, got {plane!r}")
    parents = np.asarray(parents, dtype=np.int64)
    body: list[str] = []
    for k, (label, motion) in enumerate(panels):
        if not (0 <= frame_index < motion.frame_count):
            raise ValidationError(
                f"frame index {frame_index} out of range for {motion.frame_count} frames"
            )
        body.extend(_panel_svg(motion.frames[frame_index], parents, plane, 300.0 * k, label))
    width = 300 * len(panels)
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="300" '
        f'viewBox="0 0 {width} 300">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )
    with open(out_path, "w") as fh:
        fh.write(svg)
