"""Skeleton topology, forward kinematics, and motion normalization.

Joints are indexed so that parent[i] < i for every non-root joint and the
root sits at index 0 with parent sentinel -1; forward kinematics is then a
single forward sweep. Bone b connects joint b+1 to its parent, so per-bone
arrays (rest_direction, bone_length) have N-1 entries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rotations
from .errors import ShapeError, ValidationError
from .validation import (
    ROOT_SENTINEL,
    check_frame_rate,
    check_parents,
    check_positions,
    check_quaternions,
)

UNIT_TOL = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    # copy writable inputs so freezing never mutates a caller-owned array
    if arr.flags.writeable:
        arr = arr.copy()
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Skeleton:
    """Joint tree with rest bone directions and lengths (meters).

    parent: (N,) int, parent[0] == -1 and parent[i] < i otherwise
    rest_direction: (N-1, 3), row b is the unit direction of the bone into joint b+1
    bone_length: (N-1,) positive scalars
    joint_name: N labels
    """

    parent: np.ndarray
    rest_direction: np.ndarray
    bone_length: np.ndarray
    joint_name: tuple[str, ...] = ()

    def __post_init__(self):
        parent = check_parents(self.parent)
        n = parent.shape[0]
        rest = np.asarray(self.rest_direction, dtype=np.float64)
        length = np.asarray(self.bone_length, dtype=np.float64)
        if rest.shape != (n - 1, 3):
            raise ValidationError(
                f"rest_direction must have shape ({n - 1}, 3), got {rest.shape}"
            )
        if length.shape != (n - 1,):
            raise ValidationError(
                f"bone_length must have shape ({n - 1},), got {length.shape}"
            )
        names = tuple(self.joint_name) if self.joint_name else tuple(
            f"joint{i}" for i in range(n)
        )
        if len(names) != n:
            raise ValidationError(f"expected {n} joint names, got {len(names)}")
        object.__setattr__(self, "parent", _freeze(parent))
        object.__setattr__(self, "rest_direction", _freeze(rest))
        object.__setattr__(self, "bone_length", _freeze(length))
        object.__setattr__(self, "joint_name", names)

    @property
    def joint_count(self) -> int:
        return self.parent.shape[0]

    @property
    def bone_count(self) -> int:
        return self.parent.shape[0] - 1

    def with_bone_lengths(self, lengths) -> "Skeleton":
        """Same topology and rest directions, different bone lengths."""
        return Skeleton(self.parent, self.rest_direction, lengths, self.joint_name)


@dataclass(frozen=True)
class Motion:
    """Time-indexed joint positions: frames (T, N, 3) in meters."""

    frames: np.ndarray
    frame_rate: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "frames", _freeze(check_positions(self.frames)))
        object.__setattr__(self, "frame_rate", check_frame_rate(self.frame_rate))

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def joint_count(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class RotationMotion:
    """Root trajectory plus per-joint local rotations as unit quaternions.

    root_position: (T, 3); joint_rotation: (T, N, 4) scalar-first (w, x, y, z).
    """

    root_position: np.ndarray
    joint_rotation: np.ndarray
    frame_rate: float = 30.0

    def __post_init__(self):
        root = np.asarray(self.root_position, dtype=np.float64)
        if root.ndim != 2 or root.shape[1] != 3:
            raise ValidationError(f"root_position must be (T, 3), got {root.shape}")
        if not np.isfinite(root).all():
            raise ValidationError("root_position contains non-finite values")
        quat = check_quaternions(self.joint_rotation, "joint_rotation", tol=UNIT_TOL)
        if quat.ndim != 3:
            raise ValidationError(f"joint_rotation must be (T, N, 4), got {quat.shape}")
        if quat.shape[0] != root.shape[0]:
            raise ValidationError(
                f"frame counts disagree: {root.shape[0]} root frames, "
                f"{quat.shape[0]} rotation frames"
            )
        object.__setattr__(self, "root_position", _freeze(root))
        object.__setattr__(self, "joint_rotation", _freeze(quat))
        object.__setattr__(self, "frame_rate", check_frame_rate(self.frame_rate))

    @property
    def frame_count(self) -> int:
        return self.root_position.shape[0]

    @property
    def joint_count(self) -> int:
        return self.joint_rotation.shape[1]


@dataclass(frozen=True)
class SkeletonValidation:
    """Outcome of validate_skeleton: ok, or the violated invariant by name."""

    ok: bool
    error: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def validate_skeleton(s: Skeleton) -> SkeletonValidation:
    """Check every Skeleton invariant; name the first violation and its index."""
    parent = s.parent
    n = parent.shape[0]
    roots = np.flatnonzero(parent == ROOT_SENTINEL)
    if roots.size == 0:
        return SkeletonValidation(False, "no root (no sentinel parent entry)")
    if roots.size > 1:
        return SkeletonValidation(
            False, f"multiple roots (joints {roots[0]} and {roots[1]})"
        )
    for i in range(n):
        p = int(parent[i])
        if p == ROOT_SENTINEL:
            continue
        if p < 0 or p >= n:
            return SkeletonValidation(False, f"parent index out of range at joint {i}")
        if p >= i:
            return SkeletonValidation(
                False, f"cycle or non-topological order at joint {i} (parent {p})"
            )
    if int(roots[0]) != 0:
        # parent[i] < i for all non-root entries forces the root to index 0
        return SkeletonValidation(False, f"root must be joint 0, found at {int(roots[0])}")
    for b in range(n - 1):
        if not np.isfinite(s.bone_length[b]) or s.bone_length[b] <= 0.0:
            return SkeletonValidation(False, f"non-positive length at bone {b}")
    dir_norms = np.linalg.norm(s.rest_direction, axis=-1)
    bad = np.flatnonzero(np.abs(dir_norms - 1.0) > UNIT_TOL)
    if bad.size:
        return SkeletonValidation(False, f"non-unit direction at bone {int(bad[0])}")
    return SkeletonValidation(True)


def require_valid(s: Skeleton) -> Skeleton:
    result = validate_skeleton(s)
    if not result.ok:
        raise ValidationError(result.error)
    return s


def forward_kinematics(s: Skeleton, r: RotationMotion) -> Motion:
    """Realize joint positions from local rotations, bone lengths, and the root path.

    position[root] = root_position; position[i] = position[parent[i]] +
    global_rotation(i) @ (bone_length[i] * rest_direction[i]), with global
    rotations composed parent-to-child down the tree.
    """
    if r.joint_count != s.joint_count:
        raise ShapeError(
            f"rotation motion has {r.joint_count} joints, skeleton has {s.joint_count}"
        )
    t, n = r.frame_count, s.joint_count
    positions = np.empty((t, n, 3))
    globals_ = np.empty((t, n, 4))
    positions[:, 0] = r.root_position
    globals_[:, 0] = r.joint_rotation[:, 0]
    for i in range(1, n):
        p = int(s.parent[i])
        globals_[:, i] = rotations.multiply(globals_[:, p], r.joint_rotation[:, i])
        bone = s.bone_length[i - 1] * s.rest_direction[i - 1]
        positions[:, i] = positions[:, p] + rotations.rotate(globals_[:, i], bone)
    return Motion(positions, r.frame_rate)


def bone_lengths_from_motion(m: Motion, parent) -> tuple[np.ndarray, np.ndarray]:
    """Recover per-bone mean length and max deviation from position data.

    Returns (mean_length, max_deviation), both (N-1,). Deviation is the largest
    |frame length - mean| per bone, a rigidity diagnostic.
    """
    parent = check_parents(parent)
    if m.frame_count < 1:
        raise ValidationError("motion has no frames")
    if parent.shape[0] != m.joint_count:
        raise ShapeError(
            f"parent array has {parent.shape[0]} joints, motion has {m.joint_count}"
        )
    child = np.arange(1, m.joint_count)
    diffs = m.frames[:, child] - m.frames[:, parent[child]]
    dist = np.linalg.norm(diffs, axis=-1)  # (T, N-1)
    mean = dist.mean(axis=0)
    deviation = np.abs(dist - mean).max(axis=0)
    return mean, deviation


def root_center(m: Motion) -> Motion:
    """Subtract the root position from every joint, per frame. Idempotent."""
    centered = m.frames - m.frames[:, :1, :]
    return Motion(centered, m.frame_rate)
