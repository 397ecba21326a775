"""Quaternion helpers shared by kinematics, data generation, and BVH ingestion.

Quaternions are float64 arrays laid out scalar-first (w, x, y, z), Hamilton
convention: rotate(multiply(a, b), v) == rotate(a, rotate(b, v)).
"""
from __future__ import annotations

import numpy as np

_AXIS_INDEX = {"X": 0, "Y": 1, "Z": 2}


def identity(shape: tuple[int, ...] = ()) -> np.ndarray:
    q = np.zeros(shape + (4,))
    q[..., 0] = 1.0
    return q


def norm(q: np.ndarray) -> np.ndarray:
    return np.linalg.norm(q, axis=-1)


def normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product, batched over leading dimensions."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate 3-vectors v by unit quaternions q (batched)."""
    u = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def from_axis_angle(axis: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """Quaternion for a rotation of `angle` radians about unit `axis` (batched)."""
    angle = np.asarray(angle, dtype=np.float64)
    half = 0.5 * angle
    s = np.sin(half)
    return np.concatenate(
        [np.cos(half)[..., None], s[..., None] * np.asarray(axis, dtype=np.float64)],
        axis=-1,
    )


def about_axis(axis_name: str, angle: np.ndarray) -> np.ndarray:
    """Quaternion about the named coordinate axis 'X' | 'Y' | 'Z'."""
    angle = np.asarray(angle, dtype=np.float64)
    half = 0.5 * angle
    q = np.zeros(angle.shape + (4,))
    q[..., 0] = np.cos(half)
    q[..., 1 + _AXIS_INDEX[axis_name]] = np.sin(half)
    return q


def from_euler(order: str, angles: np.ndarray, degrees: bool = False) -> np.ndarray:
    """Compose intrinsic rotations about body axes in the given order.

    order: string of axis letters, e.g. "XYZ" or "ZXY"; angles: (..., len(order)).
    """
    angles = np.asarray(angles, dtype=np.float64)
    if degrees:
        angles = np.deg2rad(angles)
    q = about_axis(order[0], angles[..., 0])
    for k, axis_name in enumerate(order[1:], start=1):
        q = multiply(q, about_axis(axis_name, angles[..., k]))
    return q


def slerp_identity(q: np.ndarray, t) -> np.ndarray:
    """Spherical interpolation from the identity toward q by fraction t in [0, 1].

    Equivalent to scaling the rotation angle by t along the shortest arc.
    t broadcasts against q's leading dimensions.
    """
    q = np.asarray(q, dtype=np.float64)
    q = np.where(q[..., :1] < 0.0, -q, q)
    half = np.arccos(np.clip(q[..., 0], -1.0, 1.0))
    vec_norm = np.linalg.norm(q[..., 1:], axis=-1)
    safe = np.maximum(vec_norm, 1e-300)
    axis = q[..., 1:] / safe[..., None]
    new_half = np.asarray(t, dtype=np.float64) * half
    out = np.concatenate(
        [np.cos(new_half)[..., None], np.sin(new_half)[..., None] * axis], axis=-1
    )
    # degenerate (near-identity) input: stay at identity regardless of t
    return np.where(vec_norm[..., None] < 1e-12, identity(q.shape[:-1]), out)
