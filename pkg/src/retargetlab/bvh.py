"""BVH ingestion for a restricted-but-common subset of the format.

Supported grammar: HIERARCHY with ROOT/JOINT/End Site blocks carrying OFFSET
and CHANNELS (3 rotation channels, or 6 position+rotation channels on the
root only), then MOTION with Frames:/Frame Time: and exactly that many rows.
Euler channels compose intrinsically in the file's stated order, in degrees.
The parse is total: every token is consumed or a BvhParseError with the
offending line number is raised — mutated input never crashes or truncates
silently.

Channel semantics differ from this package's kinematics: a BVH joint's
rotation turns its children's offsets, while forward_kinematics rotates a
joint's own bone by that joint's global rotation. The returned RotationMotion
therefore carries each joint's FILE rotation on its children (the root gets
the identity); forward kinematics over it reproduces the file's positions.

End Sites become leaf joints named <parent>_end when their offset is nonzero
and are dropped otherwise (a zero-length bone would violate the skeleton
invariants and carries no geometry).
"""
from __future__ import annotations

import numpy as np

from . import rotations
from .errors import BvhParseError
from .skeleton import RotationMotion, Skeleton

_POSITION_CHANNELS = {"Xposition": 0, "Yposition": 1, "Zposition": 2}
_ROTATION_CHANNELS = {"Xrotation": "X", "Yrotation": "Y", "Zrotation": "Z"}
_VALID_CHANNELS = set(_POSITION_CHANNELS) | set(_ROTATION_CHANNELS)


class _Cursor:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0  # next line to read (0-based)
        self.last = 0  # 1-based number of the last consumed line

    def next(self, missing: str) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                self.last = self.pos
                return line
        raise BvhParseError(f"unexpected end of file, expected {missing}", len(self.lines))

    def fail(self, message: str):
        raise BvhParseError(message, self.last)

    def at_end(self) -> bool:
        return all(not ln.strip() for ln in self.lines[self.pos :])


class _JointDecl:
    __slots__ = ("name", "parent", "offset", "channels")

    def __init__(self, name, parent, offset, channels):
        self.name = name
        self.parent = parent
        self.offset = offset
        self.channels = channels


def _parse_floats(cur: _Cursor, tokens: list[str], what: str) -> np.ndarray:
    try:
        values = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError:
        cur.fail(f"{what}: unparsable number")
    if not np.isfinite(values).all():
        cur.fail(f"{what}: non-finite value")
    return values


def _parse_offset(cur: _Cursor) -> np.ndarray:
    tokens = cur.next("OFFSET").split()
    if tokens[0] != "OFFSET":
        cur.fail(f"expected OFFSET, found {tokens[0]!r}")
    if len(tokens) != 4:
        cur.fail(f"OFFSET needs 3 values, found {len(tokens) - 1}")
    return _parse_floats(cur, tokens[1:], "OFFSET")


def _parse_channels(cur: _Cursor, is_root: bool) -> list[str]:
    tokens = cur.next("CHANNELS").split()
    if tokens[0] != "CHANNELS":
        cur.fail(f"expected CHANNELS, found {tokens[0]!r}")
    if len(tokens) < 2:
        cur.fail("CHANNELS needs a count")
    try:
        count = int(tokens[1])
    except ValueError:
        cur.fail(f"CHANNELS: bad count {tokens[1]!r}")
    if count not in (3, 6):
        cur.fail(f"CHANNELS count must be 3 or 6, got {count}")
    names = tokens[2:]
    if len(names) != count:
        cur.fail(f"CHANNELS declares {count} channels but lists {len(names)}")
    for name in names:
        if name not in _VALID_CHANNELS:
            cur.fail(f"unknown channel {name!r}")
    if len(set(names)) != len(names):
        cur.fail("duplicate channel name")
    n_pos = sum(1 for n in names if n in _POSITION_CHANNELS)
    n_rot = count - n_pos
    if n_rot != 3:
        cur.fail(f"expected exactly 3 rotation channels, found {n_rot}")
    if n_pos and not is_root:
        cur.fail("position channels are only supported on the root joint")
    if count == 6 and n_pos != 3:
        cur.fail(f"6-channel joint needs 3 position channels, found {n_pos}")
    return names


def _expect_open(cur: _Cursor) -> None:
    line = cur.next("'{'")
    if line != "{":
        cur.fail(f"expected '{{', found {line!r}")


def parse_bvh(text: str) -> tuple[Skeleton, RotationMotion]:
    """Parse BVH text into a Skeleton plus a RotationMotion driving it."""
    cur = _Cursor(text)
    if cur.next("HIERARCHY") != "HIERARCHY":
        cur.fail("file must start with HIERARCHY")
    tokens = cur.next("ROOT").split()
    if tokens[0] != "ROOT":
        cur.fail(f"expected ROOT, found {tokens[0]!r}")
    if len(tokens) < 2:
        cur.fail("ROOT needs a name")
    joints: list[_JointDecl] = []
    _expect_open(cur)
    offset = _parse_offset(cur)
    channels = _parse_channels(cur, is_root=True)
    joints.append(_JointDecl("_".join(tokens[1:]), -1, offset, channels))
    open_stack = [0]
    while open_stack:
        line = cur.next("JOINT, End Site, or '}'")
        tokens = line.split()
        if tokens[0] == "JOINT":
            if len(tokens) < 2:
                cur.fail("JOINT needs a name")
            parent = open_stack[-1]
            _expect_open(cur)
            offset = _parse_offset(cur)
            if float(np.linalg.norm(offset)) == 0.0:
                cur.fail("zero-length OFFSET on a non-end-site joint")
            channels = _parse_channels(cur, is_root=False)
            joints.append(_JointDecl("_".join(tokens[1:]), parent, offset, channels))
            open_stack.append(len(joints) - 1)
        elif tokens[:2] == ["End", "Site"] and len(tokens) == 2:
            parent = open_stack[-1]
            _expect_open(cur)
            offset = _parse_offset(cur)
            closing = cur.next("'}'")
            if closing != "}":
                cur.fail(f"expected '}}' after End Site OFFSET, found {closing!r}")
            if float(np.linalg.norm(offset)) > 0.0:
                joints.append(
                    _JointDecl(joints[parent].name + "_end", parent, offset, [])
                )
        elif line == "}":
            open_stack.pop()
        else:
            cur.fail(f"unknown keyword {tokens[0]!r}")

    line = cur.next("MOTION")
    if line != "MOTION":
        cur.fail(f"expected MOTION, found {line!r}")
    tokens = cur.next("Frames:").split()
    if tokens[0] != "Frames:" or len(tokens) != 2:
        cur.fail("expected 'Frames: <count>'")
    try:
        n_frames = int(tokens[1])
    except ValueError:
        cur.fail(f"Frames: bad count {tokens[1]!r}")
    if n_frames < 0:
        cur.fail(f"Frames: count must be >= 0, got {n_frames}")
    tokens = cur.next("Frame Time:").split()
    if tokens[:2] != ["Frame", "Time:"] or len(tokens) != 3:
        cur.fail("expected 'Frame Time: <seconds>'")
    frame_time = float(_parse_floats(cur, tokens[2:], "Frame Time")[0])
    if frame_time <= 0.0:
        cur.fail(f"Frame Time must be positive, got {frame_time}")

    n = len(joints)
    total_channels = sum(len(j.channels) for j in joints)
    local = np.tile(rotations.identity(), (n_frames, n, 1))
    root_position = np.tile(joints[0].offset, (n_frames, 1))
    for frame in range(n_frames):
        row = cur.next(f"frame row {frame + 1} of {n_frames}").split()
        if len(row) != total_channels:
            cur.fail(
                f"frame row has {len(row)} values, expected {total_channels} channels"
            )
        values = _parse_floats(cur, row, "frame row")
        at = 0
        for j, decl in enumerate(joints):
            if not decl.channels:
                continue
            chunk = values[at : at + len(decl.channels)]
            at += len(decl.channels)
            order = ""
            angles = []
            for name, value in zip(decl.channels, chunk):
                if name in _POSITION_CHANNELS:
                    root_position[frame, _POSITION_CHANNELS[name]] += value
                else:
                    order += _ROTATION_CHANNELS[name]
                    angles.append(value)
            local[frame, j] = rotations.from_euler(order, np.array(angles), degrees=True)
    if not cur.at_end():
        cur.next("")  # advance to the offending line for the report
        cur.fail("trailing content after the declared frame rows")

    parents = np.array([j.parent for j in joints], dtype=np.int64)
    offsets = np.stack([j.offset for j in joints])
    norms = np.linalg.norm(offsets[1:], axis=1)
    skeleton = Skeleton(
        parents,
        offsets[1:] / norms[:, None],
        norms,
        tuple(j.name for j in joints),
    )
    # shift file rotations one generation down (see module docstring)
    ours = np.tile(rotations.identity(), (n_frames, n, 1))
    for i in range(1, n):
        ours[:, i] = local[:, parents[i]]
    motion = RotationMotion(
        root_position, rotations.normalize(ours) if n_frames else ours, 1.0 / frame_time
    )
    return skeleton, motion


def read_bvh(path) -> tuple[Skeleton, RotationMotion]:
    with open(path) as fh:
        return parse_bvh(fh.read())
