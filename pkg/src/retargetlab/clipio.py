"""Canonical clip and dataset file formats.

Clip file (text, schema "retargetlab-clip v1"):

    retargetlab-clip v1
    joints <N>
    names <N whitespace-free labels>
    parents <N integers, -1 for the root>
    lengths <N-1 bone lengths>
    framerate <frames per second>
    frames <T>
    positions
    <T lines of N*3 numbers, row-major x y z per joint>
    rotations            (optional section)
    <T lines of 3 + 4*N numbers: root x y z, then w x y z per joint>
    end

Positions use 9 significant digits (diffable, sufficient for 1e-6 m work);
rotation and skeleton-geometry numbers use 17 significant digits so unit-norm
invariants survive the round trip exactly. Reading a written file and writing
it again reproduces the bytes.

A dataset is a directory: clips/<clip>.clip files plus a manifest
("retargetlab-dataset v1") holding the shared topology, per-character bone
lengths and flexibility, and one line per clip with split, pairing key, and
generation seed.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .datagen import CharacterSpec, ClipRecord, Dataset
from .errors import ClipFormatError
from .skeleton import Motion, RotationMotion, Skeleton

CLIP_MAGIC = "retargetlab-clip"
DATASET_MAGIC = "retargetlab-dataset"
SCHEMA_VERSION = "v1"

_POS_FMT = "%.9g"
_EXACT_FMT = "%.17g"


@dataclass
class ClipData:
    """One clip file: topology context plus the motion itself."""

    joint_names: tuple[str, ...]
    parents: np.ndarray
    bone_lengths: np.ndarray
    motion: Motion
    rotations: RotationMotion | None = None


def _check_token(token: str, what: str) -> str:
    if not token or any(ch.isspace() for ch in token):
        raise ClipFormatError(f"{what} {token!r} must be non-empty and whitespace-free")
    return token


def _fmt_row(values, fmt: str) -> str:
    return " ".join(fmt % v for v in np.asarray(values).ravel())


class _LineReader:
    def __init__(self, text: str, source: str):
        self.lines = text.splitlines()
        self.pos = 0
        self.source = source

    def error(self, message: str) -> ClipFormatError:
        return ClipFormatError(f"{self.source}: line {self.pos}: {message}")

    def next(self, missing: str) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        raise ClipFormatError(f"{self.source}: truncated file, missing {missing}")

    def done(self) -> None:
        while self.pos < len(self.lines):
            if self.lines[self.pos].strip():
                raise self.error("trailing content after end marker")
            self.pos += 1


def _expect_keyword(reader: _LineReader, keyword: str) -> list[str]:
    line = reader.next(f"{keyword} line")
    parts = line.split()
    if parts[0] != keyword:
        raise reader.error(f"expected {keyword!r}, found {parts[0]!r}")
    return parts[1:]


def _single(reader: _LineReader, keyword: str) -> str:
    parts = _expect_keyword(reader, keyword)
    if len(parts) != 1:
        raise reader.error(f"{keyword}: expected exactly one value, found {len(parts)}")
    return parts[0]


def _floats(reader: _LineReader, parts: list[str], count: int, what: str) -> np.ndarray:
    if len(parts) != count:
        raise reader.error(f"{what}: expected {count} values, found {len(parts)}")
    try:
        arr = np.array([float(p) for p in parts])
    except ValueError as exc:
        raise reader.error(f"{what}: {exc}") from None
    if not np.isfinite(arr).all():
        raise reader.error(f"{what}: non-finite value")
    return arr


def write_clip(
    path,
    names,
    parents,
    lengths,
    motion: Motion,
    rotations: RotationMotion | None = None,
) -> None:
    names = [str(n) for n in names]
    parents = np.asarray(parents, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.float64)
    n = motion.joint_count
    if len(names) != n or parents.shape != (n,) or lengths.shape != (n - 1,):
        raise ClipFormatError(
            f"clip header inconsistent with {n}-joint motion: "
            f"{len(names)} names, {parents.shape} parents, {lengths.shape} lengths"
        )
    for name in names:
        _check_token(name, "joint name")
    out = [
        f"{CLIP_MAGIC} {SCHEMA_VERSION}",
        f"joints {n}",
        "names " + " ".join(names),
        "parents " + " ".join(str(int(p)) for p in parents),
        "lengths " + _fmt_row(lengths, _EXACT_FMT),
        "framerate " + (_EXACT_FMT % motion.frame_rate),
        f"frames {motion.frame_count}",
        "positions",
    ]
    for frame in motion.frames:
        out.append(_fmt_row(frame, _POS_FMT))
    if rotations is not None:
        if rotations.frame_count != motion.frame_count or rotations.joint_count != n:
            raise ClipFormatError("rotations section does not match the motion's shape")
        out.append("rotations")
        for t in range(rotations.frame_count):
            row = np.concatenate(
                [rotations.root_position[t], rotations.joint_rotation[t].ravel()]
            )
            out.append(_fmt_row(row, _EXACT_FMT))
    out.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def read_clip(path) -> ClipData:
    with open(path) as fh:
        text = fh.read()
    return parse_clip(text, source=str(path))


def parse_clip(text: str, source: str = "<clip>") -> ClipData:
    reader = _LineReader(text, source)
    header = reader.next("header")
    if header.split() != [CLIP_MAGIC, SCHEMA_VERSION]:
        raise ClipFormatError(
            f"{source}: bad header {header!r}, expected '{CLIP_MAGIC} {SCHEMA_VERSION}'"
        )
    joints_str = _single(reader, "joints")
    try:
        n = int(joints_str)
    except ValueError:
        raise reader.error(f"joints: bad count {joints_str!r}") from None
    if n < 1:
        raise reader.error(f"joints: count must be >= 1, got {n}")
    names = _expect_keyword(reader, "names")
    if len(names) != n:
        raise reader.error(f"names: expected {n} labels, found {len(names)}")
    parent_parts = _expect_keyword(reader, "parents")
    if len(parent_parts) != n:
        raise reader.error(f"parents: expected {n} entries, found {len(parent_parts)}")
    try:
        parents = np.array([int(p) for p in parent_parts], dtype=np.int64)
    except ValueError as exc:
        raise reader.error(f"parents: {exc}") from None
    lengths = _floats(reader, _expect_keyword(reader, "lengths"), n - 1, "lengths")
    rate = _floats(reader, [_single(reader, "framerate")], 1, "framerate")[0]
    frames_str = _single(reader, "frames")
    try:
        t = int(frames_str)
    except ValueError:
        raise reader.error(f"frames: bad count {frames_str!r}") from None
    if t < 1:
        raise reader.error(f"frames: count must be >= 1, got {t}")
    marker = reader.next("positions section")
    if marker != "positions":
        raise reader.error(f"expected 'positions', found {marker!r}")
    frames = np.empty((t, n, 3))
    for k in range(t):
        row = _floats(
            reader, reader.next(f"position frame {k}").split(), n * 3, f"frame {k}"
        )
        frames[k] = row.reshape(n, 3)
    rotations = None
    marker = reader.next("end marker")
    if marker == "rotations":
        root = np.empty((t, 3))
        quats = np.empty((t, n, 4))
        for k in range(t):
            row = _floats(
                reader,
                reader.next(f"rotation frame {k}").split(),
                3 + 4 * n,
                f"rotation frame {k}",
            )
            root[k] = row[:3]
            quats[k] = row[3:].reshape(n, 4)
        try:
            rotations = RotationMotion(root, quats, rate)
        except Exception as exc:
            raise ClipFormatError(f"{source}: invalid rotations section: {exc}") from None
        marker = reader.next("end marker")
    if marker != "end":
        raise reader.error(f"expected 'end', found {marker!r}")
    reader.done()
    try:
        motion = Motion(frames, rate)
    except Exception as exc:
        raise ClipFormatError(f"{source}: invalid motion data: {exc}") from None
    return ClipData(tuple(names), parents, lengths, motion, rotations)


# ---------------------------------------------------------------------------
# dataset directories


def write_dataset(directory, dataset: Dataset) -> None:
    dataset.validate()
    directory = str(directory)
    clips_dir = os.path.join(directory, "clips")
    os.makedirs(clips_dir, exist_ok=True)
    canonical = dataset.characters[0].skeleton
    lines = [
        f"{DATASET_MAGIC} {SCHEMA_VERSION}",
        f"joints {canonical.joint_count}",
        "names " + " ".join(_check_token(n, "joint name") for n in canonical.joint_name),
        "parents " + " ".join(str(int(p)) for p in canonical.parent),
        "directions " + _fmt_row(canonical.rest_direction, _EXACT_FMT),
    ]
    for spec in dataset.characters:
        _check_token(spec.character_id, "character id")
        lines.append(
            f"character {spec.character_id} "
            + _fmt_row(spec.skeleton.bone_length, _EXACT_FMT)
            + " / "
            + _fmt_row(spec.flexibility, _EXACT_FMT)
        )
    for clip in dataset.clips:
        _check_token(clip.clip_id, "clip id")
        rel = os.path.join("clips", f"{clip.clip_id}.clip")
        spec = dataset.character(clip.character_id)
        write_clip(
            os.path.join(directory, rel),
            spec.skeleton.joint_name,
            spec.skeleton.parent,
            spec.skeleton.bone_length,
            clip.motion,
            clip.rotations,
        )
        pairing = clip.pairing_key if clip.pairing_key is not None else "-"
        seed = str(clip.seed) if clip.seed is not None else "-"
        lines.append(
            f"clip {clip.character_id} {clip.clip_id} {clip.split} {pairing} {seed} {rel}"
        )
    lines.append("end")
    with open(os.path.join(directory, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset(directory) -> Dataset:
    directory = str(directory)
    manifest_path = os.path.join(directory, "manifest.txt")
    if not os.path.exists(manifest_path):
        raise ClipFormatError(f"{directory}: missing manifest.txt")
    with open(manifest_path) as fh:
        reader = _LineReader(fh.read(), manifest_path)
    header = reader.next("header")
    if header.split() != [DATASET_MAGIC, SCHEMA_VERSION]:
        raise ClipFormatError(
            f"{manifest_path}: bad header {header!r}, "
            f"expected '{DATASET_MAGIC} {SCHEMA_VERSION}'"
        )
    joints_str = _single(reader, "joints")
    try:
        n = int(joints_str)
    except ValueError:
        raise reader.error(f"joints: bad count {joints_str!r}") from None
    names = _expect_keyword(reader, "names")
    if len(names) != n:
        raise reader.error(f"names: expected {n} labels, found {len(names)}")
    parent_parts = _expect_keyword(reader, "parents")
    try:
        parents = np.array([int(p) for p in parent_parts], dtype=np.int64)
    except ValueError as exc:
        raise reader.error(f"parents: {exc}") from None
    if parents.shape != (n,):
        raise reader.error(f"parents: expected {n} entries, found {parents.shape[0]}")
    directions = _floats(
        reader, _expect_keyword(reader, "directions"), (n - 1) * 3, "directions"
    ).reshape(n - 1, 3)
    characters: list[CharacterSpec] = []
    clips: list[ClipRecord] = []
    line = reader.next("character or clip lines")
    while line != "end":
        parts = line.split()
        if parts[0] == "character":
            if len(parts) != 2 + (n - 1) + 1 + n:
                raise reader.error(
                    f"character: expected id, {n - 1} lengths, '/', {n} flexibility values"
                )
            char_id = parts[1]
            lengths = _floats(reader, parts[2 : 2 + n - 1], n - 1, "character lengths")
            if parts[2 + n - 1] != "/":
                raise reader.error("character: missing '/' separator")
            flex = _floats(reader, parts[2 + n :], n, "character flexibility")
            try:
                skeleton = Skeleton(parents, directions, lengths, tuple(names))
                characters.append(CharacterSpec(char_id, skeleton, flex))
            except Exception as exc:
                raise reader.error(f"character {char_id}: {exc}") from None
        elif parts[0] == "clip":
            if len(parts) != 7:
                raise reader.error("clip: expected 6 fields")
            _, char_id, clip_id, split, pairing, seed_str, rel = parts
            clip_path = os.path.join(directory, rel)
            if not os.path.exists(clip_path):
                raise reader.error(f"clip file {rel!r} does not exist")
            data = read_clip(clip_path)
            if data.parents.tolist() != parents.tolist() or data.motion.joint_count != n:
                raise ClipFormatError(
                    f"{clip_path}: topology disagrees with the dataset manifest"
                )
            try:
                seed = int(seed_str) if seed_str != "-" else None
            except ValueError:
                raise reader.error(f"clip: bad seed {seed_str!r}") from None
            clips.append(
                ClipRecord(
                    char_id,
                    clip_id,
                    data.motion,
                    data.rotations,
                    split,
                    pairing if pairing != "-" else None,
                    seed,
                )
            )
        else:
            raise reader.error(f"unknown keyword {parts[0]!r}")
        line = reader.next("end marker")
    reader.done()
    dataset = Dataset(characters, clips)
    dataset.validate()
    return dataset
