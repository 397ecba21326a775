"""Synthetic characters and motions with the unpaired-train / paired-test protocol.

Training clips are fresh seeded rotation clips realized on exactly one
character each, so no motion is shared across training characters. Test
motions reuse one rotation clip per pairing key across every held-out
character: in "exact" mode the rotations are applied verbatim (direction copy
is then a perfect retarget and supplies a ground-truth oracle the original
animation data lacked); in "flexibility" mode each character's rotations are
slerped toward identity by its per-joint flexibility before FK.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rotations
from .errors import ValidationError
from .skeleton import (
    Motion,
    RotationMotion,
    Skeleton,
    forward_kinematics,
    require_valid,
)

TRAIN, TEST = "train", "test"
MODES = ("exact", "flexibility")

# seeded sub-streams: clip k of a dataset draws from dataset_seed * 2**20 + k,
# so clip seeds are distinct by construction and scanning a manifest can prove
# the unpaired-train invariant
_CLIP_SEED_STRIDE = 2**20


@dataclass(frozen=True)
class CharacterSpec:
    """A character: its skeleton plus per-joint flexibility in (0, 1]."""

    character_id: str
    skeleton: Skeleton
    flexibility: np.ndarray

    def __post_init__(self):
        require_valid(self.skeleton)
        flex = np.asarray(self.flexibility, dtype=np.float64)
        if flex.shape != (self.skeleton.joint_count,):
            raise ValidationError(
                f"flexibility must have {self.skeleton.joint_count} entries, got {flex.shape}"
            )
        if np.any(flex <= 0.0) or np.any(flex > 1.0):
            bad = int(np.argmax((flex <= 0.0) | (flex > 1.0)))
            raise ValidationError(f"flexibility out of (0, 1] at joint {bad}")
        object.__setattr__(self, "flexibility", flex)


@dataclass(frozen=True)
class ClipRecord:
    character_id: str
    clip_id: str
    motion: Motion
    rotations: RotationMotion | None
    split: str
    pairing_key: str | None = None
    seed: int | None = None


@dataclass
class Dataset:
    """Character-tagged motion clips with unpaired-train / paired-test splits."""

    characters: list[CharacterSpec]
    clips: list[ClipRecord] = field(default_factory=list)

    def character(self, character_id: str) -> CharacterSpec:
        for spec in self.characters:
            if spec.character_id == character_id:
                return spec
        raise ValidationError(f"unknown character {character_id!r}")

    def split_characters(self, split: str) -> list[str]:
        seen: list[str] = []
        for clip in self.clips:
            if clip.split == split and clip.character_id not in seen:
                seen.append(clip.character_id)
        return seen

    def clips_of(self, character_id: str, split: str | None = None) -> list[ClipRecord]:
        return [
            c
            for c in self.clips
            if c.character_id == character_id and (split is None or c.split == split)
        ]

    def paired_clip(self, pairing_key: str, character_id: str) -> ClipRecord:
        for clip in self.clips:
            if clip.pairing_key == pairing_key and clip.character_id == character_id:
                return clip
        raise ValidationError(f"no clip for pairing {pairing_key!r} on {character_id!r}")

    def pairing_keys(self) -> list[str]:
        keys: list[str] = []
        for clip in self.clips:
            if clip.pairing_key is not None and clip.pairing_key not in keys:
                keys.append(clip.pairing_key)
        return keys

    def validate(self) -> None:
        """Raise ValidationError naming the first violated dataset invariant."""
        ids = [c.character_id for c in self.characters]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate character ids")
        known = set(ids)
        train_chars, test_chars = set(), set()
        train_clip_owner: dict[str, str] = {}
        for clip in self.clips:
            if clip.character_id not in known:
                raise ValidationError(f"clip {clip.clip_id!r} references unknown character")
            if clip.split == TRAIN:
                train_chars.add(clip.character_id)
                owner = train_clip_owner.get(clip.clip_id)
                if owner is not None and owner != clip.character_id:
                    raise ValidationError(
                        f"train clip id {clip.clip_id!r} appears under two characters "
                        f"({owner!r} and {clip.character_id!r})"
                    )
                train_clip_owner[clip.clip_id] = clip.character_id
            elif clip.split == TEST:
                test_chars.add(clip.character_id)
                if clip.pairing_key is None:
                    raise ValidationError(f"test clip {clip.clip_id!r} lacks a pairing key")
            else:
                raise ValidationError(f"unknown split {clip.split!r} on clip {clip.clip_id!r}")
        overlap = train_chars & test_chars
        if overlap:
            raise ValidationError(
                f"character {sorted(overlap)[0]!r} appears in both train and test splits"
            )
        for key in self.pairing_keys():
            members = {c.character_id for c in self.clips if c.pairing_key == key}
            if members != test_chars:
                raise ValidationError(
                    f"pairing key {key!r} covers {sorted(members)}, "
                    f"expected every test character {sorted(test_chars)}"
                )


def generate_character_family(
    canonical: Skeleton,
    count: int,
    scale_range: tuple[float, float],
    seed: int,
    flexibility_range: tuple[float, float] = (1.0, 1.0),
    id_prefix: str = "char",
) -> list[CharacterSpec]:
    """Characters sharing the canonical topology with per-bone lengths scaled
    by independent uniform draws from scale_range. Deterministic per seed."""
    require_valid(canonical)
    lo, hi = float(scale_range[0]), float(scale_range[1])
    if not (0.0 < lo <= hi) or not np.isfinite(hi):
        raise ValidationError(f"scale_range must satisfy 0 < lo <= hi, got {scale_range}")
    flo, fhi = float(flexibility_range[0]), float(flexibility_range[1])
    if not (0.0 < flo <= fhi <= 1.0):
        raise ValidationError(
            f"flexibility_range must satisfy 0 < lo <= hi <= 1, got {flexibility_range}"
        )
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    family = []
    for k in range(count):
        scales = rng.uniform(lo, hi, size=canonical.bone_count)
        flex = rng.uniform(flo, fhi, size=canonical.joint_count)
        family.append(
            CharacterSpec(
                f"{id_prefix}{k:02d}",
                canonical.with_bone_lengths(canonical.bone_length * scales),
                flex,
            )
        )
    return family


def generate_rotation_clip(
    canonical: Skeleton, length: int, seed: int, frame_rate: float = 30.0
) -> RotationMotion:
    """A smooth random clip: per joint and Euler axis, a sum of 1-3 seeded
    sinusoids with total amplitude <= 60 degrees and frequencies 0.2-2 Hz;
    the root follows a slow sinusoidal path. Deterministic per seed."""
    if length < 1:
        raise ValidationError(f"clip length must be >= 1, got {length}")
    rng = np.random.default_rng(seed)
    n = canonical.joint_count
    t = np.arange(length) / frame_rate  # seconds
    angles = np.zeros((length, n, 3))
    for j in range(n):
        for axis in range(3):
            waves = int(rng.integers(1, 4))
            total_amp = np.deg2rad(rng.uniform(10.0, 60.0))
            parts = rng.uniform(0.5, 1.0, size=waves)
            amps = total_amp * parts / parts.sum()
            freqs = rng.uniform(0.2, 2.0, size=waves)
            phases = rng.uniform(0.0, 2.0 * np.pi, size=waves)
            angles[:, j, axis] = np.sum(
                amps[None, :] * np.sin(2.0 * np.pi * freqs[None, :] * t[:, None] + phases[None, :]),
                axis=1,
            )
    quats = rotations.from_euler("XYZ", angles)
    root_amp = rng.uniform(0.0, 0.5, size=3)
    root_freq = rng.uniform(0.05, 0.3, size=3)
    root_phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
    root = root_amp[None, :] * np.sin(
        2.0 * np.pi * root_freq[None, :] * t[:, None] + root_phase[None, :]
    )
    return RotationMotion(root, rotations.normalize(quats), frame_rate)


def _flexed(clip: RotationMotion, flexibility: np.ndarray) -> RotationMotion:
    """Scale rotations toward identity, per joint, by the flexibility factor."""
    soft = rotations.slerp_identity(clip.joint_rotation, flexibility[None, :])
    return RotationMotion(clip.root_position, rotations.normalize(soft), clip.frame_rate)


def synthesize_dataset(
    family: list[CharacterSpec],
    train_chars: int,
    test_chars: int,
    clips_per_train_char: int,
    test_motions: int,
    mode: str,
    length: int,
    seed: int,
    frame_rate: float = 30.0,
) -> Dataset:
    """Build the unpaired-train / paired-test dataset from a character family.

    Train: clips_per_train_char fresh clips per training character. Test: each
    of test_motions rotation clips is realized on every test character under a
    shared pairing key.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    if train_chars + test_chars > len(family):
        raise ValidationError(
            f"need {train_chars}+{test_chars} characters, family has {len(family)}"
        )
    if train_chars < 1 or test_chars < 0:
        raise ValidationError("train_chars must be >= 1 and test_chars >= 0")
    base = seed * _CLIP_SEED_STRIDE
    counter = 0
    clips: list[ClipRecord] = []
    used = family[: train_chars + test_chars]
    for spec in used[:train_chars]:
        for c in range(clips_per_train_char):
            clip_seed = base + counter
            counter += 1
            rot = generate_rotation_clip(spec.skeleton, length, clip_seed, frame_rate)
            if mode == "flexibility":
                rot = _flexed(rot, spec.flexibility)
            clips.append(
                ClipRecord(
                    spec.character_id,
                    f"{spec.character_id}_clip{c:03d}",
                    forward_kinematics(spec.skeleton, rot),
                    None,
                    TRAIN,
                    seed=clip_seed,
                )
            )
    for m in range(test_motions):
        clip_seed = base + counter
        counter += 1
        key = f"motion{m:03d}"
        shared = generate_rotation_clip(used[0].skeleton, length, clip_seed, frame_rate)
        for spec in used[train_chars : train_chars + test_chars]:
            rot = shared if mode == "exact" else _flexed(shared, spec.flexibility)
            clips.append(
                ClipRecord(
                    spec.character_id,
                    f"{key}_{spec.character_id}",
                    forward_kinematics(spec.skeleton, rot),
                    rot,
                    TEST,
                    pairing_key=key,
                    seed=clip_seed,
                )
            )
    dataset = Dataset(list(used), clips)
    dataset.validate()
    return dataset


def default_skeleton(joint_count: int = 8) -> Skeleton:
    """A small biped-ish test skeleton; supports 2..12 joints."""
    parents = [-1, 0, 1, 1, 3, 1, 5, 0, 7, 0, 9, 2]
    directions = [
        (0, 1, 0),  # spine up
        (0, 1, 0),  # head up
        (1, 0, 0),  # left arm out
        (1, 0, 0),  # left hand out
        (-1, 0, 0),  # right arm out
        (-1, 0, 0),  # right hand out
        (0.6, -0.8, 0),  # left leg down
        (0, -1, 0),  # left foot down
        (-0.6, -0.8, 0),  # right leg down
        (0, -1, 0),  # right foot down
        (0, 1, 0),  # crown
    ]
    lengths = [0.45, 0.2, 0.3, 0.25, 0.3, 0.25, 0.45, 0.4, 0.45, 0.4, 0.1]
    names = [
        "hips", "spine", "head", "l_arm", "l_hand", "r_arm", "r_hand",
        "l_leg", "l_foot", "r_leg", "r_foot", "crown",
    ]
    if not (2 <= joint_count <= len(parents)):
        raise ValidationError(f"joint_count must be in [2, {len(parents)}], got {joint_count}")
    dirs = np.asarray(directions[: joint_count - 1], dtype=np.float64)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    return Skeleton(
        parents[:joint_count], dirs, lengths[: joint_count - 1], names[:joint_count]
    )
