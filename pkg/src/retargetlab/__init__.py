"""retargetlab: unpaired skeleton-to-skeleton motion retargeting lab.

Graph-convolutional encoder/decoder trained adversarially on unpaired motion
clips, two analytic baselines, a synthetic paired/unpaired dataset generator,
a BVH-subset parser, and the evaluation protocol tying them together.
"""

__version__ = "0.1.0"

from .datagen import (
    CharacterSpec,
    ClipRecord,
    Dataset,
    default_skeleton,
    generate_character_family,
    generate_rotation_clip,
    synthesize_dataset,
)
from .errors import (
    BvhParseError,
    ClipFormatError,
    ConfigError,
    NonFiniteError,
    RetargetLabError,
    ShapeError,
    TrainingAborted,
    ValidationError,
)
from .estimators import DirectionCopyRetargeter, NeuralRetargeter, PositionCopyRetargeter
from .skeleton import (
    Motion,
    RotationMotion,
    Skeleton,
    bone_lengths_from_motion,
    forward_kinematics,
    root_center,
    validate_skeleton,
)

__all__ = [
    "__version__",
    "BvhParseError",
    "CharacterSpec",
    "ClipFormatError",
    "ClipRecord",
    "ConfigError",
    "Dataset",
    "DirectionCopyRetargeter",
    "Motion",
    "NeuralRetargeter",
    "NonFiniteError",
    "PositionCopyRetargeter",
    "RetargetLabError",
    "RotationMotion",
    "ShapeError",
    "Skeleton",
    "TrainingAborted",
    "ValidationError",
    "bone_lengths_from_motion",
    "default_skeleton",
    "forward_kinematics",
    "generate_character_family",
    "generate_rotation_clip",
    "root_center",
    "synthesize_dataset",
    "validate_skeleton",
]
