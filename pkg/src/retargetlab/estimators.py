"""sklearn-style estimator facade over the retargeting pipeline.

All three retargeters follow the fit/transform contract with get_params /
set_params from BaseEstimator, so they compose with pipelines and model
selection tooling. X for transform is a Motion or a list of Motions; fit
takes a Dataset (the baselines ignore it beyond recording the topology).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .datagen import Dataset
from .errors import ValidationError
from .evaluation import direction_copy, position_copy
from .models import ModelParams, retarget_motion
from .skeleton import Motion
from .training import TrainConfig, fit_models
from .objectives import LossWeights
from .models import HyperParams


def _as_motion_list(X) -> tuple[list[Motion], bool]:
    if isinstance(X, Motion):
        return [X], True
    motions = list(X)
    if not all(isinstance(m, Motion) for m in motions):
        raise ValidationError("X must be a Motion or a sequence of Motions")
    return motions, False


class PositionCopyRetargeter(BaseEstimator, TransformerMixin):
    """Identity baseline: the source joint positions are the prediction."""

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        motions, single = _as_motion_list(X)
        out = [position_copy(m) for m in motions]
        return out[0] if single else out


class DirectionCopyRetargeter(BaseEstimator, TransformerMixin):
    """Analytic baseline: keep source bone directions, apply target lengths.

    target_lengths and parents may be given at construction or inferred from
    fit(dataset, target_character=...).
    """

    def __init__(self, target_lengths=None, parents=None):
        self.target_lengths = target_lengths
        self.parents = parents

    def fit(self, X: Dataset | None = None, y=None, target_character: str | None = None):
        if X is not None and target_character is not None:
            spec = X.character(target_character)
            self.target_lengths_ = np.asarray(spec.skeleton.bone_length)
            self.parents_ = np.asarray(spec.skeleton.parent)
        else:
            if self.target_lengths is None or self.parents is None:
                raise ValidationError(
                    "DirectionCopyRetargeter needs target_lengths and parents, "
                    "or fit(dataset, target_character=...)"
                )
            self.target_lengths_ = np.asarray(self.target_lengths, dtype=np.float64)
            self.parents_ = np.asarray(self.parents, dtype=np.int64)
        return self

    def transform(self, X):
        if not hasattr(self, "target_lengths_"):
            self.fit()
        motions, single = _as_motion_list(X)
        out = [direction_copy(m, self.target_lengths_, self.parents_) for m in motions]
        return out[0] if single else out


class NeuralRetargeter(BaseEstimator, TransformerMixin):
    """The trainable encoder/decoder retargeter.

    fit(dataset) runs adversarial training on the unpaired train split;
    transform(motions) translates onto the configured target character
    (target_character id, or explicit target_lengths). Fitted state lives in
    params_ and can be exported/imported as a checkpoint via models.save_checkpoint.
    """

    def __init__(
        self,
        mode: str = "unit",
        channels: tuple[int, int, int] = (16, 32, 64),
        latent_dim: int = 32,
        clip_len: int = 32,
        variant: str = "upsample",
        steps: int = 500,
        batch_size: int = 4,
        learning_rate: float = 5e-4,
        beta1: float = 0.5,
        beta2: float = 0.999,
        lambda_cycle: float = 10.0,
        lambda_vae: float = 10.0,
        lambda_latent: float = 10.0,
        lambda_z: float = 0.01,
        seed: int = 0,
        target_character: str | None = None,
        target_lengths=None,
    ):
        self.mode = mode
        self.channels = channels
        self.latent_dim = latent_dim
        self.clip_len = clip_len
        self.variant = variant
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.lambda_cycle = lambda_cycle
        self.lambda_vae = lambda_vae
        self.lambda_latent = lambda_latent
        self.lambda_z = lambda_z
        self.seed = seed
        self.target_character = target_character
        self.target_lengths = target_lengths

    def _config(self) -> TrainConfig:
        return TrainConfig(
            mode=self.mode,
            steps=self.steps,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            weights=LossWeights(
                self.lambda_cycle, self.lambda_vae, self.lambda_latent, self.lambda_z
            ),
            seed=self.seed,
            hyper=HyperParams(tuple(self.channels), self.latent_dim, self.clip_len, self.variant),
        )

    def fit(self, X: Dataset, y=None):
        result = fit_models(X, self._config())
        self.params_ = result.params
        self.trace_ = [(step, bd.total_g) for step, bd in result.trace]
        if self.target_character is not None:
            self.target_lengths_ = np.asarray(
                X.character(self.target_character).skeleton.bone_length
            )
        elif self.target_lengths is not None:
            self.target_lengths_ = np.asarray(self.target_lengths, dtype=np.float64)
        else:
            self.target_lengths_ = None
        return self

    def _require_fitted(self) -> ModelParams:
        if not hasattr(self, "params_"):
            raise NotFittedError("NeuralRetargeter must be fitted before transform")
        return self.params_

    def transform(self, X, target_lengths=None):
        params = self._require_fitted()
        lengths = target_lengths if target_lengths is not None else self.target_lengths_
        if lengths is None:
            raise ValidationError(
                "no target lengths: pass target_lengths or set target_character"
            )
        motions, single = _as_motion_list(X)
        out = [retarget_motion(m, lengths, params) for m in motions]
        return out[0] if single else out

    def retarget(self, motion: Motion, target_lengths) -> Motion:
        """Explicit-lengths convenience wrapper around transform."""
        return self.transform(motion, target_lengths=target_lengths)
