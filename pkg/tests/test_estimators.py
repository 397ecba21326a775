import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from retargetlab.datagen import default_skeleton, generate_character_family, synthesize_dataset
from retargetlab.errors import ValidationError
from retargetlab.estimators import (
    DirectionCopyRetargeter,
    NeuralRetargeter,
    PositionCopyRetargeter,
)
from retargetlab.skeleton import Motion


def tiny_dataset(seed=0):
    family = generate_character_family(default_skeleton(5), 3, (0.8, 1.2), seed)
    return synthesize_dataset(family, 2, 1, 3, 1, "exact", 8, seed)


class TestSklearnProtocol:
    def test_get_params_round_trip(self):
        est = NeuralRetargeter(mode="cyclegan", steps=7, latent_dim=5)
        params = est.get_params()
        assert params["mode"] == "cyclegan" and params["steps"] == 7
        est.set_params(steps=9)
        assert est.steps == 9

    def test_clone_preserves_configuration(self):
        est = NeuralRetargeter(steps=11, channels=(2, 2, 2))
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_baselines_expose_fit_transform(self):
        est = PositionCopyRetargeter()
        m = Motion(np.zeros((2, 3, 3)))
        assert est.fit().transform(m) is m


class TestDirectionCopyRetargeter:
    def test_fit_from_dataset_character(self):
        ds = tiny_dataset()
        target = ds.split_characters("test")[0]
        est = DirectionCopyRetargeter().fit(ds, target_character=target)
        key = ds.pairing_keys()[0]
        src_char = [c for c in ds.split_characters("test") if c != target]
        # only one test character here, so retarget a train clip instead
        clip = ds.clips_of(ds.split_characters("train")[0], "train")[0]
        out = est.transform(clip.motion)
        spec = ds.character(target)
        from retargetlab.skeleton import bone_lengths_from_motion

        mean, dev = bone_lengths_from_motion(out, spec.skeleton.parent)
        np.testing.assert_allclose(mean, spec.skeleton.bone_length, atol=1e-12)

    def test_constructor_lengths(self):
        m = Motion(np.array([[[0.0, 0, 0], [0, 1, 0]]]))
        est = DirectionCopyRetargeter(target_lengths=[3.0], parents=[-1, 0])
        out = est.fit().transform(m)
        np.testing.assert_allclose(out.frames[0, 1], [0, 3, 0], atol=1e-12)

    def test_unconfigured_transform_rejected(self):
        with pytest.raises(ValidationError, match="target_lengths"):
            DirectionCopyRetargeter().transform(Motion(np.zeros((1, 2, 3))))

    def test_list_in_list_out(self):
        m = Motion(np.array([[[0.0, 0, 0], [0, 1, 0]]]))
        est = DirectionCopyRetargeter(target_lengths=[2.0], parents=[-1, 0]).fit()
        out = est.transform([m, m])
        assert isinstance(out, list) and len(out) == 2


class TestNeuralRetargeter:
    def test_transform_before_fit_raises(self):
        est = NeuralRetargeter()
        with pytest.raises(NotFittedError):
            est.transform(Motion(np.zeros((8, 5, 3))))

    def test_fit_then_transform_shapes(self):
        ds = tiny_dataset()
        target = ds.split_characters("test")[0]
        est = NeuralRetargeter(
            steps=2, channels=(2, 2, 2), latent_dim=2, clip_len=8,
            batch_size=2, seed=0, target_character=target,
        )
        est.fit(ds)
        assert hasattr(est, "params_")
        assert len(est.trace_) == 2
        clip = ds.clips_of(ds.split_characters("train")[0], "train")[0]
        out = est.transform(clip.motion)
        assert isinstance(out, Motion)
        assert out.frames.shape == clip.motion.frames.shape
        np.testing.assert_allclose(out.frames[:, 0], clip.motion.frames[:, 0], atol=1e-12)

    def test_transform_needs_target_lengths(self):
        ds = tiny_dataset()
        est = NeuralRetargeter(steps=1, channels=(2, 2, 2), latent_dim=2, clip_len=8, batch_size=1)
        est.fit(ds)
        with pytest.raises(ValidationError, match="target lengths"):
            est.transform(Motion(np.zeros((8, 5, 3))))
        out = est.retarget(Motion(np.zeros((8, 5, 3))), np.ones(4))
        assert out.frames.shape == (8, 5, 3)

    def test_fit_is_deterministic_per_seed(self):
        ds = tiny_dataset()
        kw = dict(steps=2, channels=(2, 2, 2), latent_dim=2, clip_len=8, batch_size=2, seed=3)
        a = NeuralRetargeter(**kw).fit(ds)
        b = NeuralRetargeter(**kw).fit(ds)
        assert a.trace_ == b.trace_
        for group in ("enc", "dec", "disc"):
            for key in a.params_.group(group):
                np.testing.assert_array_equal(
                    a.params_.group(group)[key], b.params_.group(group)[key]
                )
