import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation as ScipyRotation

from retargetlab import rotations
from retargetlab.errors import ShapeError, ValidationError
from retargetlab.skeleton import (
    Motion,
    RotationMotion,
    Skeleton,
    bone_lengths_from_motion,
    forward_kinematics,
    root_center,
    validate_skeleton,
)


def chain_skeleton(lengths=(1.0, 1.0), direction=(0.0, 1.0, 0.0)):
    n = len(lengths) + 1
    dirs = np.tile(np.asarray(direction, dtype=float), (n - 1, 1))
    return Skeleton(np.arange(-1, n - 1), dirs, np.asarray(lengths, dtype=float))


def identity_rotation(t, n, root=None):
    quat = np.tile(rotations.identity(), (t, n, 1))
    root_pos = np.zeros((t, 3)) if root is None else np.asarray(root, dtype=float)
    return RotationMotion(root_pos, quat)


def random_tree_parents(rng, n):
    return np.array([-1] + [int(rng.integers(0, i)) for i in range(1, n)])


def random_skeleton(rng, n):
    dirs = rng.normal(size=(n - 1, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return Skeleton(random_tree_parents(rng, n), dirs, rng.uniform(0.2, 2.0, n - 1))


def random_rotation_motion(rng, t, n):
    quat = rotations.normalize(rng.normal(size=(t, n, 4)))
    return RotationMotion(rng.normal(size=(t, 3)), quat)


class TestQuaternions:
    def test_multiply_rotate_match_scipy(self):
        rng = np.random.default_rng(0)
        a = rotations.normalize(rng.normal(size=(50, 4)))
        b = rotations.normalize(rng.normal(size=(50, 4)))
        v = rng.normal(size=(50, 3))
        ab = rotations.multiply(a, b)
        # scipy is (x, y, z, w); ours is (w, x, y, z)
        sa = ScipyRotation.from_quat(np.roll(a, -1, axis=-1))
        sb = ScipyRotation.from_quat(np.roll(b, -1, axis=-1))
        np.testing.assert_allclose(
            rotations.rotate(ab, v), (sa * sb).apply(v), atol=1e-12
        )

    def test_from_euler_intrinsic_matches_scipy(self):
        rng = np.random.default_rng(1)
        angles = rng.uniform(-np.pi, np.pi, size=(40, 3))
        for order in ("XYZ", "ZXY", "ZYX"):
            q = rotations.from_euler(order, angles)
            v = rng.normal(size=(40, 3))
            expected = ScipyRotation.from_euler(order, angles).apply(v)
            np.testing.assert_allclose(rotations.rotate(q, v), expected, atol=1e-12)

    def test_slerp_identity_endpoints(self):
        rng = np.random.default_rng(2)
        q = rotations.normalize(rng.normal(size=(20, 4)))
        np.testing.assert_allclose(
            np.abs(rotations.slerp_identity(q, 1.0)), np.abs(q), atol=1e-12
        )
        np.testing.assert_allclose(
            rotations.slerp_identity(q, 0.0), np.tile(rotations.identity(), (20, 1)), atol=1e-12
        )

    def test_slerp_identity_halves_angle(self):
        q = rotations.about_axis("Z", np.array(np.pi / 2))
        half = rotations.slerp_identity(q, 0.5)
        np.testing.assert_allclose(half, rotations.about_axis("Z", np.array(np.pi / 4)), atol=1e-12)


class TestValidateSkeleton:
    def test_canonical_chain_is_valid(self):
        assert validate_skeleton(chain_skeleton()).ok

    def test_zero_length_is_named(self):
        s = Skeleton([-1, 0, 1], np.tile([0.0, 1.0, 0.0], (2, 1)), [0.0, 1.0])
        result = validate_skeleton(s)
        assert not result.ok
        assert result.error == "non-positive length at bone 0"

    def test_mutual_parents_is_cycle(self):
        s = Skeleton([1, 0], np.array([[0.0, 1.0, 0.0]]), [1.0])
        result = validate_skeleton(s)
        assert not result.ok
        assert "cycle" in result.error or "root" in result.error

    def test_multiple_roots_detected(self):
        s = Skeleton([-1, -1, 0], np.tile([0.0, 1.0, 0.0], (2, 1)), [1.0, 1.0])
        result = validate_skeleton(s)
        assert not result.ok
        assert "multiple roots" in result.error

    def test_non_unit_direction_detected(self):
        s = Skeleton([-1, 0], np.array([[0.0, 2.0, 0.0]]), [1.0])
        result = validate_skeleton(s)
        assert not result.ok
        assert "non-unit direction at bone 0" in result.error

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 10))
    def test_random_corruptions_are_caught(self, seed, n):
        """validate_skeleton accepts exactly the invariant-satisfying skeletons."""
        rng = np.random.default_rng(seed)
        s = random_skeleton(rng, n)
        assert validate_skeleton(s).ok
        kind = rng.integers(0, 4)
        parent = s.parent.copy()
        lengths = s.bone_length.copy()
        dirs = s.rest_direction.copy()
        if kind == 0:  # break the tree order
            i = int(rng.integers(1, n))
            parent[i] = int(rng.integers(i, n))
        elif kind == 1 and n > 2:  # second root
            parent[int(rng.integers(1, n))] = -1
        elif kind == 2:  # non-positive length
            lengths[int(rng.integers(0, n - 1))] = -rng.uniform(0.0, 1.0)
        else:  # non-unit direction
            dirs[int(rng.integers(0, n - 1))] *= 1.5
        corrupted = Skeleton(parent, dirs, lengths)
        if kind == 1 and n <= 2:
            return
        assert not validate_skeleton(corrupted).ok


class TestForwardKinematics:
    def test_identity_pose_stacks_bones(self):
        s = chain_skeleton()
        m = forward_kinematics(s, identity_rotation(1, 3))
        np.testing.assert_allclose(
            m.frames[0], [[0, 0, 0], [0, 1, 0], [0, 2, 0]], atol=1e-15
        )

    def test_root_rotation_rotates_whole_chain(self):
        # 90 degrees about +Z maps +Y to -X; hand evaluation of the recursion
        s = chain_skeleton()
        quat = np.tile(rotations.identity(), (1, 3, 1))
        quat[0, 0] = rotations.about_axis("Z", np.array(np.pi / 2))
        r = RotationMotion(np.zeros((1, 3)), quat)
        m = forward_kinematics(s, r)
        np.testing.assert_allclose(
            m.frames[0], [[0, 0, 0], [-1, 0, 0], [-2, 0, 0]], atol=1e-12
        )

    def test_rejects_joint_count_mismatch(self):
        with pytest.raises(ShapeError):
            forward_kinematics(chain_skeleton(), identity_rotation(1, 5))

    def test_frame_rate_carried_through(self):
        s = chain_skeleton()
        r = RotationMotion(np.zeros((2, 3)), np.tile(rotations.identity(), (2, 3, 1)), 120.0)
        assert forward_kinematics(s, r).frame_rate == 120.0

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 12), t=st.integers(1, 6))
    def test_rigidity_property(self, seed, n, t):
        """Every output bone length equals the skeleton's within 1e-9."""
        rng = np.random.default_rng(seed)
        s = random_skeleton(rng, n)
        m = forward_kinematics(s, random_rotation_motion(rng, t, n))
        for i in range(1, n):
            d = np.linalg.norm(m.frames[:, i] - m.frames[:, int(s.parent[i])], axis=-1)
            np.testing.assert_allclose(d, s.bone_length[i - 1], atol=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 12))
    def test_length_round_trip(self, seed, n):
        rng = np.random.default_rng(seed)
        s = random_skeleton(rng, n)
        m = forward_kinematics(s, random_rotation_motion(rng, 5, n))
        mean, dev = bone_lengths_from_motion(m, s.parent)
        np.testing.assert_allclose(mean, s.bone_length, atol=1e-9)
        assert dev.max() <= 1e-9


class TestBoneLengths:
    def test_single_frame_direct_distance(self):
        m = Motion(np.array([[[0.0, 0.0, 0.0], [0.0, 2.0, 0.0]]]))
        mean, dev = bone_lengths_from_motion(m, [-1, 0])
        np.testing.assert_allclose(mean, [2.0])
        np.testing.assert_allclose(dev, [0.0])

    def test_stretching_bone_reports_deviation(self):
        frames = np.array(
            [
                [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                [[0.0, 0.0, 0.0], [0.0, 3.0, 0.0]],
            ]
        )
        mean, dev = bone_lengths_from_motion(Motion(frames), [-1, 0])
        np.testing.assert_allclose(mean, [2.0])
        np.testing.assert_allclose(dev, [1.0])

    def test_empty_motion_rejected(self):
        with pytest.raises(ValidationError):
            bone_lengths_from_motion(Motion(np.zeros((0, 2, 3))), [-1, 0])


class TestRootCenter:
    def test_constant_offset_removed(self):
        rng = np.random.default_rng(3)
        frames = rng.normal(size=(4, 5, 3))
        shifted = Motion(frames + np.array([5.0, 5.0, 5.0]))
        np.testing.assert_allclose(
            root_center(shifted).frames, root_center(Motion(frames)).frames, atol=1e-12
        )

    def test_already_centered_unchanged(self):
        rng = np.random.default_rng(4)
        frames = rng.normal(size=(3, 4, 3))
        frames -= frames[:, :1, :]
        out = root_center(Motion(frames))
        np.testing.assert_array_equal(out.frames, frames)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_idempotent_bitwise(self, seed):
        rng = np.random.default_rng(seed)
        m = Motion(rng.normal(size=(3, 4, 3)))
        once = root_center(m)
        twice = root_center(once)
        np.testing.assert_array_equal(once.frames, twice.frames)
        assert np.all(twice.frames[:, 0] == 0.0)


class TestMotionTypes:
    def test_motion_rejects_nan(self):
        frames = np.zeros((1, 2, 3))
        frames[0, 0, 0] = np.nan
        with pytest.raises(ValidationError):
            Motion(frames)

    def test_rotation_motion_rejects_non_unit(self):
        quat = np.tile(rotations.identity(), (1, 2, 1)) * 1.1
        with pytest.raises(ValidationError):
            RotationMotion(np.zeros((1, 3)), quat)

    def test_motion_is_frozen(self):
        m = Motion(np.zeros((1, 2, 3)))
        with pytest.raises(ValueError):
            m.frames[0, 0, 0] = 1.0
