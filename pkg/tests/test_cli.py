import os

import numpy as np
import pytest

from retargetlab.cli import main
from retargetlab.clipio import read_clip, read_dataset, write_clip
from retargetlab.datagen import default_skeleton, generate_rotation_clip
from retargetlab.skeleton import forward_kinematics


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "data"
    code = run(
        "gen-data", "--chars", "4", "--train-chars", "2", "--clips", "3",
        "--test-motions", "2", "--mode", "exact", "--joints", "5",
        "--frames", "8", "--seed", "7", "--out", str(out),
    )
    assert code == 0
    return out


class TestGenData:
    def test_dataset_directory_complete(self, dataset_dir):
        ds = read_dataset(dataset_dir)
        assert len(ds.clips) == 2 * 3 + 2 * 2
        assert (dataset_dir / "manifest.txt").exists()

    def test_seeded_invocations_are_bitwise_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = [
            "gen-data", "--chars", "3", "--train-chars", "2", "--clips", "2",
            "--test-motions", "1", "--mode", "exact", "--joints", "4",
            "--frames", "8", "--seed", "11",
        ]
        assert run(*args, "--out", str(a)) == 0
        assert run(*args, "--out", str(b)) == 0
        assert (a / "manifest.txt").read_bytes() == (b / "manifest.txt").read_bytes()
        for clip in sorted((a / "clips").iterdir()):
            assert clip.read_bytes() == (b / "clips" / clip.name).read_bytes()

    def test_train_chars_exceeding_chars_is_domain_error(self, tmp_path):
        out = tmp_path / "never"
        code = run(
            "gen-data", "--chars", "2", "--train-chars", "5", "--seed", "1",
            "--out", str(out),
        )
        assert code == 1
        assert not out.exists()


@pytest.fixture(scope="module")
def run_dir(dataset_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-train") / "run"
    code = run(
        "train", "--dataset", str(dataset_dir), "--out", str(out),
        "--mode", "unit", "--steps", "2", "--batch-size", "2",
        "--clip-len", "8", "--channels", "2,2,2", "--latent-dim", "2",
        "--seed", "0", "--checkpoint-every", "0",
    )
    assert code == 0
    return out


class TestTrainEval:
    def test_train_outputs(self, run_dir):
        assert (run_dir / "checkpoint_final.npz").exists()
        lines = (run_dir / "trace.tsv").read_text().splitlines()
        assert len(lines) == 3
        assert (run_dir / "config_effective.txt").read_text().find("mode = unit") >= 0

    def test_eval_writes_report(self, dataset_dir, run_dir, tmp_path):
        out = tmp_path / "report"
        code = run(
            "eval", "--ckpt", str(run_dir / "checkpoint_final.npz"),
            "--dataset", str(dataset_dir), "--out", str(out),
        )
        assert code == 0
        text = (out / "report.txt").read_text()
        assert "Position copy" in text and "Rotation copy" in text and "UNIT" in text
        kv = (out / "report.kv").read_text()
        assert "position_copy.reconstruction_train_mm = 0.0" in kv

    def test_baseline_subcommand(self, dataset_dir, capsys):
        assert run("baseline", "--dataset", str(dataset_dir)) == 0
        printed = capsys.readouterr().out
        assert "Rotation copy" in printed

    def test_config_file_with_flag_overrides(self, dataset_dir, tmp_path):
        config = tmp_path / "train.cfg"
        config.write_text(
            "mode = cyclegan\nsteps = 9\nchannels = 2,2,2\nlatent_dim = 2\nclip_len = 8\nbatch_size = 2\n"
        )
        out = tmp_path / "run"
        code = run(
            "train", "--config", str(config), "--dataset", str(dataset_dir),
            "--out", str(out), "--steps", "1",
        )
        assert code == 0
        effective = (out / "config_effective.txt").read_text()
        assert "steps = 1" in effective  # flag wins
        assert "mode = cyclegan" in effective  # file value kept

    def test_unknown_config_key_is_domain_error(self, dataset_dir, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("optimizer = sgd\n")
        code = run(
            "train", "--config", str(config), "--dataset", str(dataset_dir),
            "--out", str(tmp_path / "x"),
        )
        assert code == 1


class TestRetarget:
    @pytest.fixture()
    def clip_file(self, tmp_path):
        sk = default_skeleton(5)
        motion = forward_kinematics(sk, generate_rotation_clip(sk, 8, seed=3))
        path = tmp_path / "clip.clip"
        write_clip(path, sk.joint_name, sk.parent, sk.bone_length, motion)
        return sk, path

    def test_direction_copy_identity_lengths(self, clip_file, tmp_path):
        sk, path = clip_file
        lengths = tmp_path / "lengths.txt"
        lengths.write_text("\n".join(repr(float(v)) for v in sk.bone_length))
        out = tmp_path / "pred.clip"
        code = run(
            "retarget", "--in", str(path), "--lengths", str(lengths),
            "--method", "direction_copy", "--out", str(out),
        )
        assert code == 0
        pred = read_clip(out)
        src = read_clip(path)
        np.testing.assert_allclose(pred.motion.frames, src.motion.frames, atol=1e-6)

    def test_model_without_checkpoint_is_domain_error(self, clip_file, tmp_path):
        sk, path = clip_file
        lengths = tmp_path / "lengths.txt"
        lengths.write_text(" ".join("1.0" for _ in range(sk.bone_count)))
        out = tmp_path / "pred.clip"
        code = run(
            "retarget", "--in", str(path), "--lengths", str(lengths),
            "--method", "model", "--out", str(out),
        )
        assert code == 1
        assert not out.exists()


class TestRenderAndGradcheck:
    def test_render_single_frame(self, tmp_path):
        sk = default_skeleton(4)
        motion = forward_kinematics(sk, generate_rotation_clip(sk, 4, seed=5))
        clip = tmp_path / "c.clip"
        write_clip(clip, sk.joint_name, sk.parent, sk.bone_length, motion)
        out = tmp_path / "frame.svg"
        assert run("render", "--in", str(clip), "--frame", "2", "--out", str(out)) == 0
        assert out.read_text().startswith("<svg")

    def test_render_out_of_range_is_domain_error(self, tmp_path):
        sk = default_skeleton(4)
        motion = forward_kinematics(sk, generate_rotation_clip(sk, 4, seed=5))
        clip = tmp_path / "c.clip"
        write_clip(clip, sk.joint_name, sk.parent, sk.bone_length, motion)
        out = tmp_path / "frame.svg"
        assert run("render", "--in", str(clip), "--frame", "9", "--out", str(out)) == 1
        assert not out.exists()

    def test_gradcheck_command_passes(self, capsys):
        assert run("gradcheck", "--seed", "1") == 0
        printed = capsys.readouterr().out
        assert "composite/x" in printed and "ok" in printed


class TestUsageErrors:
    def test_unknown_subcommand_exits_two(self, capsys):
        assert run("frobnicate") == 2
        capsys.readouterr()

    def test_missing_required_flag_exits_two(self, capsys):
        assert run("gen-data", "--chars", "3") == 2
        capsys.readouterr()

    def test_no_partial_outputs_on_usage_error(self, tmp_path, capsys):
        out = tmp_path / "data"
        assert run("gen-data", "--out", str(out)) == 2  # --seed missing
        assert not out.exists()
        capsys.readouterr()
