"""Command-line behavior: exit codes, artifacts, config precedence."""

import csv
import io
import json
import shlex
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from procnoise.cli import main
from procnoise.dataset import save_png
from procnoise.images import ImageTensor

from conftest import mock_cmd

ID_DIGIT_CMD = shlex.join(mock_cmd("--mode", "id-digit"))


def write_manifest_dataset(root, count=6, size=16, seed=0):
    """PNG directory whose ids (img<k>.png) are exact for the id-digit mock."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = []
    for k in range(count):
        data = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        save_png(ImageTensor(data=data), root / f"img{k}.png")
        lines.append(f"img{k}.png\t{k % 10}")
    (root / "labels.tsv").write_text("\n".join(lines) + "\n")
    return root


def write_cifar_batch(path, count=4, seed=0):
    rng = np.random.default_rng(seed)
    out = bytearray()
    for k in range(count):
        out.append(k % 10)
        out.extend(rng.integers(0, 256, size=3072, dtype=np.uint8).tobytes())
    path.write_bytes(bytes(out))
    return path


def eval_args(command, data_dir, out_dir, *extra):
    return [
        command,
        "--noise", "simplex",
        "--dim", "2",
        "--step", "4",
        "--eps", "0.031",
        "--dataset", "dir",
        "--data", str(data_dir),
        "--manifest", "labels.tsv",
        "--classifier-cmd", ID_DIGIT_CMD,
        "--out", str(out_dir),
        *extra,
    ]


def read_csv_rows(out_dir):
    return list(csv.reader(io.StringIO((out_dir / "reports.csv").read_text())))


class TestExitCodes:
    def test_missing_eps_is_usage_error(self, tmp_path):
        code = main(["generate", "--noise", "gaussian", "--out", str(tmp_path / "o")])
        assert code == 2

    def test_missing_noise_is_usage_error(self, tmp_path):
        code = main(["generate", "--eps", "0.031", "--out", str(tmp_path / "o")])
        assert code == 2

    def test_epsilon_out_of_range_is_usage_error(self, tmp_path):
        code = main(["generate", "--noise", "gaussian", "--eps", "1.5", "--out", str(tmp_path / "o")])
        assert code == 2

    def test_excess_slice_coords_is_usage_error(self, tmp_path):
        code = main([
            "generate", "--noise", "simplex", "--dim", "2", "--slice", "1.0",
            "--eps", "0.031", "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_even_median_window_is_usage_error(self, tmp_path, capsys):
        data = write_manifest_dataset(tmp_path / "data")
        code = main(
            eval_args("defense-eval", data, tmp_path / "o", "--filter", "median", "--window", "4")
        )
        assert code == 2
        assert "window" in capsys.readouterr().err

    def test_missing_dataset_path_is_runtime_error(self, tmp_path):
        code = main([
            "attack-eval", "--noise", "gaussian", "--eps", "0.031",
            "--dataset", "cifar10", "--data", str(tmp_path / "missing.bin"),
            "--classifier-cmd", ID_DIGIT_CMD,
            "--out", str(tmp_path / "o"),
        ])
        assert code == 1

    def test_missing_classifier_is_usage_error(self, tmp_path):
        data = write_manifest_dataset(tmp_path / "data")
        code = main([
            "attack-eval", "--noise", "gaussian", "--eps", "0.031",
            "--dataset", "dir", "--data", str(data), "--manifest", "labels.tsv",
            "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epsilon": [0.031]}))
        code = main(["generate", "--config", str(cfg), "--noise", "gaussian"])
        assert code == 2

    def test_missing_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == 2

    def test_classifier_failure_is_runtime_error(self, tmp_path, capsys):
        data = write_manifest_dataset(tmp_path / "data")
        bad_cmd = shlex.join(mock_cmd("--mode", "id-digit", "--fail-after", "0"))
        code = main(eval_args("attack-eval", data, tmp_path / "o", "--classifier-cmd", bad_cmd))
        assert code == 1
        assert "FAILED" in capsys.readouterr().err


class TestGenerate:
    def test_grayscale_field_and_metadata(self, tmp_path):
        out = tmp_path / "o"
        code = main([
            "generate", "--noise", "simplex", "--dim", "2", "--step", "4",
            "--eps", "0.031", "--height", "32", "--width", "48", "--out", str(out),
        ])
        assert code == 0
        img = Image.open(out / "field.png")
        assert img.mode == "L"
        assert img.size == (48, 32)
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["height"] == 32 and meta["width"] == 48
        assert meta["outputs"] == ["field.png"]
        assert len(meta["fingerprints"]) == 1
        config = json.loads((out / "config.json").read_text())
        assert config["noise"] == "simplex"
        assert config["eps"] == [0.031]

    def test_worley_texture_has_red_features(self, tmp_path):
        out = tmp_path / "o"
        code = main([
            "generate", "--noise", "worley", "--points", "40",
            "--eps", "0.031", "--height", "64", "--width", "64", "--out", str(out),
        ])
        assert code == 0
        img = Image.open(out / "field.png")
        assert img.mode == "RGBA"
        arr = np.asarray(img)
        red = (arr[:, :, 0] == 255) & (arr[:, :, 1] == 0) & (arr[:, :, 2] == 0)
        assert red.sum() == 40
        assert (arr[:, :, 3] == 255).all()

    def test_adversarial_image_per_epsilon(self, tmp_path, rng):
        source = tmp_path / "input.png"
        data = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        save_png(ImageTensor(data=data), source)
        out = tmp_path / "o"
        code = main([
            "generate", "--noise", "simplex", "--dim", "2", "--step", "4",
            "--eps", "0.0155", "--eps", "0.031", "--image", str(source),
            "--height", "32", "--width", "32", "--out", str(out),
        ])
        assert code == 0
        for name in ("adv_eps0.0155.png", "adv_eps0.031.png"):
            adv = ImageTensor.from_png_bytes((out / name).read_bytes())
            assert adv.data.shape == (16, 16, 3)
            assert not np.array_equal(adv.data, data)
            assert np.abs(adv.data.astype(int) - data.astype(int)).max() <= 7
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["outputs"] == ["field.png", "adv_eps0.0155.png", "adv_eps0.031.png"]

    def test_determinism_across_runs(self, tmp_path):
        args = [
            "generate", "--noise", "perlin", "--eps", "0.031",
            "--height", "32", "--width", "32", "--seed", "5",
        ]
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out_a)]) == 0
        assert main(args + ["--out", str(out_b)]) == 0
        assert (out_a / "field.png").read_bytes() == (out_b / "field.png").read_bytes()

    def test_no_temp_residue(self, tmp_path):
        out = tmp_path / "o"
        main([
            "generate", "--noise", "gaussian", "--eps", "0.031",
            "--height", "16", "--width", "16", "--out", str(out),
        ])
        assert not list(out.glob("*.tmp"))


class TestAttackEval:
    def test_perfect_classifier_csv_and_stdout(self, tmp_path, capsys):
        data = write_manifest_dataset(tmp_path / "data")
        out = tmp_path / "o"
        code = main(eval_args("attack-eval", data, out))
        assert code == 0
        rows = read_csv_rows(out)
        assert rows[0] == ["fingerprint", "epsilon", "evasion_rate", "robust_accuracy", "clean_accuracy", "n", "error"]
        assert len(rows) == 2
        cells = rows[1]
        assert float(cells[2]) == 0.0
        assert float(cells[3]) == 1.0
        assert cells[5] == "6"
        stdout = capsys.readouterr().out
        assert "evasion_rate=0.0000" in stdout
        assert "robust_accuracy=1.0000" in stdout
        report_files = sorted(out.glob("report_*.json"))
        assert len(report_files) == 1
        doc = json.loads(report_files[0].read_text())
        assert doc["counts"]["total"] == 6

    def test_rerun_is_byte_identical(self, tmp_path):
        data = write_manifest_dataset(tmp_path / "data")
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(eval_args("attack-eval", data, out_a)) == 0
        assert main(eval_args("attack-eval", data, out_b)) == 0
        assert (out_a / "reports.csv").read_bytes() == (out_b / "reports.csv").read_bytes()

    def test_cifar_batch_input(self, tmp_path, capsys):
        batch = write_cifar_batch(tmp_path / "batch.bin")
        out = tmp_path / "o"
        code = main([
            "attack-eval", "--noise", "gaussian", "--eps", "0.031",
            "--dataset", "cifar10", "--data", str(batch), "--limit", "3",
            "--classifier-cmd", ID_DIGIT_CMD, "--out", str(out),
        ])
        assert code == 0
        assert read_csv_rows(out)[1][5] == "3"

    def test_jobs_pool_matches_single(self, tmp_path):
        data = write_manifest_dataset(tmp_path / "data")
        out_one, out_two = tmp_path / "one", tmp_path / "two"
        assert main(eval_args("attack-eval", data, out_one)) == 0
        assert main(eval_args("attack-eval", data, out_two, "--jobs", "2")) == 0
        # config echo differs (jobs), but measured rates must not
        assert read_csv_rows(out_one)[1] == read_csv_rows(out_two)[1]

    def test_per_image_seed_flag(self, tmp_path):
        data = write_manifest_dataset(tmp_path / "data")
        out = tmp_path / "o"
        code = main(eval_args("attack-eval", data, out, "--per-image-seed"))
        assert code == 0
        assert json.loads((out / "config.json").read_text())["per_image_seed"] is True

    def test_no_temp_residue(self, tmp_path):
        data = write_manifest_dataset(tmp_path / "data")
        out = tmp_path / "o"
        main(eval_args("attack-eval", data, out))
        assert not list(out.glob("*.tmp"))


class TestDefenseEval:
    def test_filter_none_matches_attack_eval(self, tmp_path):
        data = write_manifest_dataset(tmp_path / "data")
        out_a, out_d = tmp_path / "a", tmp_path / "d"
        assert main(eval_args("attack-eval", data, out_a)) == 0
        assert main(eval_args("defense-eval", data, out_d, "--filter", "none")) == 0
        assert read_csv_rows(out_a)[1] == read_csv_rows(out_d)[1]

    def test_median_filter_runs(self, tmp_path, capsys):
        data = write_manifest_dataset(tmp_path / "data")
        out = tmp_path / "o"
        code = main(
            eval_args("defense-eval", data, out, "--filter", "median", "--window", "3")
        )
        assert code == 0
        assert "robust_accuracy=1.0000" in capsys.readouterr().out


class TestSweep:
    def test_worley_grid_rows_in_order(self, tmp_path):
        data = write_manifest_dataset(tmp_path / "data")
        out = tmp_path / "o"
        code = main([
            "sweep", "--noise", "worley",
            "--points", "50", "--points", "100",
            "--eps", "0.0155", "--eps", "0.031", "--eps", "0.0465",
            "--dataset", "dir", "--data", str(data), "--manifest", "labels.tsv",
            "--classifier-cmd", ID_DIGIT_CMD, "--out", str(out),
        ])
        assert code == 0
        rows = read_csv_rows(out)
        assert len(rows) == 7
        fingerprints = [r[0] for r in rows[1:]]
        eps_column = [r[1] for r in rows[1:]]
        assert all("points=50" in f for f in fingerprints[:3])
        assert all("points=100" in f for f in fingerprints[3:])
        assert eps_column == ["0.0155", "0.031", "0.0465"] * 2
        assert len(list(out.glob("report_*.json"))) == 6

    def test_simplex_dim_by_step_grid(self, tmp_path):
        data = write_manifest_dataset(tmp_path / "data", count=3)
        out = tmp_path / "o"
        code = main([
            "sweep", "--noise", "simplex",
            "--dim", "2", "--step", "4", "--step", "40",
            "--eps", "0.031",
            "--dataset", "dir", "--data", str(data), "--manifest", "labels.tsv",
            "--classifier-cmd", ID_DIGIT_CMD, "--out", str(out),
        ])
        assert code == 0
        fingerprints = [r[0] for r in read_csv_rows(out)[1:]]
        assert "step=4.0" in fingerprints[0]
        assert "step=40.0" in fingerprints[1]


class TestConfigPrecedence:
    def test_file_overrides_defaults_flags_override_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"noise": "gaussian", "eps": [0.0155], "seed": 7, "height": 16, "width": 16}))
        out = tmp_path / "o"
        code = main(["generate", "--config", str(cfg), "--seed", "9", "--out", str(out)])
        assert code == 0
        config = json.loads((out / "config.json").read_text())
        assert config["eps"] == [0.0155]  # from file
        assert config["seed"] == 9  # flag wins
        assert config["height"] == 16

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PROCNOISE_SEED", "42")
        out = tmp_path / "o"
        code = main([
            "generate", "--noise", "gaussian", "--eps", "0.031",
            "--height", "16", "--width", "16", "--out", str(out),
        ])
        assert code == 0
        assert json.loads((out / "config.json").read_text())["seed"] == 42

    def test_flag_beats_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PROCNOISE_SEED", "42")
        out = tmp_path / "o"
        main([
            "generate", "--noise", "gaussian", "--eps", "0.031", "--seed", "3",
            "--height", "16", "--width", "16", "--out", str(out),
        ])
        assert json.loads((out / "config.json").read_text())["seed"] == 3

    def test_bad_env_seed_is_usage_error(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PROCNOISE_SEED", "not-a-number")
        code = main([
            "generate", "--noise", "gaussian", "--eps", "0.031",
            "--out", str(tmp_path / "o"),
        ])
        assert code == 2


@pytest.fixture(scope="module")
def model_file(tmp_path_factory):
    torch = pytest.importorskip("torch")

    class TinyNet(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.fc = torch.nn.Linear(16 * 16 * 3, 4)
            with torch.no_grad():
                weight = torch.linspace(-1.0, 1.0, 4 * 16 * 16 * 3)
                self.fc.weight.copy_(weight.reshape(4, 16 * 16 * 3))
                self.fc.bias.zero_()

        def forward(self, x):
            return self.fc(x.flatten(1))

    traced = torch.jit.trace(TinyNet().eval(), torch.zeros(1, 3, 16, 16))
    path = tmp_path_factory.mktemp("cli-models") / "tiny.pt"
    torch.jit.save(traced, str(path))
    return str(path)


class TestEmbeddedBackend:
    def test_model_file_backend(self, tmp_path, model_file):
        data = write_manifest_dataset(tmp_path / "data", count=4)
        out = tmp_path / "o"
        code = main([
            "attack-eval", "--noise", "gaussian", "--eps", "0.031",
            "--dataset", "dir", "--data", str(data), "--manifest", "labels.tsv",
            "--model-file", model_file, "--model-class-count", "4",
            "--out", str(out),
        ])
        assert code == 0
        assert read_csv_rows(out)[1][5] == "4"

    def test_model_file_requires_class_count(self, tmp_path, model_file):
        data = write_manifest_dataset(tmp_path / "data", count=2)
        code = main([
            "attack-eval", "--noise", "gaussian", "--eps", "0.031",
            "--dataset", "dir", "--data", str(data), "--manifest", "labels.tsv",
            "--model-file", model_file,
            "--out", str(tmp_path / "o"),
        ])
        assert code == 2


class TestSubprocessEntry:
    def test_module_invocation(self, tmp_path):
        out = tmp_path / "o"
        proc = subprocess.run(
            [
                sys.executable, "-m", "procnoise.cli",
                "generate", "--noise", "gaussian", "--eps", "0.031",
                "--height", "16", "--width", "16", "--out", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert (out / "field.png").exists()

    def test_help_lists_subcommands(self):
        proc = subprocess.run(
            [sys.executable, "-m", "procnoise.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        for name in ("generate", "attack-eval", "defense-eval", "sweep"):
            assert name in proc.stdout
