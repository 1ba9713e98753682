import json

import numpy as np
import pytest

from app import cli
from app.cli import main
from app.core.actions import CLICK, SCROLL
from app.core.imaging import Screenshot, read_image, write_image
from app.core.policy import PolicyParams
from app.utils.checkpoint import Checkpoint, load_checkpoint, save_checkpoint

GRID_2PX = ["--cell-height", "2", "--cell-width", "2"]
# small enough to train in well under a second
FAST = ["--suite_size=4", "--train.group_size=4", "--train.states_per_iter=2"]


def _lines(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


class TestEntropyMap:
    def test_matches_golden(self, screen_copy, fixtures_dir, tmp_path):
        out = tmp_path / "out"
        assert main(["entropy-map", str(screen_copy / "screen_4x4.pgm"), *GRID_2PX, "--out-dir", str(out)]) == 0
        golden = (fixtures_dir / "screen_4x4.entropy.json").read_bytes()
        assert (out / "screen_4x4.entropy.json").read_bytes() == golden

        heat = read_image(out / "screen_4x4.heatmap.pgm")
        assert (heat.width, heat.height) == (2, 2)
        assert heat.pixels[:, :, 0].ravel().tolist() == [0, 128, 255, 128]

    def test_constant_image(self, tmp_path):
        write_image(tmp_path / "flat.pgm", Screenshot(6, 6, 1, np.full((6, 6, 1), 90, dtype=np.uint8)))
        assert main(["entropy-map", str(tmp_path / "flat.pgm"), *GRID_2PX, "--out-dir", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "flat.entropy.json").read_text())
        assert data["max_entropy"] == 0.0
        assert data["entropies"] == [0.0] * 9

    def test_missing_file(self, tmp_path):
        assert main(["entropy-map", str(tmp_path / "nope.pgm"), "--out-dir", str(tmp_path)]) == 2

    def test_not_an_image(self, tmp_path):
        (tmp_path / "junk.pgm").write_bytes(b"hello")
        assert main(["entropy-map", str(tmp_path / "junk.pgm"), "--out-dir", str(tmp_path)]) == 2

    def test_bad_bins(self, screen_copy):
        assert main(["entropy-map", str(screen_copy / "screen_4x4.pgm"), "--bins", "3"]) == 2


class TestScore:
    def _run(self, screen_copy, *extra):
        out = screen_copy / "out"
        code = main(["score", str(screen_copy / "score_4x4.jsonl"), *GRID_2PX, "--out-dir", str(out), *extra])
        return code, out

    def test_dataset(self, screen_copy, capsys):
        code, out = self._run(screen_copy)
        assert code == 0
        rows = _lines(out / "scores.jsonl")
        assert [r["line"] for r in rows] == [1, 2, 3, 4, 5]

        exact, mismatch, flat, missing, no_target = rows
        assert exact["r"] >= 0.99
        assert exact["task_id"] == "exact"
        assert mismatch["r"] == 0.0 and mismatch["type_matched"] is False
        assert flat["r_w"] == 0.0 and flat["r"] == 0.0
        assert "error" in missing and "r" not in missing
        assert "error" in no_target and "r" not in no_target

        summary = json.loads((out / "aggregate.json").read_text())
        assert summary["count"] == 3
        assert summary["errors"] == 2
        assert json.loads(capsys.readouterr().out) == summary

    def test_without_window_factor(self, screen_copy):
        code, out = self._run(screen_copy, "--no-rw")
        assert code == 0
        for row in _lines(out / "scores.jsonl"):
            if "error" not in row:
                assert row["r"] == row["r_d"]

    def test_both_factors_off(self, screen_copy):
        code, _ = self._run(screen_copy, "--no-rw", "--no-rd")
        assert code == 2

    def test_workers_preserve_order(self, screen_copy, tmp_path):
        _, out = self._run(screen_copy)
        serial = (out / "scores.jsonl").read_bytes()
        _, out = self._run(screen_copy, "--workers", "3")
        assert (out / "scores.jsonl").read_bytes() == serial

    def test_missing_dataset(self, tmp_path):
        assert main(["score", str(tmp_path / "none.jsonl"), "--out-dir", str(tmp_path)]) == 2

    def test_coords_frame(self, tmp_path):
        # 2000x1000 is halved to 1000x500 before scoring
        pixels = np.random.default_rng(0).integers(0, 256, size=(1000, 2000, 1), dtype=np.uint8)
        write_image(tmp_path / "big.pgm", Screenshot(2000, 1000, 1, pixels))
        record = {
            "image": "big.pgm",
            "predicted": {"type": "click", "points": [[1500, 900]]},
            "target": {"type": "click", "points": [[1500, 900]]},
        }
        (tmp_path / "big.jsonl").write_text(json.dumps(record) + "\n")

        assert main(["score", str(tmp_path / "big.jsonl"), "--out-dir", str(tmp_path / "o")]) == 0
        (row,) = _lines(tmp_path / "o" / "scores.jsonl")
        assert row["r_d"] == 1.0
        assert row["r"] > 0.0

        assert main(["score", str(tmp_path / "big.jsonl"), "--coords-frame", "resized",
                     "--out-dir", str(tmp_path / "r")]) == 0
        (row,) = _lines(tmp_path / "r" / "scores.jsonl")
        assert "error" in row

    def test_point_on_bottom_edge_after_rounded_resize(self, tmp_path):
        # 1500x1001 becomes 1000x667, so y = 1001 scales to 667.33
        pixels = np.random.default_rng(1).integers(0, 256, size=(1001, 1500, 1), dtype=np.uint8)
        write_image(tmp_path / "tall.pgm", Screenshot(1500, 1001, 1, pixels))
        record = {
            "image": "tall.pgm",
            "predicted": {"type": "click", "points": [[700, 1000.9]]},
            "target": {"type": "click", "points": [[700, 1001]]},
        }
        (tmp_path / "tall.jsonl").write_text(json.dumps(record) + "\n")

        assert main(["score", str(tmp_path / "tall.jsonl"), "--out-dir", str(tmp_path / "o")]) == 0
        (row,) = _lines(tmp_path / "o" / "scores.jsonl")
        assert "error" not in row
        assert row["r_d"] == 1.0


class TestGenData:
    def test_empty_suite(self, tmp_path, capsys):
        assert main(["gen-data", "--count", "0", "--out-dir", str(tmp_path)]) == 0
        index = tmp_path / "suite.jsonl"
        assert index.exists()
        assert index.read_text() == ""
        assert capsys.readouterr().out.strip() == str(index)

    def test_rerun_is_identical(self, tmp_path):
        args = ["gen-data", "--count", "2", "--seed", "9", "--width", "200", "--height", "200",
                "--max-size", "60", "--out-dir"]
        assert main([*args, str(tmp_path / "a")]) == 0
        assert main([*args, str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "suite.jsonl").read_bytes() == (tmp_path / "b" / "suite.jsonl").read_bytes()
        for img in (tmp_path / "a" / "suite").iterdir():
            assert img.read_bytes() == (tmp_path / "b" / "suite" / img.name).read_bytes()

    def test_invalid_generator_settings(self, tmp_path):
        assert main(["gen-data", "--min-widgets", "5", "--max-widgets", "2", "--out-dir", str(tmp_path)]) == 2
        assert main(["gen-data", "--count", "-1", "--out-dir", str(tmp_path)]) == 2


class TestTrain:
    def _train(self, out, iterations, *extra):
        return main(["train", *FAST, f"--train.iterations={iterations}", f"--paths.output_dir={out}", *extra])

    def test_zero_iterations_writes_uniform_policy(self, tmp_path):
        assert self._train(tmp_path, 0) == 0
        ckpt = load_checkpoint(tmp_path / "checkpoint.json")
        assert ckpt.step == 0
        assert ckpt.to_params().digest() == PolicyParams.zeros((CLICK, SCROLL), 10, 10).digest()
        assert ckpt.grid == {"cell_height": 50, "cell_width": 50, "bins": 256}
        assert not (tmp_path / "metrics.jsonl").exists()

    def test_metrics_and_checkpoint(self, tmp_path):
        assert self._train(tmp_path, 3) == 0
        metrics = _lines(tmp_path / "metrics.jsonl")
        assert [m["iter"] for m in metrics] == [0, 1, 2]
        assert load_checkpoint(tmp_path / "checkpoint.json").step == 3

    def test_deterministic(self, tmp_path):
        assert self._train(tmp_path / "a", 3) == 0
        assert self._train(tmp_path / "b", 3) == 0
        assert (tmp_path / "a" / "metrics.jsonl").read_bytes() == (tmp_path / "b" / "metrics.jsonl").read_bytes()
        a = load_checkpoint(tmp_path / "a" / "checkpoint.json").to_params()
        b = load_checkpoint(tmp_path / "b" / "checkpoint.json").to_params()
        assert a.digest() == b.digest()

    def test_resume_matches_uninterrupted(self, tmp_path):
        assert self._train(tmp_path / "full", 5) == 0
        assert self._train(tmp_path / "split", 3) == 0
        assert self._train(tmp_path / "split", 5, "--resume", str(tmp_path / "split" / "checkpoint.json")) == 0

        full = tmp_path / "full"
        split = tmp_path / "split"
        assert (split / "metrics.jsonl").read_bytes() == (full / "metrics.jsonl").read_bytes()
        assert (
            load_checkpoint(split / "checkpoint.json").to_params().digest()
            == load_checkpoint(full / "checkpoint.json").to_params().digest()
        )

    def test_periodic_checkpoint(self, tmp_path, monkeypatch):
        steps = []
        real = cli.save_checkpoint
        monkeypatch.setattr(cli, "save_checkpoint", lambda path, ckpt: steps.append(ckpt.step) or real(path, ckpt))
        assert self._train(tmp_path, 5, "--train.checkpoint_every=2") == 0
        assert steps == [2, 4, 5]

    def test_non_finite_resume_records_failure(self, tmp_path):
        assert self._train(tmp_path, 2) == 0
        bad = PolicyParams((CLICK, SCROLL), np.array([np.inf, 0.0]), 0.0, np.zeros((10, 10)))
        poisoned = tmp_path / "poisoned.json"
        save_checkpoint(poisoned, Checkpoint.from_params(bad, 2, 0))

        assert self._train(tmp_path, 4, "--resume", str(poisoned)) == 1
        (failure,) = _lines(tmp_path / "failure.jsonl")
        assert failure["iter"] == 2
        assert "non-finite" in failure["error"]
        assert [m["iter"] for m in _lines(tmp_path / "metrics.jsonl")] == [0, 1]
        assert load_checkpoint(tmp_path / "checkpoint.json").step == 2

    def test_invalid_override(self, tmp_path):
        assert self._train(tmp_path, 1, "--train.group_size=1") == 2
        assert self._train(tmp_path, 1, "--bogus.key=1") == 2

    def test_unknown_flag(self, tmp_path):
        assert main(["train", "--frobnicate"]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "none.json")]) == 2


class TestEval:
    @pytest.fixture
    def uniform_ckpt(self, tmp_path):
        params = PolicyParams.zeros((CLICK, SCROLL), 10, 10)
        path = tmp_path / "uniform.json"
        save_checkpoint(path, Checkpoint.from_params(params, 0, 0, grid={"cell_height": 50, "cell_width": 50, "bins": 256}))
        return path

    def test_report(self, uniform_ckpt, capsys):
        assert main(["eval", "--checkpoint", str(uniform_ckpt), "--suite_size=2", "--draws", "8"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report) == {"mean_distance_px", "mean_reward", "hit_rate", "draws"}
        assert report["draws"] == 16
        assert 0.0 <= report["hit_rate"] <= 1.0

    def test_repeatable(self, uniform_ckpt, capsys):
        args = ["eval", "--checkpoint", str(uniform_ckpt), "--suite_size=2", "--draws", "8", "--seed", "3"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first

    def test_saved_suite(self, uniform_ckpt, tmp_path, capsys):
        assert main(["gen-data", "--count", "2", "--out-dir", str(tmp_path / "data")]) == 0
        capsys.readouterr()
        assert main(["eval", "--checkpoint", str(uniform_ckpt), "--suite", str(tmp_path / "data" / "suite.jsonl"),
                     "--draws", "4"]) == 0
        assert json.loads(capsys.readouterr().out)["draws"] == 8

    def test_zero_draws(self, uniform_ckpt):
        assert main(["eval", "--checkpoint", str(uniform_ckpt), "--suite_size=1", "--draws", "0"]) == 2

    def test_grid_mismatch(self, tmp_path):
        path = tmp_path / "small.json"
        save_checkpoint(path, Checkpoint.from_params(PolicyParams.zeros((CLICK,), 4, 4), 0, 0))
        assert main(["eval", "--checkpoint", str(path), "--suite_size=1", "--draws", "2"]) == 2

    def test_missing_checkpoint(self, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "none.json")]) == 2


class TestExperiments:
    def test_ablate(self, tmp_path, capsys):
        args = ["ablate", "--suite_size=2", "--train.iterations=1", "--train.group_size=4",
                "--train.states_per_iter=1", "--draws", "4", f"--paths.output_dir={tmp_path}"]
        assert main(args) == 0
        results = json.loads((tmp_path / "ablation.json").read_text())
        assert set(results) == {"full", "no_rw", "no_rd"}
        assert json.loads(capsys.readouterr().out) == results

    def test_sweep(self, tmp_path):
        args = ["sweep", "--group-sizes", "4,6", "--clips", "0.2:0.28", "--kl-betas", "0,0.001",
                "--suite_size=2", "--train.iterations=1", "--train.states_per_iter=1", "--draws", "4",
                f"--paths.output_dir={tmp_path}"]
        assert main(args) == 0
        rows = _lines(tmp_path / "sweep.jsonl")
        assert [(r["group_size"], r["kl_beta"]) for r in rows] == [(4, 0.0), (4, 0.001), (6, 0.0), (6, 0.001)]

    def test_bad_clip_pair(self, tmp_path):
        assert main(["sweep", "--clips", "0.2", f"--paths.output_dir={tmp_path}"]) == 2
