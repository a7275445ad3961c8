import json
from pathlib import Path

import numpy as np
import pytest

from radioplan import io
from radioplan.cli import main
from radioplan.scene import sample_devices, scenario_1

DATASET_TOML = """
[dataset]
scenarios = ["scenario1", "scenario2"]
s_values = [1, 100]
k_a_values = [5]
gamma_db = -10.0
total_samples = 12
split_ratios = [0.5, 0.0, 0.5]
export_resolution = 16
master_seed = 11
lis_side = 12
kernel_side = 7
"""


@pytest.fixture()
def scene_file(tmp_path):
    scene = sample_devices(scenario_1(), 5, seed=3)
    path = tmp_path / "s1.toml"
    io.save_scene(path, scene)
    return path


@pytest.fixture()
def small_dataset(tmp_path):
    config = tmp_path / "ds.toml"
    config.write_text(DATASET_TOML)
    out = tmp_path / "ds"
    assert main(["dataset", "build", "--config", str(config), "--out", str(out)]) == 0
    return out


class TestSceneCommands:
    def test_validate_ok(self, scene_file, capsys):
        assert main(["scene", "validate", "--scene", str(scene_file)]) == 0
        assert "ok" in capsys.readouterr().out

    def test_render(self, scene_file, tmp_path):
        out = tmp_path / "plan.png"
        assert main(["scene", "render", "--scene", str(scene_file),
                     "--resolution", "64", "--out", str(out)]) == 0
        img = io.load_image(out)
        assert img.shape == (64, 64, 3)
        assert (img == 0).any() and (img == 255).any()


class TestSimulateAndRadiomap:
    def test_pipeline_files(self, scene_file, tmp_path):
        sig = tmp_path / "sig.bin"
        assert main(["simulate", "--scene", str(scene_file), "--snr-db", "-10",
                     "--s", "100", "--seed", "1", "--out", str(sig),
                     "--lis-side", "24"]) == 0
        assert sig.exists()
        png = tmp_path / "map.png"
        mag = tmp_path / "map.bin"
        assert main(["radiomap", "--in", str(sig), "--kernel-size", "15",
                     "--depth", "8", "--out", str(png),
                     "--magnitude-out", str(mag)]) == 0
        assert io.load_image(png).shape == (24, 24, 3)
        grid, meta = io.load_magnitude(mag)
        assert grid.shape == (24, 24)
        assert meta["s_count"] == 100

    def test_simulate_is_deterministic(self, scene_file, tmp_path):
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        for out in (a, b):
            assert main(["simulate", "--scene", str(scene_file), "--s", "10",
                         "--seed", "9", "--out", str(out), "--lis-side", "16"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_dump_paths(self, scene_file, tmp_path):
        sig = tmp_path / "sig.bin"
        dump = tmp_path / "paths.txt"
        assert main(["simulate", "--scene", str(scene_file), "--out", str(sig),
                     "--lis-side", "12", "--dump-paths", str(dump)]) == 0
        lines = dump.read_text().strip().splitlines()
        assert lines[0].startswith("device\torder")
        assert len(lines) > 1

    def test_unknown_flag_exits_two(self, scene_file, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--scene", str(scene_file), "--out",
                  str(tmp_path / "x.bin"), "--frobnicate"])
        assert exc.value.code == 2

    def test_missing_scene_is_pipeline_error(self, tmp_path, capsys):
        code = main(["scene", "validate", "--scene", str(tmp_path / "nope.toml")])
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestDatasetCommands:
    def test_build_layout(self, small_dataset):
        manifest = io.load_manifest(small_dataset / "manifest.json")
        assert len(manifest["records"]) == 12
        for record in manifest["records"]:
            assert (small_dataset / record["radio_map_path"]).exists()

    def test_resplit(self, small_dataset):
        assert main(["dataset", "split", "--manifest",
                     str(small_dataset / "manifest.json"),
                     "--ratios", "1.0,0.0,0.0", "--seed", "4"]) == 0
        manifest = io.load_manifest(small_dataset / "manifest.json")
        assert all(r["split"] == "train" for r in manifest["records"])
        for record in manifest["records"]:
            assert (small_dataset / record["radio_map_path"]).exists()


class TestLsAndEvaluate:
    def test_fit_predict_evaluate_report_plot(self, small_dataset, tmp_path, capsys):
        model = tmp_path / "ls.bin"
        assert main(["ls", "fit", "--manifest", str(small_dataset / "manifest.json"),
                     "--split", "train", "--resolution", "16",
                     "--out", str(model)]) == 0
        preds = tmp_path / "preds"
        assert main(["ls", "predict", "--model", str(model),
                     "--manifest", str(small_dataset / "manifest.json"),
                     "--split", "test", "--out", str(preds)]) == 0
        n_test = sum(1 for r in io.load_manifest(small_dataset / "manifest.json")["records"]
                     if r["split"] == "test")
        assert len(list(preds.glob("*_pred.png"))) == n_test

        report = tmp_path / "eval.jsonl"
        assert main(["evaluate", "--pred", str(preds),
                     "--manifest", str(small_dataset / "manifest.json"),
                     "--split", "test", "--method", "ls",
                     "--out", str(report)]) == 0
        rows = [json.loads(line) for line in report.read_text().splitlines()]
        assert len(rows) == n_test
        assert all(0.0 <= r["psnr"] <= 48.14 for r in rows)
        assert all(r["method"] == "ls" for r in rows)

        summary = tmp_path / "table.txt"
        assert main(["report", "--eval", str(report), "--out", str(summary)]) == 0
        assert "PSNR" in summary.read_text()

        csv_path = tmp_path / "bars.csv"
        png_path = tmp_path / "bars.png"
        assert main(["plot", "--eval", str(report), "--out-csv", str(csv_path),
                     "--out-image", str(png_path)]) == 0
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "method,scenario_id,s,psnr_mean,psnr_std,n"
        assert len(lines) > 1
        assert png_path.exists()

    def test_oracle_clamped_predictions(self, small_dataset, tmp_path):
        model = tmp_path / "ls.bin"
        main(["ls", "fit", "--manifest", str(small_dataset / "manifest.json"),
              "--split", "train", "--resolution", "16", "--out", str(model)])
        preds = tmp_path / "preds_clamped"
        assert main(["ls", "predict", "--model", str(model),
                     "--manifest", str(small_dataset / "manifest.json"),
                     "--split", "test", "--out", str(preds),
                     "--oracle-clamp"]) == 0
        manifest = io.load_manifest(small_dataset / "manifest.json")
        for record in manifest["records"]:
            if record["split"] != "test":
                continue
            pred = io.load_image(Path(preds) / f"{record['sample_id']}_pred.png")
            truth = io.load_image(small_dataset / record["floor_plan_path"])
            assert np.all(pred <= truth)


class TestHelp:
    def test_every_subcommand_has_help(self, capsys):
        for argv in (["--help"], ["scene", "--help"], ["simulate", "--help"],
                     ["radiomap", "--help"], ["dataset", "--help"],
                     ["ls", "--help"], ["evaluate", "--help"],
                     ["report", "--help"], ["plot", "--help"]):
            with pytest.raises(SystemExit) as exc:
                main(argv)
            assert exc.value.code == 0
            assert capsys.readouterr().out
