import json

import numpy as np
import pytest

from gestrec.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from gestrec.data import load_dataset, save_dataset
from gestrec.synth import make_gesture_dataset


def write_msr_file(path, n_joints=20, frames=2, offset=0.0):
    rng = np.random.default_rng(abs(hash(path.name)) % (2**32))
    values = rng.normal(size=frames * n_joints * 4) + offset
    path.write_text(" ".join(f"{v:.6f}" for v in values))


@pytest.fixture
def msr_dir(tmp_path):
    d = tmp_path / "msr"
    d.mkdir()
    for a in range(2):
        for s in range(2):
            for e in range(2):
                write_msr_file(d / f"a{a + 1:02d}_s{s + 1:02d}_e{e + 1:02d}_skeleton.txt")
    return d


@pytest.fixture
def synth_file(tmp_path):
    ds = make_gesture_dataset(3, 4, reps=2, noise="easy", seed=21)
    path = tmp_path / "synth.jsonl"
    save_dataset(path, ds)
    return path


class TestConvert:
    def test_msr_directory(self, msr_dir, tmp_path, capsys):
        out = tmp_path / "converted.jsonl"
        code = main(
            ["convert", "--format", "msr", "--input", str(msr_dir), "--out", str(out)]
        )
        assert code == EXIT_OK
        assert "8 sequences, 2 classes, 2 subjects" in capsys.readouterr().out
        ds = load_dataset(out)
        assert ds.n == 8
        assert ds.k == 57  # 20 joints root-relativized
        assert all(s.relativized for s in ds.sequences)

    def test_keep_root_skips_relativization(self, msr_dir, tmp_path):
        out = tmp_path / "raw.jsonl"
        code = main(
            ["convert", "--format", "msr", "--input", str(msr_dir), "--out", str(out),
             "--keep-root"]
        )
        assert code == EXIT_OK
        assert load_dataset(out).k == 60

    def test_empty_directory_errors(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        out = tmp_path / "x.jsonl"
        code = main(["convert", "--format", "msr", "--input", str(empty), "--out", str(out)])
        assert code == EXIT_DATA
        assert "no sequences found" in capsys.readouterr().err

    def test_mixed_joint_counts_name_offender(self, msr_dir, tmp_path, capsys):
        write_msr_file(msr_dir / "a03_s01_e01_skeleton.txt", n_joints=15)
        out = tmp_path / "x.jsonl"
        code = main(["convert", "--format", "msr", "--input", str(msr_dir), "--out", str(out)])
        assert code == EXIT_DATA
        assert "a03_s01_e01" in capsys.readouterr().err


class TestTrainPredict:
    def test_train_writes_model_with_fitted_constants(self, synth_file, tmp_path, capsys):
        model_path = tmp_path / "model.json"
        code = main(
            ["train", "--data", str(synth_file), "--poses", "8", "--kernel", "rdtw",
             "--nu", "1.0", "--sigma", "1.0", "--out", str(model_path)]
        )
        assert code == EXIT_OK
        assert "training accuracy" in capsys.readouterr().out
        payload = json.loads(model_path.read_text())
        assert payload["spec"]["alpha"] is not None
        assert payload["spec"]["beta"] is not None
        assert payload["poses"] == 8

    def test_missing_sigma_is_usage_error(self, synth_file, tmp_path, capsys):
        code = main(
            ["train", "--data", str(synth_file), "--poses", "8", "--kernel", "euclid",
             "--out", str(tmp_path / "m.json")]
        )
        assert code == EXIT_USAGE
        assert not (tmp_path / "m.json").exists()

    def test_missing_nu_for_rdtw_is_usage_error(self, synth_file, tmp_path):
        code = main(
            ["train", "--data", str(synth_file), "--poses", "8", "--kernel", "rdtw",
             "--sigma", "1.0", "--out", str(tmp_path / "m.json")]
        )
        assert code == EXIT_USAGE

    def test_predict_is_order_preserving(self, synth_file, tmp_path, capsys):
        model_path = tmp_path / "model.json"
        main(
            ["train", "--data", str(synth_file), "--poses", "8", "--kernel", "rdtw",
             "--nu", "1.0", "--sigma", "1.0", "--out", str(model_path)]
        )
        # unlabeled copy, reversed order
        ds = load_dataset(synth_file)
        records = []
        for s in reversed(ds.sequences):
            records.append(
                json.dumps(
                    {
                        "id": "probe-" + s.seq_id,
                        "label": None,
                        "subject": "probe",
                        "rate_hz": None,
                        "n_joints": s.n_joints,
                        "frames": s.frames.tolist(),
                    }
                )
            )
        probe_path = tmp_path / "probe.jsonl"
        probe_path.write_text("\n".join(records) + "\n")
        out_path = tmp_path / "labels.txt"
        code = main(
            ["predict", "--model", str(model_path), "--data", str(probe_path),
             "--train-data", str(synth_file), "--out", str(out_path)]
        )
        assert code == EXIT_OK
        got = out_path.read_text().splitlines()
        want = [s.label for s in reversed(ds.sequences)]
        assert got == want


class TestEvaluate:
    def test_subject_protocol_row_count(self, synth_file, tmp_path):
        out_csv = tmp_path / "eval.csv"
        code = main(
            ["evaluate", "--data", str(synth_file), "--poses", "8", "--kernel", "rdtw",
             "--nu", "1.0", "--sigma", "1.0", "--protocol", "subjects",
             "--n-train", "2", "--out-csv", str(out_csv)]
        )
        assert code == EXIT_OK
        lines = out_csv.read_text().splitlines()
        assert len(lines) == 1 + 6  # header + C(4,2) splits

    def test_seeded_rerun_and_workers_byte_identical(self, synth_file, tmp_path):
        args = [
            "evaluate", "--data", str(synth_file), "--poses", "6,8", "--kernel", "rdtw",
            "--nu", "1.0", "--sigma", "1.0", "--protocol", "kfold", "--folds", "3",
            "--seed", "11",
        ]
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        assert main(args + ["--out-csv", str(a), "--workers", "1"]) == EXIT_OK
        assert main(args + ["--out-csv", str(b), "--workers", "2"]) == EXIT_OK
        assert main(args + ["--out-csv", str(c), "--workers", "2"]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes() == c.read_bytes()

    def test_fixed_protocol(self, synth_file, tmp_path):
        out_csv = tmp_path / "fixed.csv"
        code = main(
            ["evaluate", "--data", str(synth_file), "--poses", "8", "--kernel", "euclid",
             "--sigma", "10.0", "--protocol", "fixed",
             "--train-subjects", "s00,s01,s02", "--test-subjects", "s03",
             "--out-csv", str(out_csv), "--out-json", str(tmp_path / "fixed.json")]
        )
        assert code == EXIT_OK
        assert len(out_csv.read_text().splitlines()) == 2
        payload = json.loads((tmp_path / "fixed.json").read_text())
        assert payload["reports"][0]["config"]["family"] == "euclid"

    def test_curve_csv_written_for_pose_sweep(self, synth_file, tmp_path):
        curve = tmp_path / "curve.csv"
        code = main(
            ["evaluate", "--data", str(synth_file), "--poses", "5,10", "--kernel",
             "euclid", "--sigma", "10.0", "--protocol", "kfold", "--folds", "3",
             "--out-csv", str(tmp_path / "e.csv"), "--curve-csv", str(curve)]
        )
        assert code == EXIT_OK
        lines = curve.read_text().splitlines()
        assert len(lines) == 3
        assert lines[0].startswith("poses,family,")


class TestGridAndBenchmark:
    def test_grid_reports_best_and_rows(self, synth_file, tmp_path, capsys):
        grid_file = tmp_path / "grid.json"
        grid_file.write_text(
            json.dumps({"nu": [1.0], "sigma": [0.5, 1.0], "C": [10.0], "poses": [6]})
        )
        out_csv = tmp_path / "grid.csv"
        best_json = tmp_path / "best.json"
        code = main(
            ["grid", "--data", str(synth_file), "--poses", "6", "--kernel", "rdtw",
             "--protocol", "kfold", "--folds", "3", "--grid-file", str(grid_file),
             "--out-csv", str(out_csv), "--out-json", str(best_json)]
        )
        assert code == EXIT_OK
        assert len(out_csv.read_text().splitlines()) == 3
        best = json.loads(best_json.read_text())
        assert best["sigma"] in (0.5, 1.0)
        assert "best:" in capsys.readouterr().out

    def test_benchmark_csv(self, synth_file, tmp_path):
        out = tmp_path / "bench.csv"
        code = main(
            ["benchmark", "--data", str(synth_file), "--poses", "5,10",
             "--kernel", "euclid,rdtw", "--repeats", "5", "--out", str(out)]
        )
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 5  # header + 2 families x 2 pose counts
        assert lines[0] == "family,poses,n_train,median_ms,p95_ms"


class TestCliPlumbing:
    def test_unknown_flag_fails_fast(self, synth_file):
        code = main(["train", "--data", str(synth_file), "--nonsense"])
        assert code == EXIT_USAGE

    def test_help_available_for_each_subcommand(self, capsys):
        for sub in ("convert", "train", "predict", "evaluate", "grid", "benchmark"):
            with pytest.raises(SystemExit) as exc:
                main([sub, "--help"])
            assert exc.value.code == 0
            assert "--" in capsys.readouterr().out

    def test_config_file_supplies_defaults_flags_win(self, synth_file, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "data": str(synth_file),
                    "poses": 8,
                    "kernel": "rdtw",
                    "nu": 1.0,
                    "sigma": 99.0,
                    "out": str(tmp_path / "from_config.json"),
                }
            )
        )
        code = main(["--config", str(config), "train", "--sigma", "1.0"])
        assert code == EXIT_OK
        payload = json.loads((tmp_path / "from_config.json").read_text())
        assert payload["spec"]["sigma"] == 1.0  # explicit flag beat the config

    def test_missing_dataset_is_data_error(self, tmp_path, capsys):
        code = main(
            ["train", "--data", str(tmp_path / "nope.jsonl"), "--poses", "8",
             "--kernel", "euclid", "--sigma", "1.0", "--out", str(tmp_path / "m.json")]
        )
        assert code == EXIT_DATA

    def test_empty_dataset_is_data_error(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        code = main(
            ["train", "--data", str(empty), "--poses", "8", "--kernel", "euclid",
             "--sigma", "1.0", "--out", str(tmp_path / "m.json")]
        )
        assert code == EXIT_DATA
        assert "no sequences" in capsys.readouterr().err

    def test_out_of_range_sigma_is_usage_error(self, synth_file, tmp_path, capsys):
        code = main(
            ["evaluate", "--data", str(synth_file), "--poses", "4", "--kernel", "euclid",
             "--sigma", "0.0", "--protocol", "kfold", "--folds", "2",
             "--out-csv", str(tmp_path / "x.csv")]
        )
        assert code == EXIT_USAGE
        assert "sigma" in capsys.readouterr().err

    def test_exit_code_mapping_for_numeric_failures(self, monkeypatch, capsys):
        from gestrec import cli
        from gestrec.errors import DomainError, NumericError

        for exc, want in ((NumericError("bad"), EXIT_NUMERIC), (DomainError("bad"), EXIT_NUMERIC)):
            monkeypatch.setitem(cli._COMMANDS, "train", lambda args, exc=exc: (_ for _ in ()).throw(exc))
            code = main(["train", "--data", "x", "--poses", "4", "--kernel", "euclid",
                         "--sigma", "1.0", "--out", "y"])
            assert code == want
            assert "numeric error" in capsys.readouterr().err
