"""Tests for the hpfold command line."""

import json

from hpfold.cli import EXIT_CONFIG, EXIT_OK, main
from hpfold.utils.io import read_csv, read_json, read_jsonl


def test_bad_sequence_is_a_config_error(tmp_path):
    """Test that a non-H/P character exits with the config code."""
    assert main(["train", "--seq", "HPXH", "-o", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_benchmark_id(tmp_path):
    """Test that an unknown entry id exits with the config code."""
    assert main(["train", "--benchmark-id", "19mer", "-o", str(tmp_path)]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    """Test that a missing --config file exits with the config code."""
    assert main(["-c", str(tmp_path / "nope.json"), "train", "--seq", "HPPH"]) == EXIT_CONFIG


def test_enumerate_prints_report(capsys):
    """Test the JSON enumeration report for HPPH."""
    assert main(["enumerate", "--seq", "HPPH", "--collect-optimal"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["complete_count"] == 5
    assert report["min_energy"] == -1
    assert report["degeneracy"] == 1
    assert report["optimal_actions"] == ["LL"]


def test_enumerate_refuses_long_chains():
    """Test the feasibility bound without --allow-large."""
    assert main(["enumerate", "--n", "30"]) == EXIT_CONFIG


def test_verify_small_counts(capsys):
    """Test the count check for a single small N."""
    assert main(["enumerate", "--verify-counts", "--n", "4"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["4"]["match"]


def test_baseline_trial_and_plot_data(tmp_path):
    """Test a short random-search trial and its plot data."""
    assert main(["baseline", "--seq", "HPPHPH", "--episodes", "30", "--seed", "2", "-o", str(tmp_path)]) == EXIT_OK
    trial = tmp_path / "HPPHPH" / "rand" / "seed-2"
    manifest = read_json(trial / "manifest.json")
    assert manifest["config"]["mode"] == "rand"
    assert manifest["config"]["episodes"] == 30
    rows = read_csv(trial / "curve.csv")
    assert len(rows) == 30
    assert {int(r["energy"]) for r in rows} <= {-2, -1, 0}
    assert not (trial / "checkpoints").exists()

    assert main(["plotdata", "--curves", str(trial / "curve.csv"), "--window", "5"]) == EXIT_OK
    minima = read_csv(trial / "min_curve.csv")
    assert len(minima) == 30
    assert all(int(m["moving_min"]) <= int(m["energy"]) for m in minima)


def test_train_writes_checkpoints(tmp_path):
    """Test a short DQN trial with periodic checkpoints."""
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"trainer": {"arch": "lstm1x8", "batch_size": 4, "log_every": 0}}))
    argv = ["-c", str(config), "train", "--seq", "HPPHPH", "--episodes", "20"]
    argv += ["--checkpoint-every", "10", "-o", str(tmp_path)]
    assert main(argv) == EXIT_OK
    ckpts = tmp_path / "HPPHPH" / "drl" / "seed-0" / "checkpoints"
    assert sorted(p.name for p in ckpts.glob("*.npz")) == ["ckpt-0000010.npz", "ckpt-0000020.npz", "final.npz"]


def test_confdb_from_trial_logs(tmp_path, capsys):
    """Test importing best.jsonl logs and exporting the database."""
    log = tmp_path / "best.jsonl"
    row = {"episode": 1, "energy": -1, "actions": "LL", "sequence": "HPPH", "sequence_id": "hpph", "trial": "a"}
    log.write_text(json.dumps(row) + "\n")
    out = tmp_path / "db"
    assert main(["confdb", "--import", str(log), "--export", str(out), "--stats", "--best-known", "-1"]) == EXIT_OK
    stats = json.loads(capsys.readouterr().out)
    assert stats["hpph"]["best_known"] == -1
    assert len(list(read_jsonl(out / "records.jsonl"))) == 1


def test_confdb_on_empty_log(tmp_path):
    """Test that an empty log exports an empty database."""
    log = tmp_path / "best.jsonl"
    log.write_text("")
    assert main(["confdb", "--import", str(log), "--export", str(tmp_path / "db")]) == EXIT_OK
    assert (tmp_path / "db" / "records.jsonl").read_text() == ""


def test_bench_single_entry(tmp_path):
    """Test a one-entry, one-seed random-search suite."""
    argv = ["bench", "--entries", "20mer-A", "--modes", "rand", "--seeds", "0"]
    argv += ["--episodes-override", "5", "-o", str(tmp_path)]
    assert main(argv) == EXIT_OK
    rows = read_csv(tmp_path / "summary.csv")
    assert [(r["entry_id"], r["mode"], r["episodes"]) for r in rows] == [("20mer-A", "rand", "5")]
    assert (tmp_path / "20mer-A" / "rand" / "band.csv").exists()
    assert (tmp_path / "table.csv").exists()


def test_train_resume_flag(tmp_path):
    """Test continuing a trial from a periodic checkpoint."""
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"trainer": {"arch": "lstm1x8", "batch_size": 4, "log_every": 0}}))
    base = ["-c", str(config), "train", "--seq", "HPPHPH", "--episodes", "10", "--checkpoint-every", "5"]
    assert main(base + ["-o", str(tmp_path / "a")]) == EXIT_OK
    ckpt = tmp_path / "a" / "HPPHPH" / "drl" / "seed-0" / "checkpoints" / "ckpt-0000005.npz"
    assert main(base + ["-o", str(tmp_path / "b"), "--resume", str(ckpt)]) == EXIT_OK
    trial = tmp_path / "b" / "HPPHPH" / "drl" / "seed-0"
    assert read_json(trial / "manifest.json")["resumed_from"] == str(ckpt)
    assert [int(r["episode"]) for r in read_csv(trial / "curve.csv")] == [5, 6, 7, 8, 9]


def test_confdb_uses_benchmark_best_known(tmp_path, capsys):
    """Test that benchmark ids pick up their best-known energy without a flag."""
    log = tmp_path / "best.jsonl"
    seq = "HPHPPHHPHPPHPHHPPHPH"
    row = {"episode": 1, "energy": 0, "actions": "F" * 18, "sequence": seq, "sequence_id": "20mer-A", "trial": "a"}
    log.write_text(json.dumps(row) + "\n")
    assert main(["confdb", "--import", str(log), "--stats"]) == EXIT_OK
    stats = json.loads(capsys.readouterr().out)
    assert stats["20mer-A"]["best_known"] == -9
    assert stats["20mer-A"]["next_best"] == -8
