"""Tests for the conformation database."""

import json

import numpy as np
import pytest

from hpfold.core import database
from hpfold.core.database import ConformationDatabase, ConformationRecord, canonical_key
from hpfold.core.enumerator import enumerate_saws, iter_walks
from hpfold.errors import ReplayError
from hpfold.utils.io import read_json, read_jsonl


def _record(actions, energy, seq="HPPH", trial="t0", seq_id="hpph"):
    return ConformationRecord(sequence_id=seq_id, sequence=seq, actions=actions, energy=energy, trial_id=trial)


def _oracle_db(seq, seq_id="s"):
    db = ConformationDatabase()
    for actions, _, score in iter_walks(seq):
        db.add(_record(actions, -score, seq=seq, trial="oracle", seq_id=seq_id))
    return db


def test_keys():
    """Test that keys are the action strings."""
    assert canonical_key(_record("LL", -1)) == canonical_key(_record("LL", -1, trial="t1"))
    assert canonical_key(_record("LL", -1)) != canonical_key(_record("LF", 0))


def test_coordinates_are_derived():
    """Test that records fill in their coordinates."""
    assert _record("LL", -1).coords == ((0, 0), (0, 1), (-1, 1), (-1, 0))


def test_duplicate_insert():
    """Test that duplicates do not grow the distinct count."""
    db = ConformationDatabase()
    assert db.add(_record("LL", -1))
    assert not db.add(_record("LL", -1))
    assert len(db) == 1


def test_tampered_energy_is_rejected():
    """Test replay verification on insert."""
    db = ConformationDatabase()
    with pytest.raises(ReplayError, match="replays to energy 0"):
        db.add(_record("LF", -1))
    with pytest.raises(ReplayError):
        db.add(_record("L", 0))
    assert len(db) == 0


def test_per_trial_and_union_counts():
    """Test per-trial counts and their union."""
    seq = "HPPHPPHPPH"
    db = ConformationDatabase()
    walks = [(a, -s) for a, _, s in iter_walks(seq)]
    best = min(e for _, e in walks)
    optimal = [a for a, e in walks if e == best]
    for trial in ("t0", "t1"):
        for actions in optimal:
            db.add(_record(actions, best, seq=seq, trial=trial, seq_id="s"))
    stats = database.stats(db)
    assert stats.count("s", best) == len(optimal)
    assert stats.count("s", best, "t0") == len(optimal)
    assert stats.count("s", best, "t1") == len(optimal)
    assert stats.best_known["s"] == best

    db.add(_record(optimal[0], best, seq=seq, trial="t2", seq_id="s"))
    assert database.stats(db).count("s", best, "t2") == 1
    assert database.stats(db).count("s", best) == len(optimal)


def test_oracle_load_matches_degeneracy():
    """Test that a fully loaded database reproduces the enumeration degeneracy."""
    rng = np.random.default_rng(1)
    for n in (6, 8, 10):
        seq = "".join(rng.choice(["H", "P"], size=n))
        report = enumerate_saws(seq)
        db = _oracle_db(seq)
        assert database.stats(db).count("s", report.min_energy) == report.degeneracy
        assert len(db) == report.complete_count


def test_hpph_export(tmp_path):
    """Test the exported records and stats of the full HPPH load."""
    db = _oracle_db("HPPH", seq_id="hpph")
    database.export(db, tmp_path)
    rows = list(read_jsonl(tmp_path / "records.jsonl"))
    assert sum(r["energy"] == -1 for r in rows) == 1
    assert sum(r["energy"] == 0 for r in rows) == 4
    stats = read_json(tmp_path / "stats.json")
    assert stats["hpph"]["best_known"] == -1
    assert stats["hpph"]["next_best"] == 0
    assert stats["hpph"]["levels"]["-1"]["distinct"] == 1


def test_export_load_round_trip(tmp_path):
    """Test that loading an export rebuilds an equal database."""
    db = _oracle_db("HPPHPH")
    db.add(_record("LLFL", -2, seq="HPPHPH", trial="other", seq_id="s"))
    database.export(db, tmp_path)
    assert database.load(tmp_path) == db


def test_empty_export(tmp_path):
    """Test that an empty database exports empty files."""
    database.export(ConformationDatabase(), tmp_path)
    assert (tmp_path / "records.jsonl").read_text() == ""
    assert read_json(tmp_path / "stats.json") == {}


def test_drawings(tmp_path):
    """Test PDF and SVG drawings of every conformation."""
    db = _oracle_db("HPPH")
    database.export(db, tmp_path / "pdf", draw=True)
    assert len(list((tmp_path / "pdf" / "drawings").glob("*.pdf"))) == 5
    database.export(db, tmp_path / "svg", draw=True, fmt="svg")
    svg = next((tmp_path / "svg" / "drawings").glob("*.svg")).read_text()
    assert "<svg" in svg


def test_import_log_continues_past_bad_lines(tmp_path):
    """Test that corrupted lines are reported and good ones kept."""
    log = tmp_path / "best.jsonl"
    lines = [
        {"episode": 3, "energy": -1, "actions": "LL", "sequence": "HPPH", "sequence_id": "hpph", "trial": "a"},
        {"episode": 4, "energy": -1, "actions": "LF", "sequence": "HPPH", "sequence_id": "hpph", "trial": "a"},
    ]
    log.write_text("\n".join(json.dumps(x) for x in lines) + "\nnot json\n")
    db = ConformationDatabase()
    inserted, rejected = database.import_log(db, log)
    assert inserted == 1
    assert [line for line, _ in rejected] == [2, 3]
    record = db.records()[0]
    assert record.trial_id == "a"
    assert record.first_seen_episode == 3


def test_import_empty_log(tmp_path):
    """Test that an empty log gives an empty database."""
    log = tmp_path / "best.jsonl"
    log.write_text("")
    db = ConformationDatabase()
    assert database.import_log(db, log) == (0, [])
    assert len(db) == 0
