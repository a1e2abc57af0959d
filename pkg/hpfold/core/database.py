"""Database of distinct conformations at tracked energy levels.

Records are keyed by their action string. The fixed two-monomer prefix and
the first-turn-Left rule already quotient out rotations, translations and
reflections, so equal strings are equal conformations and vice versa.
"""

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple

from hpfold.core import lattice
from hpfold.core.lattice import Coord, EpisodeStatus
from hpfold.errors import HPFoldError, ReplayError
from hpfold.utils.io import read_jsonl, write_json, write_jsonl

logger = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"
STATS_FILE = "stats.json"


@dataclass(frozen=True)
class ConformationRecord:
    """One complete conformation.

    ``coords`` is derived from ``actions`` when left empty.
    """

    sequence_id: str
    sequence: str
    actions: str
    energy: int
    coords: Tuple[Coord, ...] = ()
    first_seen_episode: Optional[int] = None
    trial_id: Optional[str] = None

    def __post_init__(self):
        if not self.coords:
            object.__setattr__(self, "coords", tuple(lattice.coordinates_for(self.actions)))
        else:
            object.__setattr__(self, "coords", tuple(tuple(c) for c in self.coords))

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["coords"] = [list(c) for c in self.coords]
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ConformationRecord":
        data = dict(data)
        data["coords"] = tuple(tuple(c) for c in data.get("coords") or ())
        # best.jsonl lines from training use "trial" and "episode"
        if "trial" in data:
            data.setdefault("trial_id", data.pop("trial"))
        if "episode" in data:
            data.setdefault("first_seen_episode", data.pop("episode"))
        data.setdefault("sequence_id", data.get("sequence"))
        return cls(**data)


def canonical_key(record: ConformationRecord) -> str:
    return record.actions


def verify_record(record: ConformationRecord) -> None:
    """Replay ``record`` and check it is complete with the stored energy.

    :raises ReplayError: naming what failed to match
    """
    try:
        result = lattice.replay(record.sequence, record.actions)
    except HPFoldError as e:
        raise ReplayError(f"{record.actions!r} does not replay on {record.sequence}: {e}") from e
    if result.status is not EpisodeStatus.COMPLETE:
        raise ReplayError(
            f"{record.actions!r} ends {result.status.name.lower()} after "
            f"{result.state.step_index} of {len(record.sequence)} monomers"
        )
    if result.energy_if_terminal != record.energy:
        raise ReplayError(
            f"{record.actions!r} replays to energy {result.energy_if_terminal}, record claims {record.energy}"
        )
    if list(record.coords) != list(result.state.placed):
        raise ReplayError(f"{record.actions!r}: stored coordinates disagree with replay")


@dataclass
class LevelStats:
    energy: int
    distinct: int
    per_trial: Dict[str, int] = field(default_factory=dict)


@dataclass
class DatabaseStats:
    """Distinct counts per (sequence, energy), overall and per trial."""

    levels: Dict[str, Dict[int, LevelStats]] = field(default_factory=dict)
    best_known: Dict[str, int] = field(default_factory=dict)

    def count(self, sequence_id: str, energy: int, trial_id: Optional[str] = None) -> int:
        level = self.levels.get(sequence_id, {}).get(energy)
        if level is None:
            return 0
        if trial_id is None:
            return level.distinct
        return level.per_trial.get(trial_id, 0)

    def to_dict(self) -> Dict:
        out = {}
        for seq_id, levels in sorted(self.levels.items()):
            best = self.best_known.get(seq_id)
            out[seq_id] = {
                "best_known": best,
                "next_best": None if best is None else best + 1,
                "levels": {
                    str(e): {"distinct": lv.distinct, "per_trial": dict(sorted(lv.per_trial.items()))}
                    for e, lv in sorted(levels.items())
                },
            }
        return out


class ConformationDatabase:
    """Single-writer store of verified, deduplicated conformations."""

    def __init__(self):
        self._records: Dict[Tuple[str, int], Dict[str, ConformationRecord]] = defaultdict(dict)
        self._trials: Dict[Tuple[str, int], Dict[str, Set[str]]] = defaultdict(lambda: defaultdict(set))

    def __len__(self) -> int:
        return sum(len(bucket) for bucket in self._records.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConformationDatabase):
            return NotImplemented
        return self._snapshot() == other._snapshot()

    def _snapshot(self):
        records = {k: dict(v) for k, v in self._records.items() if v}
        trials = {k: {t: set(s) for t, s in v.items()} for k, v in self._trials.items() if v}
        return records, trials

    def add(self, record: ConformationRecord) -> bool:
        """Insert ``record`` unless its key is already stored.

        Per-trial membership is updated either way.

        :param record: conformation to store
        :return: True if the key was new for (sequence, energy)
        :raises ReplayError: the record does not replay to what it claims
        """
        bucket_key = (record.sequence_id, record.energy)
        key = canonical_key(record)
        bucket = self._records[bucket_key]
        inserted = False
        if key not in bucket:
            verify_record(record)
            bucket[key] = record
            inserted = True
        elif bucket[key].sequence != record.sequence:
            raise ReplayError(f"{record.sequence_id}: key {key!r} stored for a different sequence")
        if record.trial_id is not None:
            self._trials[bucket_key][record.trial_id].add(key)
        return inserted

    def records(self, sequence_id: Optional[str] = None, energy: Optional[int] = None) -> List[ConformationRecord]:
        out = []
        for (seq_id, e), bucket in sorted(self._records.items()):
            if sequence_id is not None and seq_id != sequence_id:
                continue
            if energy is not None and e != energy:
                continue
            out.extend(bucket[k] for k in sorted(bucket))
        return out

    def trial_keys(self, sequence_id: str, energy: int) -> Dict[str, Set[str]]:
        return {t: set(keys) for t, keys in self._trials.get((sequence_id, energy), {}).items()}

    def verify_all(self) -> List[Tuple[ConformationRecord, str]]:
        """Re-verify every stored record; returns (record, message) failures."""
        failures = []
        for record in self.records():
            try:
                verify_record(record)
            except ReplayError as e:
                failures.append((record, str(e)))
        return failures


def stats(db: ConformationDatabase, best_known: Optional[Dict[str, int]] = None) -> DatabaseStats:
    """Distinct counts per sequence and energy level.

    :param db: database to summarise
    :param best_known: best-known energy per sequence id; defaults to the
        lowest stored energy
    :return: counts overall (union over trials) and per trial
    """
    result = DatabaseStats()
    for (seq_id, e), bucket in sorted(db._records.items()):
        if not bucket:
            continue
        per_trial = {t: len(keys) for t, keys in db._trials.get((seq_id, e), {}).items()}
        result.levels.setdefault(seq_id, {})[e] = LevelStats(energy=e, distinct=len(bucket), per_trial=per_trial)
    for seq_id, levels in result.levels.items():
        if best_known and seq_id in best_known:
            result.best_known[seq_id] = best_known[seq_id]
        else:
            result.best_known[seq_id] = min(levels)
    return result


def export(
    db: ConformationDatabase,
    path: Path,
    draw: bool = False,
    fmt: str = "pdf",
    best_known: Optional[Dict[str, int]] = None,
) -> Path:
    """Write ``records.jsonl``, ``stats.json`` and optional drawings to a directory.

    Each JSON line holds sequence_id, sequence, actions, energy, coords,
    first_seen_episode, trial_id and the list of trials that found it.

    :param db: database to export
    :param path: output directory
    :param draw: also draw every conformation
    :param fmt: drawing format, "pdf" or "svg"
    :param best_known: forwarded to ``stats``
    :return: the output directory
    """
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        rows = []
        for record in db.records():
            row = record.to_dict()
            trials = db.trial_keys(record.sequence_id, record.energy)
            row["trials"] = sorted(t for t, keys in trials.items() if record.actions in keys)
            rows.append(row)
        write_jsonl(path / RECORDS_FILE, rows)
        write_json(path / STATS_FILE, stats(db, best_known).to_dict())
    except OSError as e:
        raise OSError(f"Could not export conformation database to {path}: {e}") from e

    if draw:
        from hpfold.utils.drawing import draw_conformation

        for record in db.records():
            name = f"{record.sequence_id}_E{record.energy}_{record.actions}.{fmt}"
            draw_conformation(
                record.coords,
                record.sequence,
                path / "drawings" / name,
                fmt=fmt,
                title=f"{record.sequence_id}  E={record.energy}  {record.actions}",
            )
    logger.info(f"Exported {len(rows)} conformations to {path}")
    return path


def load(path: Path) -> ConformationDatabase:
    """Rebuild a database from an ``export`` directory (or its records file)."""
    path = Path(path)
    records_file = path / RECORDS_FILE if path.is_dir() else path
    db = ConformationDatabase()
    for row in read_jsonl(records_file):
        trials = row.pop("trials", [])
        record = ConformationRecord.from_dict(row)
        db.add(record)
        bucket = (record.sequence_id, record.energy)
        for trial in trials:
            db._trials[bucket][trial].add(record.actions)
    return db


def import_log(
    db: ConformationDatabase,
    path: Path,
    energies: Optional[Iterable[int]] = None,
) -> Tuple[int, List[Tuple[int, str]]]:
    """Ingest a ``best.jsonl`` log, continuing past bad lines.

    :param db: database to fill
    :param path: JSON-lines log written by training
    :param energies: only keep these energy levels (default: all)
    :return: (inserted count, list of (line number, reason) rejections)
    """
    wanted = None if energies is None else set(energies)
    inserted = 0
    rejected = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        return 0, [(0, f"cannot read {path}: {e}")]
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = ConformationRecord.from_dict(json.loads(line))
            if wanted is not None and record.energy not in wanted:
                continue
            inserted += db.add(record)
        except (json.JSONDecodeError, TypeError, KeyError, HPFoldError) as e:
            logger.warning(f"{path}:{lineno}: rejected: {e}")
            rejected.append((lineno, str(e)))
    return inserted, rejected
