"""Benchmark sequences, multi-seed suites and learning-curve summaries."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from hpfold.config import TrainerConfig
from hpfold.core.lattice import HPSequence
from hpfold.core.trial import TrialRunner
from hpfold.errors import ConfigError
from hpfold.utils.io import write_csv, write_json

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2, 3)
DEFAULT_WINDOW = 200


@dataclass(frozen=True)
class BenchmarkEntry:
    id: str
    sequence: HPSequence
    best_known_energy: int
    episodes_default: int

    def __len__(self) -> int:
        return len(self.sequence)


def _entry(id: str, monomers: str, best: int, episodes: int) -> BenchmarkEntry:
    return BenchmarkEntry(id, HPSequence(monomers), best, episodes)


BENCHMARK: Dict[str, BenchmarkEntry] = {
    e.id: e
    for e in (
        _entry("20mer-A", "HPHPPHHPHPPHPHHPPHPH", -9, 100_000),
        _entry("20mer-B", "HHHPPHPHPHPPHPHPHPPH", -10, 100_000),
        _entry("24mer", "HHPPHPPHPPHPPHPPHPPHPPHH", -9, 500_000),
        _entry("25mer", "PPHPPHHPPPPHHPPPPHHPPPPHH", -8, 500_000),
        _entry("36mer", "PPPHHPPHHPPPPPHHHHHHHPPHHPPPPHHPPHPP", -14, 500_000),
        _entry("48mer", "PPHPPHHPPHHPPPPPHHHHHHHHHHPPPPPPHHPPHHPPHPPHHHHH", -23, 600_000),
        _entry("50mer", "HHPHPHPHPHHHHPHPPPHPPPHPPPPHPPPHPPPHPHHHHPHPHPHPHH", -21, 600_000),
    )
}

# Lowest energies reported for other methods, display only. None = not reported.
REFERENCE_METHODS = ("AntQ", "FoldingZero", "QL", "DRL|AGZ", "Random", "DQN-LSTM")
REFERENCE_RESULTS: Dict[str, Dict[str, Optional[str]]] = {
    "20mer-A": {"AntQ": None, "FoldingZero": "-9", "QL": "-9", "DRL|AGZ": "-6|-8", "Random": "-9", "DQN-LSTM": "-9"},
    "20mer-B": {"AntQ": None, "FoldingZero": None, "QL": "-10", "DRL|AGZ": "-8|-9", "Random": "-9", "DQN-LSTM": "-10"},
    "24mer": {"AntQ": "-9", "FoldingZero": "-8", "QL": None, "DRL|AGZ": "-6|-8", "Random": "-9", "DQN-LSTM": "-9"},
    "25mer": {"AntQ": None, "FoldingZero": "-7", "QL": None, "DRL|AGZ": "-|-7", "Random": "-7", "DQN-LSTM": "-8"},
    "36mer": {"AntQ": "-13", "FoldingZero": "-13", "QL": None, "DRL|AGZ": "-|-13", "Random": "-12", "DQN-LSTM": "-14"},
    "48mer": {"AntQ": "-19", "FoldingZero": "-18", "QL": None, "DRL|AGZ": None, "Random": "-17", "DQN-LSTM": "-23"},
    "50mer": {"AntQ": None, "FoldingZero": "-18", "QL": None, "DRL|AGZ": None, "Random": "-15", "DQN-LSTM": "-21"},
}

# Distinct best-known / next-best conformations per DRL trial on the 48mer.
REFERENCE_DEGENERACY = {"48mer": {"best_known": (48, 12, 24, 10), "next_best": (91, 17, 80, 60)}}


def get_entry(entry_id: str) -> BenchmarkEntry:
    try:
        return BENCHMARK[entry_id]
    except KeyError:
        raise ConfigError(
            f"Unknown benchmark id {entry_id!r}; choose from {', '.join(BENCHMARK)}"
        ) from None


@dataclass
class TrialSummary:
    entry_id: str
    seed: int
    mode: str
    episodes: int
    best_known_energy: int
    lowest_energy: Optional[int] = None
    first_episode: Optional[int] = None
    best_known_count: int = 0
    next_best_count: int = 0
    complete_ratio: float = 0.0
    witness: Optional[str] = None
    below_best_known: bool = False
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> Dict:
        return asdict(self)


SUMMARY_HEADER = tuple(TrialSummary.__dataclass_fields__)


@dataclass
class SuiteResult:
    summaries: List[TrialSummary]
    curves: Dict[Tuple[str, str], List[np.ndarray]]

    @property
    def failures(self) -> List[TrialSummary]:
        return [s for s in self.summaries if not s.ok]


def _run_trial(args) -> Tuple[TrialSummary, Optional[np.ndarray]]:
    """Worker body: one trial, never raising."""
    entry, config, out_dir = args
    summary = TrialSummary(
        entry_id=entry.id,
        seed=config.seed,
        mode=config.mode,
        episodes=config.episodes,
        best_known_energy=entry.best_known_energy,
    )
    try:
        outcome = TrialRunner(config).run(
            entry.sequence,
            out_dir,
            sequence_id=entry.id,
            best_known=entry.best_known_energy,
            extra={"benchmark_id": entry.id},
        )
    except Exception as e:
        logger.error(f"Trial {entry.id}/{config.mode}/seed-{config.seed} failed: {e}", exc_info=True)
        summary.error = f"{type(e).__name__}: {e}"
        return summary, None

    result = outcome.result
    summary.lowest_energy = result.best_energy
    summary.first_episode = result.first_best_episode
    summary.complete_ratio = result.complete_ratio
    if result.best_conformations:
        summary.witness = result.best_conformations[0].actions
    trial_id = f"{entry.id}/{config.mode}/seed-{config.seed}"
    for level, energy in outcome.tracked.items():
        keys = outcome.database.trial_keys(entry.id, energy).get(trial_id, set())
        setattr(summary, f"{level}_count", len(keys))
    if result.best_energy is not None and result.best_energy < entry.best_known_energy:
        summary.below_best_known = True
        logger.warning(
            f"{trial_id} reached {result.best_energy}, below the best-known {entry.best_known_energy}"
        )
    energies = np.array([row[1] for row in result.curve], dtype=np.int16)
    return summary, energies


def run_suite(
    entries: Iterable[BenchmarkEntry],
    modes: Sequence[str] = ("drl", "rand"),
    seeds: Sequence[int] = DEFAULT_SEEDS,
    overrides: Optional[Dict] = None,
    out_dir: Optional[Path] = None,
    workers: int = 1,
    base_config: Optional[TrainerConfig] = None,
) -> SuiteResult:
    """Run every (entry, mode, seed) trial and summarise them.

    A failing trial is logged and reported in its summary row; the rest of
    the suite still runs.

    :param entries: benchmark entries
    :param modes: "drl" and/or "rand"
    :param seeds: one trial per seed
    :param overrides: TrainerConfig fields applied to every trial
        (``episodes`` replaces each entry's default)
    :param out_dir: output root; None keeps results in memory
    :param workers: trial processes; 1 runs inline
    :param base_config: starting config (default ``TrainerConfig()``)
    :return: summaries in (entry, mode, seed) order and per-group curves
    """
    base = base_config or TrainerConfig()
    overrides = dict(overrides or {})
    tasks = []
    for entry in entries:
        for mode in modes:
            for seed in seeds:
                fields = {"episodes": entry.episodes_default, **overrides, "mode": mode, "seed": seed}
                try:
                    config = replace(base, **fields).validate()
                except TypeError as e:
                    raise ConfigError(f"Bad override: {e}") from e
                tasks.append((entry, config, out_dir))
    logger.info(f"Running {len(tasks)} trials with {workers} worker(s)")

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_trial, tasks, chunksize=1))
    else:
        outputs = [_run_trial(t) for t in tasks]

    summaries = [s for s, _ in outputs]
    curves: Dict[Tuple[str, str], List[np.ndarray]] = {}
    for summary, energies in outputs:
        if energies is not None:
            curves.setdefault((summary.entry_id, summary.mode), []).append(energies)

    result = SuiteResult(summaries=summaries, curves=curves)
    if out_dir is not None:
        write_suite(result, Path(out_dir))
    for s in result.failures:
        logger.error(f"Failed: {s.entry_id}/{s.mode}/seed-{s.seed}: {s.error}")
    return result


def comparison_table(summaries: Sequence[TrialSummary]) -> List[Dict]:
    """One row per entry: best-known energy, lowest per mode and reference columns."""
    rows = []
    for entry_id in dict.fromkeys(s.entry_id for s in summaries):
        group = [s for s in summaries if s.entry_id == entry_id]
        row = {"entry": entry_id, "best_known": group[0].best_known_energy}
        for mode in dict.fromkeys(s.mode for s in group):
            energies = [s.lowest_energy for s in group if s.mode == mode and s.lowest_energy is not None]
            row[mode] = min(energies) if energies else None
        for method in REFERENCE_METHODS:
            row[f"ref:{method}"] = REFERENCE_RESULTS.get(entry_id, {}).get(method)
        rows.append(row)
    return rows


def write_suite(result: SuiteResult, out_dir: Path, window: int = DEFAULT_WINDOW) -> None:
    """summary.csv/json, table.csv and one band.csv per (entry, mode)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(
        out_dir / "summary.csv",
        SUMMARY_HEADER,
        ([getattr(s, k) for k in SUMMARY_HEADER] for s in result.summaries),
    )
    table = comparison_table(result.summaries)
    write_json(
        out_dir / "summary.json",
        {
            "trials": [s.to_dict() for s in result.summaries],
            "table": table,
            "reference_degeneracy": {k: {lv: list(v) for lv, v in d.items()} for k, d in REFERENCE_DEGENERACY.items()},
        },
    )
    if table:
        header = list(table[0])
        for row in table[1:]:
            header.extend(k for k in row if k not in header)
        write_csv(out_dir / "table.csv", header, ([row.get(k) for k in header] for row in table))

    for (entry_id, mode), curves in sorted(result.curves.items()):
        try:
            mean, std = aggregate_seeds([moving_minimum(c, window) for c in curves])
        except ValueError as e:
            logger.warning(f"No band for {entry_id}/{mode}: {e}")
            continue
        write_band(out_dir / entry_id / mode / "band.csv", mean, std)


def write_band(path: Path, mean: np.ndarray, std: np.ndarray) -> Path:
    return write_csv(
        path,
        ("episode", "mean", "std", "lower", "upper"),
        ((i, m, s, m - s, m + s) for i, (m, s) in enumerate(zip(mean.tolist(), std.tolist()))),
    )


def moving_minimum(curve, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Element i is the minimum of ``curve[max(0, i - window + 1) : i + 1]``.

    :param curve: energies per episode
    :param window: trailing window length, >= 1
    :return: array the same length and dtype as ``curve``
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    values = np.asarray(curve)
    if values.size == 0:
        return values.copy()
    padded = np.concatenate([np.full(window - 1, np.inf), values.astype(np.float64)])
    return sliding_window_view(padded, window).min(axis=1).astype(values.dtype)


def aggregate_seeds(curves: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    """Per-episode mean and population standard deviation across seeds.

    :raises ValueError: no curves, or curves of different lengths
    """
    if not len(curves):
        raise ValueError("aggregate_seeds needs at least one curve")
    lengths = {len(c) for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"Curves differ in length: {sorted(lengths)}")
    stacked = np.vstack([np.asarray(c, dtype=np.float64) for c in curves])
    return stacked.mean(axis=0), stacked.std(axis=0)
