"""One trial end to end: manifest -> train -> conformations -> summary."""

import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from hpfold.config import TrainerConfig
from hpfold.core import database
from hpfold.core.agent import TrainingResult, train
from hpfold.core.database import ConformationDatabase
from hpfold.core.lattice import as_sequence
from hpfold.utils.io import write_json

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"


def trial_dir(root: Path, sequence_id: str, mode: str, seed: int) -> Path:
    """``root/<sequence>/<mode>/seed-<k>``."""
    return Path(root) / sequence_id / mode / f"seed-{seed}"


@dataclass
class TrialOutcome:
    sequence_id: str
    mode: str
    seed: int
    out_dir: Optional[Path]
    result: TrainingResult
    database: ConformationDatabase
    tracked: Dict[str, int] = field(default_factory=dict)


class TrialRunner:
    """Runs and records a single (sequence, mode, seed) trial."""

    def __init__(self, config: TrainerConfig = None):
        self.config = (config or TrainerConfig()).validate()

    def run(
        self,
        seq,
        out_root: Optional[Path] = None,
        sequence_id: Optional[str] = None,
        best_known: Optional[int] = None,
        extra: Optional[Dict] = None,
        resume: Optional[Path] = None,
    ) -> TrialOutcome:
        """Train on ``seq`` and write the trial's artifacts.

        :param seq: HP sequence
        :param out_root: output root; None keeps everything in memory
        :param sequence_id: label for paths and logs (default: the sequence)
        :param best_known: best-known energy; tracks it and the next level
        :param extra: additional manifest fields
        :param resume: checkpoint to continue training from
        :return: training result plus the trial's conformation database
        """
        seq = as_sequence(seq)
        sequence_id = sequence_id or seq.monomers
        cfg = self.config
        out_dir = None if out_root is None else trial_dir(out_root, sequence_id, cfg.mode, cfg.seed)
        trial_id = f"{sequence_id}/{cfg.mode}/seed-{cfg.seed}"

        tracked = {}
        if best_known is not None:
            tracked = {"best_known": best_known, "next_best": best_known + 1}

        if resume is not None:
            extra = {**(extra or {}), "resumed_from": str(resume)}

        # Phase 1: Manifest
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_json(out_dir / MANIFEST_FILE, self._manifest(seq, sequence_id, tracked, extra))
            logger.info(f"Trial {trial_id} writing to {out_dir}")

        # Phase 2: Train
        db = ConformationDatabase()
        result = train(
            seq,
            cfg,
            out_dir=out_dir,
            database=db,
            tracked_energies=tracked.values(),
            sequence_id=sequence_id,
            trial_id=trial_id,
            resume=resume,
        )

        # Phase 3: Conformations
        if out_dir is not None and len(db):
            database.export(db, out_dir / "conformations", best_known={sequence_id: best_known} if tracked else None)

        return TrialOutcome(
            sequence_id=sequence_id,
            mode=cfg.mode,
            seed=cfg.seed,
            out_dir=out_dir,
            result=result,
            database=db,
            tracked=tracked,
        )

    def _manifest(self, seq, sequence_id: str, tracked: Dict[str, int], extra: Optional[Dict]) -> Dict:
        from hpfold import __version__

        cfg = self.config
        manifest = {
            "hpfold_version": __version__,
            "numpy_version": np.__version__,
            "python_version": platform.python_version(),
            "sequence": seq.monomers,
            "sequence_id": sequence_id,
            "length": len(seq),
            "seed": cfg.seed,
            "mode": cfg.mode,
            "config": cfg.to_dict(),
            "replay_capacity": cfg.replay_capacity,
            "adam": {
                "lr": cfg.learning_rate,
                "beta1": cfg.adam_beta1,
                "beta2": cfg.adam_beta2,
                "eps": cfg.adam_eps,
            },
            "tracked_energies": tracked,
        }
        if extra:
            manifest.update(extra)
        return manifest


def fold_sequence(
    seq,
    config: TrainerConfig = None,
    out_root: Optional[Path] = None,
    sequence_id: Optional[str] = None,
    best_known: Optional[int] = None,
) -> TrainingResult:
    """Convenience wrapper: run one trial and return its training result."""
    return TrialRunner(config).run(seq, out_root, sequence_id, best_known).result

