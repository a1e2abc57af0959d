"""Configuration management for hpfold training, enumeration and runs."""

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from hpfold.errors import ConfigError

OUTPUT_ENV_VAR = "HPFOLD_OUTPUT"

MODES = ("drl", "rand")


def default_output_root() -> Path:
    """Output root from ``HPFOLD_OUTPUT`` or ``./runs``."""
    return Path(os.environ.get(OUTPUT_ENV_VAR, "runs"))


@dataclass
class TrainerConfig:
    """Configuration for a single DQN (or RAND) trial."""

    episodes: int = 1000
    seed: int = 0
    mode: str = "drl"  # "drl" or "rand"
    arch: str = "auto"  # lstm2x256, lstm3x512, fcn, fcn2x256, ... ; auto picks by N

    # Q-learning
    gamma: float = 0.98
    target_sync: int = 100  # gradient updates between target syncs
    batch_size: int = 32
    replay_max: int = 50000  # capacity is min(replay_max, episodes // 10)

    # Adam
    learning_rate: float = 0.0005
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: Optional[float] = None  # global-norm clip, off by default

    # Exploration schedule
    eps_min: float = 0.01
    eps_max: float = 1.0
    eps_decay: float = 5.0

    # Opt-in search heuristics
    prune_consecutive_forward: bool = False
    prune_futile: bool = False

    reward_trapped_partial: bool = False

    dtype: str = "float32"
    checkpoint_every: int = 0  # episodes; 0 writes only the final checkpoint
    log_every: int = 1000

    def validate(self) -> "TrainerConfig":
        """Check value ranges.

        :return: self, for chaining
        """
        if self.mode not in MODES:
            raise ConfigError(f"Unknown mode {self.mode!r}; expected one of {MODES}")
        if self.episodes < 1:
            raise ConfigError(f"episodes must be >= 1, got {self.episodes}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.target_sync < 1:
            raise ConfigError(f"target_sync must be >= 1, got {self.target_sync}")
        if not 0.0 <= self.eps_min <= self.eps_max <= 1.0:
            raise ConfigError(f"need 0 <= eps_min <= eps_max <= 1, got {self.eps_min}, {self.eps_max}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")
        return self

    @property
    def replay_capacity(self) -> int:
        return max(self.batch_size, min(self.replay_max, self.episodes // 10))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainerConfig":
        return cls(**_known_keys(cls, data))


@dataclass
class OracleConfig:
    """Configuration for exhaustive enumeration."""

    max_n: int = 22
    allow_large: bool = False  # lift max_n, e.g. for the N = 24 census
    landscape_max_n: int = 14
    optimal_cap: int = 1000
    workers: int = 1
    split_depth: int = 5  # action-prefix depth at which subtrees are farmed out


@dataclass
class RunConfig:
    """Everything needed to rerun a CLI invocation."""

    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    sequence: Optional[str] = None
    benchmark_id: Optional[str] = None
    output_dir: Path = field(default_factory=default_output_root)
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3])
    workers: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trainer": self.trainer.to_dict(),
            "sequence": self.sequence,
            "benchmark_id": self.benchmark_id,
            "output_dir": str(self.output_dir),
            "seeds": list(self.seeds),
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        data = dict(data)
        trainer = TrainerConfig.from_dict(data.pop("trainer", {}))
        known = _known_keys(cls, data)
        if "output_dir" in known:
            known["output_dir"] = Path(known["output_dir"])
        return cls(trainer=trainer, **known)


def _known_keys(cls, data: Dict[str, Any]) -> Dict[str, Any]:
    """Reject keys that are not fields of ``cls``.

    :param cls: dataclass type
    :param data: mapping to filter
    :return: the mapping, unchanged
    """
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"Unknown {cls.__name__} keys: {', '.join(unknown)}")
    return dict(data)


def load_config_file(path: Path) -> RunConfig:
    """Read a JSON run configuration.

    :param path: path to a JSON file shaped like ``RunConfig.to_dict()``
    :return: the parsed run config
    """
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return RunConfig.from_dict(data)
