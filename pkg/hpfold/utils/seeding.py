"""Named, independently seeded random streams for one trial."""

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

STREAMS = ("init", "explore", "batch", "tie")


@dataclass
class RngStreams:
    """Four generators derived from one trial seed.

    Drawing from one stream never shifts another, so e.g. switching RAND
    mode on (no network evaluations) leaves the exploration stream intact.
    """

    init: np.random.Generator
    explore: np.random.Generator
    batch: np.random.Generator
    tie: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        children = np.random.SeedSequence(seed).spawn(len(STREAMS))
        return cls(*(np.random.Generator(np.random.PCG64(c)) for c in children))

    def state(self) -> Dict[str, Any]:
        return {name: getattr(self, name).bit_generator.state for name in STREAMS}

    def restore(self, state: Dict[str, Any]) -> None:
        for name in STREAMS:
            getattr(self, name).bit_generator.state = state[name]
