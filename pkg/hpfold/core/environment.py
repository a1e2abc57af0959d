"""Gymnasium wrapper around the lattice folding MDP."""

import logging
from typing import Optional

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from hpfold.core import lattice
from hpfold.core.encoding import FEATURES, encode
from hpfold.core.lattice import EpisodeStatus, as_sequence
from hpfold.utils.drawing import render_ascii

logger = logging.getLogger(__name__)


class HPFoldingEnv(gym.Env):
    """Grow an HP chain on the square lattice, one relative move per step.

    Observations are the N x 6 one-hot encoding. ``info["valid_mask"]`` lists
    the legal moves of the new state; taking a masked move raises
    ``InvalidActionError``.
    """

    metadata = {"render_modes": ["ansi"]}

    def __init__(self, sequence, config=None, render_mode: Optional[str] = None):
        super().__init__()
        self.sequence = as_sequence(sequence)
        self.config = config
        self.render_mode = render_mode
        n = len(self.sequence)
        self.observation_space = spaces.Box(low=0, high=1, shape=(n, FEATURES), dtype=np.uint8)
        self.action_space = spaces.Discrete(3)
        self.state = lattice.reset(self.sequence)
        self.status = EpisodeStatus.IN_PROGRESS
        self.valid_mask = lattice.valid_actions(self.state)

    def reset(self, *, seed: Optional[int] = None, options=None):
        super().reset(seed=seed)
        self.state = lattice.reset(self.sequence)
        self.status = EpisodeStatus.IN_PROGRESS
        self.valid_mask = lattice.valid_actions(self.state)
        return encode(self.state, self.sequence), self._info(None)

    def step(self, action):
        result = lattice.step(self.state, self.sequence, action, self.config)
        self.state = result.state
        self.status = result.status
        self.valid_mask = result.valid_mask
        obs = encode(self.state, self.sequence)
        if result.status is EpisodeStatus.TRAPPED:
            logger.debug(f"Trapped after {self.state.step_index} monomers: {self.state.action_string}")
        return obs, result.reward, result.status.terminal, False, self._info(result.energy_if_terminal)

    def _info(self, energy):
        return {
            "valid_mask": self.valid_mask,
            "status": self.status,
            "energy": energy,
            "state": self.state,
        }

    def render(self):
        return render_ascii(self.state.placed, self.sequence)
