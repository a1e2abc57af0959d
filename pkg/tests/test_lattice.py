"""Tests for the lattice folding MDP and its gymnasium wrapper."""

import logging

import numpy as np
import pytest

from hpfold.config import TrainerConfig
from hpfold.core import lattice
from hpfold.core.environment import HPFoldingEnv
from hpfold.core.lattice import Action, EpisodeStatus, Heading, HPSequence
from hpfold.errors import InvalidActionError, SequenceError


def test_sequence_validation():
    """Test that bad characters and short chains are rejected."""
    with pytest.raises(SequenceError, match=r"'X' at position 2"):
        HPSequence("HPXH")
    with pytest.raises(SequenceError):
        HPSequence("HP")
    assert str(HPSequence("hpph")) == "HPPH"


def test_reset_fixed_prefix():
    """Test the two fixed monomers and the initial mask."""
    state = lattice.reset("HPPH")
    assert state.placed == ((0, 0), (0, 1))
    assert state.heading is Heading.UP
    assert not state.first_turn_taken
    # R is masked until the first turn
    assert lattice.valid_actions(state) == (True, True, False)
    assert lattice.one_step_probability(state) == 0.5


def test_turns_rotate_counter_clockwise_for_left():
    """Test the relative-to-absolute heading table."""
    assert Heading.UP.turn(Action.L) is Heading.LEFT
    assert Heading.UP.turn(Action.R) is Heading.RIGHT
    assert Heading.LEFT.turn(Action.L) is Heading.DOWN
    assert Heading.RIGHT.turn(Action.F) is Heading.RIGHT


def test_mask_after_walk():
    """Test the mask after a walk whose right turn would hit the chain."""
    result = lattice.replay("HPPHPPHPPH", "LFRRF")
    state = result.state
    assert state.head == (0, 2)
    assert state.heading is Heading.RIGHT
    assert result.valid_mask == (True, True, False)
    assert result.status is EpisodeStatus.IN_PROGRESS


def test_trapped_walk():
    """Test that a walk boxed in by its own chain is trapped."""
    result = lattice.replay("HPPHPPHPP", "LFLFLL")
    assert result.status is EpisodeStatus.TRAPPED
    assert result.state.step_index == 8
    assert result.valid_mask == (False, False, False)
    assert result.reward == 0.0


def test_trapped_partial_reward_flag():
    """Test that the opt-in flag pays |E| of a trapped chain."""
    seq = "HPPHPPPHP"
    plain = lattice.replay(seq, "LFLFLL")
    flagged = lattice.replay(seq, "LFLFLL", TrainerConfig(reward_trapped_partial=True))
    assert plain.reward == 0.0
    assert flagged.energy_if_terminal == -1
    assert flagged.reward == 1.0


def test_energy_hpphph():
    """Test the two-contact fold of HPPHPH."""
    result = lattice.replay("HPPHPH", "LLFL")
    assert result.status is EpisodeStatus.COMPLETE
    assert result.energy_if_terminal == -2
    assert result.reward == 2.0
    assert lattice.contact_pairs(result.state.placed, "HPPHPH") == [(0, 3), (0, 5)]


def test_energy_hpph():
    """Test that only the LL fold of HPPH has a contact."""
    assert lattice.replay("HPPH", "LL").energy_if_terminal == -1
    for actions in ("LF", "LR", "FL", "FF"):
        assert lattice.replay("HPPH", actions).energy_if_terminal == 0


def test_all_p_energy_is_zero():
    """Test that sequences without H have zero energy."""
    assert lattice.replay("PPPPPP", "LLFL").energy_if_terminal == 0


def test_invalid_actions_raise():
    """Test masked moves and steps past the end."""
    state = lattice.reset("HPPH")
    with pytest.raises(InvalidActionError):
        lattice.step(state, "HPPH", Action.R)
    done = lattice.replay("HPPH", "LL")
    with pytest.raises(InvalidActionError):
        lattice.step(done.state, "HPPH", Action.L)
    with pytest.raises(InvalidActionError):
        Action.parse("LQ")


def test_step_is_pure():
    """Test that step leaves its input state untouched."""
    state = lattice.reset("HPPH")
    lattice.step(state, "HPPH", Action.L)
    assert state.placed == ((0, 0), (0, 1))
    assert state.actions == ()


def test_coordinates_match_replay():
    """Test that coordinates_for agrees with replay."""
    actions = "LFRRFL"
    result = lattice.replay("HPPHPPHPPH", actions)
    assert list(result.state.placed) == lattice.coordinates_for(actions)
    assert lattice.is_self_avoiding(result.state.placed)
    assert not lattice.is_self_avoiding([(0, 0), (0, 1), (0, 0)])


def test_env_episode():
    """Test the gymnasium surface on a full episode."""
    env = HPFoldingEnv("HPPHPH")
    obs, info = env.reset()
    assert obs.shape == (6, 6)
    assert info["valid_mask"] == (True, True, False)
    total = 0.0
    for action in Action.parse("LLFL"):
        obs, reward, terminated, truncated, info = env.step(action)
        total += reward
        assert not truncated
    assert terminated
    assert total == 2.0
    assert info["energy"] == -2
    assert info["status"] is EpisodeStatus.COMPLETE
    assert "H" in env.render()


def test_env_rejects_masked_action():
    """Test that the environment raises instead of truncating."""
    env = HPFoldingEnv("HPPH")
    env.reset()
    with pytest.raises(InvalidActionError):
        env.step(Action.R)


def _transforms(placed):
    yield [(-y, x) for x, y in placed]
    yield [(-x, -y) for x, y in placed]
    yield [(-x, y) for x, y in placed]
    yield [(y, x) for x, y in placed]
    yield [(x + 5, y - 3) for x, y in placed]


def test_random_rollouts_keep_lattice_rules():
    """Test self-avoidance, masks, turn rule, rewards and symmetry on random walks."""
    rng = np.random.default_rng(2024)
    for _ in range(500):
        n = int(rng.integers(10, 15))
        seq = "".join(rng.choice(["H", "P"], size=n))
        state = lattice.reset(seq)
        mask = lattice.valid_actions(state)
        rewards = []
        status = EpisodeStatus.IN_PROGRESS
        while not status.terminal:
            for action in Action:
                site, _ = lattice.target_site(state, action)
                if mask[action]:
                    assert site not in state.occupancy
                else:
                    assert site in state.occupancy or (action is Action.R and not state.first_turn_taken)
            action = Action(int(rng.choice(np.flatnonzero(mask))))
            result = lattice.step(state, seq, action)
            state, mask, status = result.state, result.valid_mask, result.status
            rewards.append(result.reward)

        placed = state.placed
        assert len(set(placed)) == len(placed)
        for (x1, y1), (x2, y2) in zip(placed, placed[1:]):
            assert abs(x1 - x2) + abs(y1 - y2) == 1
        turns = [a for a in state.actions if a is not Action.F]
        if turns:
            assert turns[0] is Action.L
        assert all(r == 0.0 for r in rewards[:-1])
        e = lattice.energy(placed, seq)
        assert rewards[-1] == (abs(e) if status is EpisodeStatus.COMPLETE else 0.0)
        for moved in _transforms(placed):
            assert lattice.energy(moved, seq) == e


def test_three_free_neighbours_after_first_turn():
    """Test the one-in-three step probability of an open interior state."""
    state = lattice.replay("HPPHPH", "L").state
    assert state.first_turn_taken
    assert lattice.valid_actions(state) == (True, True, True)
    assert lattice.one_step_probability(state) == pytest.approx(1 / 3)


def test_env_logs_trapped_walks(caplog):
    """Test the debug record written when a walk traps itself."""
    env = HPFoldingEnv("HPPHPPHPP")
    env.reset()
    with caplog.at_level(logging.DEBUG, logger="hpfold.core.environment"):
        for action in Action.parse("LFLFLL"):
            env.step(action)
    assert "Trapped after 8 monomers: LFLFLL" in caplog.text
