"""The HP-model folding MDP on the 2D square lattice.

A conformation is grown monomer by monomer as a self-avoiding walk. The first
two monomers are fixed at (0, 0) and (0, 1), so the walk starts heading up,
and the first non-forward move must be a left turn. Together these rules
remove rotations and reflections, so each action string names one distinct
conformation.

All functions here are pure: ``step`` returns a new ``WalkState``.
"""

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from hpfold.errors import InvalidActionError, SequenceError

Coord = Tuple[int, int]
Mask = Tuple[bool, bool, bool]

EMPTY_MASK: Mask = (False, False, False)
NEIGHBOR_OFFSETS: Tuple[Coord, ...] = ((0, 1), (-1, 0), (0, -1), (1, 0))


class Action(IntEnum):
    """Relative moves, indexed in Q-value order."""

    L = 0
    F = 1
    R = 2

    @classmethod
    def parse(cls, text: str) -> Tuple["Action", ...]:
        """Parse an action string such as ``"LFRL"``.

        :param text: string over {L, F, R}
        :return: tuple of actions
        """
        try:
            return tuple(cls[ch] for ch in text.strip().upper())
        except KeyError as e:
            raise InvalidActionError(f"Action strings use L, F, R only; got {text!r}") from e


class Heading(IntEnum):
    """Absolute headings, numbered counter-clockwise."""

    UP = 0
    LEFT = 1
    DOWN = 2
    RIGHT = 3

    @property
    def vector(self) -> Coord:
        return NEIGHBOR_OFFSETS[self]

    def turn(self, action: Action) -> "Heading":
        """Heading after ``action``: L is counter-clockwise, R clockwise."""
        return Heading((self + TURN_OFFSETS[action]) % 4)


TURN_OFFSETS = {Action.L: 1, Action.F: 0, Action.R: 3}


class EpisodeStatus(Enum):
    IN_PROGRESS = "in_progress"
    COMPLETE = "complete"
    TRAPPED = "trapped"

    @property
    def terminal(self) -> bool:
        return self is not EpisodeStatus.IN_PROGRESS


@dataclass(frozen=True)
class HPSequence:
    """An H/P monomer string of length N >= 3."""

    monomers: str

    MIN_LENGTH = 3

    def __post_init__(self):
        text = self.monomers.strip().upper()
        for pos, ch in enumerate(text):
            if ch not in "HP":
                raise SequenceError(
                    f"Invalid monomer {ch!r} at position {pos} in {self.monomers!r}; "
                    "sequences use H and P only"
                )
        if len(text) < self.MIN_LENGTH:
            raise SequenceError(
                f"Sequence {text!r} has length {len(text)}; at least {self.MIN_LENGTH} "
                "monomers are needed for any decision after the fixed prefix"
            )
        object.__setattr__(self, "monomers", text)

    def __len__(self) -> int:
        return len(self.monomers)

    def __getitem__(self, i):
        return self.monomers[i]

    def __str__(self) -> str:
        return self.monomers

    def is_h(self, i: int) -> bool:
        return self.monomers[i] == "H"


@dataclass(frozen=True)
class WalkState:
    """A partial self-avoiding walk."""

    placed: Tuple[Coord, ...]
    occupancy: FrozenSet[Coord]
    heading: Heading
    first_turn_taken: bool
    actions: Tuple[Action, ...] = ()

    @property
    def step_index(self) -> int:
        return len(self.placed)

    @property
    def head(self) -> Coord:
        return self.placed[-1]

    @property
    def action_string(self) -> str:
        return "".join(a.name for a in self.actions)


@dataclass(frozen=True)
class StepResult:
    state: WalkState
    reward: float
    status: EpisodeStatus
    valid_mask: Mask
    energy_if_terminal: Optional[int] = None


def as_sequence(seq) -> HPSequence:
    """Accept either an ``HPSequence`` or plain H/P text."""
    return seq if isinstance(seq, HPSequence) else HPSequence(str(seq))


def reset(seq) -> WalkState:
    """Start a walk with the fixed two-monomer prefix.

    :param seq: HP sequence (N >= 3)
    :return: initial state heading up
    """
    seq = as_sequence(seq)
    placed = ((0, 0), (0, 1))
    return WalkState(
        placed=placed,
        occupancy=frozenset(placed),
        heading=Heading.UP,
        first_turn_taken=False,
    )


def target_site(state: WalkState, action: Action) -> Tuple[Coord, Heading]:
    """Site and heading reached by taking ``action`` from ``state``."""
    heading = state.heading.turn(action)
    dx, dy = heading.vector
    x, y = state.head
    return (x + dx, y + dy), heading


def valid_actions(state: WalkState) -> Mask:
    """Mask over (L, F, R) of the moves the walk may take.

    A move is valid when its target site is free and, before the first turn,
    it is not R.

    :param state: current walk
    :return: boolean triple in action order
    """
    mask = []
    for action in Action:
        if action is Action.R and not state.first_turn_taken:
            mask.append(False)
            continue
        site, _ = target_site(state, action)
        mask.append(site not in state.occupancy)
    return tuple(mask)


def one_step_probability(state: WalkState) -> float:
    """1 / (number of valid moves), or 0 when the walk is trapped."""
    k = sum(valid_actions(state))
    return 1.0 / k if k else 0.0


def contact_pairs(placed: Sequence[Coord], seq) -> List[Tuple[int, int]]:
    """H-H pairs (i, j), i < j - 1, that sit on neighbouring lattice sites.

    Works on partial chains: only the first ``len(placed)`` monomers count.

    :param placed: coordinates, one per placed monomer
    :param seq: HP sequence
    :return: contact pairs ordered by i, then j
    """
    seq = as_sequence(seq)
    index: Dict[Coord, int] = {c: i for i, c in enumerate(placed)}
    pairs = []
    for i, (x, y) in enumerate(placed):
        if not seq.is_h(i):
            continue
        for j in sorted(
            index[(x + dx, y + dy)] for dx, dy in NEIGHBOR_OFFSETS if (x + dx, y + dy) in index
        ):
            if j > i + 1 and seq.is_h(j):
                pairs.append((i, j))
    return pairs


def count_hh_contacts(placed: Sequence[Coord], seq) -> int:
    """Number of H-H contacts of a (possibly partial) chain."""
    return len(contact_pairs(placed, seq))


def energy(placed: Sequence[Coord], seq) -> int:
    """HP energy: minus the number of H-H contacts."""
    return -count_hh_contacts(placed, seq)


def reward_of(status: EpisodeStatus, energy_value: int, config=None) -> float:
    """Sparse reward, paid only when the episode ends.

    :param status: episode status after the step
    :param energy_value: energy of the (possibly partial) chain
    :param config: anything with a ``reward_trapped_partial`` attribute
    :return: |energy| on completion, 0 otherwise unless the trapped flag is set
    """
    if status is EpisodeStatus.COMPLETE:
        return float(abs(energy_value))
    if status is EpisodeStatus.TRAPPED and getattr(config, "reward_trapped_partial", False):
        return float(abs(energy_value))
    return 0.0


def step(state: WalkState, seq, action, config=None) -> StepResult:
    """Place the next monomer.

    :param state: current walk
    :param seq: HP sequence being folded
    :param action: move to take; must be valid for ``state``
    :param config: optional reward config (``reward_trapped_partial``)
    :return: the successor state, its reward, status and valid mask
    """
    seq = as_sequence(seq)
    action = Action(action)
    n = len(seq)
    if state.step_index >= n:
        raise InvalidActionError(f"Walk already holds all {n} monomers")
    if not valid_actions(state)[action]:
        raise InvalidActionError(
            f"Action {action.name} is not valid after {state.action_string or '<prefix>'!r}"
        )

    site, heading = target_site(state, action)
    placed = state.placed + (site,)
    nxt = WalkState(
        placed=placed,
        occupancy=state.occupancy | {site},
        heading=heading,
        first_turn_taken=state.first_turn_taken or action is not Action.F,
        actions=state.actions + (action,),
    )

    if nxt.step_index == n:
        status, mask = EpisodeStatus.COMPLETE, EMPTY_MASK
    else:
        mask = valid_actions(nxt)
        status = EpisodeStatus.IN_PROGRESS if any(mask) else EpisodeStatus.TRAPPED

    if status is EpisodeStatus.IN_PROGRESS:
        return StepResult(state=nxt, reward=0.0, status=status, valid_mask=mask)

    e = energy(placed, seq)
    return StepResult(
        state=nxt,
        reward=reward_of(status, e, config),
        status=status,
        valid_mask=mask,
        energy_if_terminal=e,
    )


def replay(seq, actions, config=None) -> StepResult:
    """Replay an action string from the fixed prefix.

    :param seq: HP sequence
    :param actions: action string or iterable of actions
    :param config: optional reward config
    :return: the result of the last step
    """
    seq = as_sequence(seq)
    if isinstance(actions, str):
        actions = Action.parse(actions)
    state = reset(seq)
    result = StepResult(state=state, reward=0.0, status=EpisodeStatus.IN_PROGRESS,
                        valid_mask=valid_actions(state))
    for action in actions:
        if result.status.terminal:
            raise InvalidActionError(f"Actions continue past a terminal state: {actions!r}")
        result = step(result.state, seq, action, config)
    return result


def coordinates_for(actions) -> List[Coord]:
    """Coordinates of the walk spelled by ``actions``, ignoring occupancy.

    :param actions: action string or iterable of actions
    :return: coordinate list including the fixed prefix
    """
    if isinstance(actions, str):
        actions = Action.parse(actions)
    placed = [(0, 0), (0, 1)]
    heading = Heading.UP
    for action in actions:
        heading = heading.turn(Action(action))
        dx, dy = heading.vector
        x, y = placed[-1]
        placed.append((x + dx, y + dy))
    return placed


def is_self_avoiding(placed: Iterable[Coord]) -> bool:
    placed = list(placed)
    if len(set(placed)) != len(placed):
        return False
    return all(
        abs(x1 - x2) + abs(y1 - y2) == 1 for (x1, y1), (x2, y2) in zip(placed, placed[1:])
    )
