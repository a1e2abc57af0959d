"""Deep Q-learning over the folding MDP, plus the RAND baseline.

One trainer owns the policy network, its optimiser and the replay memory.
After warm-up (memory >= batch size) it takes one gradient step per
environment step and copies the policy into the target network every
``target_sync`` gradient updates.
"""

import dataclasses
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from hpfold.config import TrainerConfig
from hpfold.core import lattice
from hpfold.core.database import ConformationDatabase, ConformationRecord
from hpfold.core.encoding import encode
from hpfold.core.environment import HPFoldingEnv
from hpfold.core.lattice import Action, EpisodeStatus, Mask, WalkState, as_sequence
from hpfold.core.network import (
    AdamState,
    Checkpoint,
    NetworkSpec,
    QNetworkParams,
    adam_step,
    backward_cached,
    clone_params,
    forward,
    forward_cached,
    huber,
    huber_grad,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from hpfold.errors import ConfigError, InvalidActionError
from hpfold.utils.io import append_jsonl, write_csv
from hpfold.utils.seeding import RngStreams

logger = logging.getLogger(__name__)

CURVE_HEADER = ("episode", "energy", "complete", "epsilon")


@dataclass(frozen=True)
class Experience:
    """One transition (s, a, r, s', terminal, mask of s')."""

    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    terminal: bool
    next_valid_mask: Mask


class ReplayMemory:
    """Bounded FIFO of experiences, sampled uniformly without replacement."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"Replay capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.buffer = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.buffer)

    def push(self, exp: Experience) -> None:
        self.buffer.append(exp)

    def sample(self, k: int, rng: np.random.Generator) -> List[Experience]:
        idx = rng.choice(len(self.buffer), size=k, replace=False)
        return [self.buffer[i] for i in idx]

    def mark_last_terminal(self) -> None:
        """Flag the newest transition as terminal (used by early stopping)."""
        if self.buffer:
            self.buffer[-1] = dataclasses.replace(self.buffer[-1], terminal=True)


def replay_capacity(episodes: int, batch_size: int = 32, replay_max: int = 50000) -> int:
    """min(replay_max, episodes / 10), never below the batch size."""
    return max(batch_size, min(replay_max, episodes // 10))


@dataclass(frozen=True)
class EpsilonSchedule:
    """eps_i = eps_min + (eps_max - eps_min) * exp(-i * decay / psi)."""

    psi: int
    eps_min: float = 0.01
    eps_max: float = 1.0
    decay: float = 5.0

    def at(self, i: int) -> float:
        if i < 0:
            raise ValueError(f"Episode index must be >= 0, got {i}")
        return self.eps_min + (self.eps_max - self.eps_min) * math.exp(-i * self.decay / self.psi)


def epsilon_at(schedule: EpsilonSchedule, i: int) -> float:
    return schedule.at(i)


def select_action(
    q: Optional[np.ndarray],
    valid_mask: Sequence[bool],
    eps: float,
    rng: np.random.Generator,
    tie_rng: Optional[np.random.Generator] = None,
) -> Action:
    """Epsilon-greedy choice among valid actions.

    One uniform draw is always taken from ``rng`` so the exploration stream
    advances identically whatever ``eps`` is.

    :param q: Q-values (L, F, R); may be None when ``eps`` is 1
    :param valid_mask: legal moves
    :param eps: exploration probability
    :param rng: exploration stream
    :param tie_rng: stream for breaking ties among greedy maxima
    :return: chosen action
    """
    valid = np.flatnonzero(np.asarray(valid_mask, dtype=bool))
    if valid.size == 0:
        raise InvalidActionError("select_action called with no valid actions; the walk is trapped")
    if rng.random() < eps:
        return Action(int(rng.choice(valid)))
    if q is None:
        raise InvalidActionError("Greedy selection needs Q-values")
    qv = np.asarray(q)[valid]
    best = valid[qv == qv.max()]
    if best.size == 1:
        return Action(int(best[0]))
    return Action(int((tie_rng or rng).choice(best)))


def _masked_max(q: np.ndarray, masks: np.ndarray) -> np.ndarray:
    return np.where(masks, q, -np.inf).max(axis=1)


def td_targets(batch: Sequence[Experience], target: QNetworkParams, gamma: float) -> np.ndarray:
    """r + gamma * max over valid a' of Q_target(s', a'), or r at terminal states.

    A non-terminal transition whose next state has no valid move is treated
    as terminal.
    """
    rewards = np.array([e.r for e in batch], dtype=np.float64)
    masks = np.array([e.next_valid_mask for e in batch], dtype=bool)
    bootstrap = np.array([not e.terminal for e in batch]) & masks.any(axis=1)
    y = rewards.copy()
    if bootstrap.any():
        idx = np.flatnonzero(bootstrap)
        q_next = np.atleast_2d(forward(target, np.stack([batch[i].s_next for i in idx])))
        y[idx] += gamma * _masked_max(q_next.astype(np.float64), masks[idx])
    return y


def td_target(exp: Experience, target: QNetworkParams, gamma: float) -> float:
    return float(td_targets([exp], target, gamma)[0])


def train_step(
    policy: QNetworkParams,
    target: QNetworkParams,
    memory: ReplayMemory,
    adam: AdamState,
    config: TrainerConfig,
    rng: np.random.Generator,
    batch: Optional[Sequence[Experience]] = None,
) -> Optional[float]:
    """One mini-batch Huber-loss update of the policy network.

    :param policy: network being trained, updated in place
    :param target: frozen network for the TD targets
    :param memory: replay memory to sample from
    :param adam: optimiser state
    :param config: batch size, gamma and clipping
    :param rng: batch-sampling stream
    :param batch: explicit batch, bypassing sampling
    :return: mean loss before the update, or None if memory is still warming up
    """
    if batch is None:
        if len(memory) < config.batch_size:
            return None
        batch = memory.sample(config.batch_size, rng)
    size = len(batch)
    rows = np.arange(size)
    actions = np.array([e.a for e in batch], dtype=int)
    y = td_targets(batch, target, config.gamma)

    q, cache = forward_cached(policy, np.stack([e.s for e in batch]))
    delta = y - q[rows, actions].astype(np.float64)
    loss = float(np.mean(huber(delta)))

    upstream = np.zeros(q.shape, dtype=np.float64)
    upstream[rows, actions] = -huber_grad(delta) / size
    grads = backward_cached(policy, cache, upstream)
    adam_step(policy, grads, adam, config.clip_norm)
    return loss


def sync_target(policy: QNetworkParams, target: Optional[QNetworkParams] = None) -> QNetworkParams:
    """Copy the policy weights into the target network."""
    if target is None:
        return clone_params(policy)
    for name, value in policy.tensors.items():
        np.copyto(target.tensors[name], value)
    return target


class TargetSync:
    """Counts gradient updates and syncs the target every ``every`` of them."""

    def __init__(self, every: int):
        self.every = every
        self.count = 0
        self.syncs = 0

    def tick(self, policy: QNetworkParams, target: QNetworkParams) -> QNetworkParams:
        self.count += 1
        if self.count >= self.every:
            self.count = 0
            self.syncs += 1
            return sync_target(policy, target)
        return target


def futile_bound(state: WalkState, seq) -> int:
    """Upper bound on contacts the unfinished chain can still gain.

    Each unplaced H may add up to 3 contacts and each placed H with a free
    neighbour site up to 2. With no H left to place nothing can be gained.
    """
    seq = as_sequence(seq)
    unplaced = sum(1 for i in range(state.step_index, len(seq)) if seq.is_h(i))
    if unplaced == 0:
        return 0
    frontier = 0
    for i, (x, y) in enumerate(state.placed):
        if seq.is_h(i) and any(
            (x + dx, y + dy) not in state.occupancy for dx, dy in lattice.NEIGHBOR_OFFSETS
        ):
            frontier += 1
    return 3 * unplaced + 2 * frontier


def _trailing_forward(actions: Sequence[Action]) -> int:
    run = 0
    for a in reversed(actions):
        if a is not Action.F:
            break
        run += 1
    return run


def pruning_heuristics(
    state: WalkState,
    seq,
    config: TrainerConfig,
    best_energy: Optional[int] = None,
    mask: Optional[Mask] = None,
) -> Tuple[Mask, bool]:
    """Apply the opt-in search heuristics.

    Heuristic 1 masks F once it would make a run of ceil((N-2)/2) forward
    moves, unless F is the only move left. Heuristic 2 asks for an early stop
    when the chain cannot beat ``best_energy`` any more.

    :param state: current walk
    :param seq: HP sequence
    :param config: heuristic flags
    :param best_energy: best complete energy so far, if any
    :param mask: mask to adjust (default: the state's valid moves)
    :return: (adjusted mask, stop flag)
    """
    seq = as_sequence(seq)
    if mask is None:
        mask = lattice.valid_actions(state)
    if config.prune_consecutive_forward and mask[Action.F]:
        limit = math.ceil((len(seq) - 2) / 2)
        if _trailing_forward(state.actions) + 1 >= limit and (mask[Action.L] or mask[Action.R]):
            mask = (mask[0], False, mask[2])

    stop = False
    if config.prune_futile and best_energy is not None and best_energy < 0:
        contacts = lattice.count_hh_contacts(state.placed, seq)
        stop = contacts + futile_bound(state, seq) <= -best_energy
    return mask, stop


@dataclass
class EpisodeRecord:
    energy: int
    complete: bool
    length: int
    transitions: int
    actions: str
    epsilon: float
    stopped_early: bool = False


def run_episode(
    env: HPFoldingEnv,
    policy: Optional[QNetworkParams],
    eps: float,
    memory: Optional[ReplayMemory],
    config: TrainerConfig,
    rng: np.random.Generator,
    tie_rng: Optional[np.random.Generator] = None,
    learner: Optional[Callable[[], None]] = None,
    best_energy: Optional[int] = None,
) -> EpisodeRecord:
    """Roll out one episode, storing every transition.

    :param env: folding environment
    :param policy: Q-network, or None for RAND
    :param eps: exploration rate (forced to 1 in RAND mode)
    :param memory: replay memory receiving transitions
    :param config: mode and heuristic flags
    :param rng: exploration stream
    :param tie_rng: greedy tie-break stream
    :param learner: called after each stored transition
    :param best_energy: best complete energy so far, for early stopping
    :return: summary of the episode
    """
    if config.mode == "rand" or policy is None:
        eps = 1.0
    obs, info = env.reset()
    mask = info["valid_mask"]
    transitions = 0
    stopped = False
    heuristics = config.prune_consecutive_forward or config.prune_futile
    while True:
        if heuristics:
            mask, stopped = pruning_heuristics(env.state, env.sequence, config, best_energy, mask)
            if stopped:
                if memory is not None and transitions:
                    memory.mark_last_terminal()
                break
        q = forward(policy, obs) if eps < 1.0 else None
        action = select_action(q, mask, eps, rng, tie_rng)
        next_obs, reward, terminated, _, info = env.step(action)
        if memory is not None:
            memory.push(Experience(obs, int(action), reward, next_obs, terminated, info["valid_mask"]))
        transitions += 1
        if learner is not None:
            learner()
        obs, mask = next_obs, info["valid_mask"]
        if terminated:
            break

    state = env.state
    complete = env.status is EpisodeStatus.COMPLETE
    return EpisodeRecord(
        energy=lattice.energy(state.placed, env.sequence),
        complete=complete,
        length=state.step_index,
        transitions=transitions,
        actions=state.action_string,
        epsilon=eps,
        stopped_early=stopped,
    )


def greedy_rollout(policy: QNetworkParams, seq) -> lattice.StepResult:
    """Fold ``seq`` following the policy's argmax (ties go to the lowest index)."""
    seq = as_sequence(seq)
    state = lattice.reset(seq)
    result = lattice.StepResult(state, 0.0, EpisodeStatus.IN_PROGRESS, lattice.valid_actions(state))
    while not result.status.terminal:
        q = forward(policy, encode(result.state, seq))
        valid = np.flatnonzero(result.valid_mask)
        action = Action(int(valid[np.argmax(q[valid])]))
        result = lattice.step(result.state, seq, action)
    return result


@dataclass
class BestConformation:
    episode: int
    energy: int
    actions: str


@dataclass
class TrainingResult:
    curve: List[Tuple[int, int, bool, float]]
    best_energy: Optional[int]
    best_conformations: List[BestConformation]
    first_best_episode: Optional[int] = None
    checkpoints: List[Path] = field(default_factory=list)
    updates: int = 0

    @property
    def complete_ratio(self) -> float:
        if not self.curve:
            return 0.0
        return sum(1 for row in self.curve if row[2]) / len(self.curve)


class DQNTrainer:
    """Runs one trial: psi episodes of DQN (or RAND) on one sequence."""

    def __init__(
        self,
        seq,
        config: TrainerConfig,
        database: Optional[ConformationDatabase] = None,
        tracked_energies: Iterable[int] = (),
        sequence_id: Optional[str] = None,
        trial_id: Optional[str] = None,
    ):
        self.seq = as_sequence(seq)
        self.config = config.validate()
        self.sequence_id = sequence_id or self.seq.monomers
        self.trial_id = trial_id or f"{config.mode}-seed{config.seed}"
        self.database = database
        self.tracked_energies = set(tracked_energies)

        self.streams = RngStreams.from_seed(config.seed)
        self.spec = NetworkSpec.from_tag(config.arch, len(self.seq))
        self.policy: Optional[QNetworkParams] = None
        self.target: Optional[QNetworkParams] = None
        self.adam: Optional[AdamState] = None
        if config.mode == "drl":
            self.policy = init_params(self.spec, self.streams.init, np.dtype(config.dtype))
            self.target = clone_params(self.policy)
            self.adam = AdamState.for_params(
                self.policy,
                lr=config.learning_rate,
                beta1=config.adam_beta1,
                beta2=config.adam_beta2,
                eps=config.adam_eps,
            )
            logger.info(f"Q-network {self.spec.tag}: {self.policy.parameter_count} parameters")

        self.memory = ReplayMemory(config.replay_capacity)
        self.schedule = EpsilonSchedule(
            psi=config.episodes, eps_min=config.eps_min, eps_max=config.eps_max, decay=config.eps_decay
        )
        self.sync = TargetSync(config.target_sync)
        self.env = HPFoldingEnv(self.seq, config)

        self.updates = 0
        self.last_loss: Optional[float] = None
        self.best_energy: Optional[int] = None
        self.first_best_episode: Optional[int] = None
        self.best: List[BestConformation] = []
        self._best_keys = set()
        self.curve: List[Tuple[int, int, bool, float]] = []
        self.checkpoints: List[Path] = []
        self.start_episode = 0

    def resume(self, path: Path) -> int:
        """Continue from a checkpoint written by ``save``.

        Network, optimiser, RNG streams and counters are restored. Replay
        memory is not checkpointed, so it refills from empty, and the target
        network restarts as a copy of the policy.

        :param path: checkpoint file
        :return: the episode training continues from
        """
        if self.policy is None:
            raise ConfigError("Only drl trials can resume from a checkpoint")
        ckpt = load_checkpoint(path)
        if ckpt.params.spec != self.spec:
            got, want = ckpt.params.spec, self.spec
            raise ConfigError(f"Checkpoint {path} holds {got.tag} for N={got.n}, expected {want.tag} for N={want.n}")
        if ckpt.adam is None:
            raise ConfigError(f"Checkpoint {path} has no optimiser state")
        counters = ckpt.counters
        self.policy = ckpt.params
        self.target = clone_params(self.policy)
        self.adam = ckpt.adam
        self.streams.restore(ckpt.rng_state)
        self.updates = counters.get("updates", 0)
        self.sync.syncs = counters.get("syncs", 0)
        self.sync.count = counters.get("sync_count", 0)
        self.best_energy = counters.get("best_energy")
        self.first_best_episode = counters.get("first_best_episode")
        self.best = [BestConformation(ep, self.best_energy, actions) for ep, actions in counters.get("best", [])]
        self._best_keys = {b.actions for b in self.best}
        self.start_episode = counters.get("episode", 0)
        logger.info(f"Resumed {self.trial_id} from {path} at episode {self.start_episode}")
        return self.start_episode

    def learn(self) -> None:
        """One gradient step once the memory holds a full batch."""
        if self.policy is None:
            return
        loss = train_step(
            self.policy, self.target, self.memory, self.adam, self.config, self.streams.batch
        )
        if loss is None:
            return
        self.last_loss = loss
        self.updates += 1
        self.target = self.sync.tick(self.policy, self.target)

    def run(self, out_dir: Optional[Path] = None) -> TrainingResult:
        """Train up to ``config.episodes`` episodes.

        After ``resume`` the curve holds only the episodes run here.

        :param out_dir: where to write curve.csv, best.jsonl and checkpoints
        :return: learning curve, best energy and best conformations
        """
        cfg = self.config
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            if self.start_episode == 0:
                (out_dir / "best.jsonl").unlink(missing_ok=True)
        logger.info(f"Training {self.trial_id} on {self.sequence_id} (N={len(self.seq)}) for {cfg.episodes} episodes")

        for i in range(self.start_episode, cfg.episodes):
            eps = 1.0 if cfg.mode == "rand" else self.schedule.at(i)
            record = run_episode(
                self.env,
                self.policy,
                eps,
                self.memory,
                cfg,
                self.streams.explore,
                tie_rng=self.streams.tie,
                learner=self.learn,
                best_energy=self.best_energy,
            )
            self._record(i, record, out_dir)

            if self._checkpoint_due(i + 1, out_dir):
                self.save(out_dir / "checkpoints" / f"ckpt-{i + 1:07d}.npz", i + 1)
            if cfg.log_every and (i + 1) % cfg.log_every == 0:
                self._log_progress(i, eps)

        if out_dir is not None:
            write_csv(out_dir / "curve.csv", CURVE_HEADER, self.curve)
            if self.policy is not None:
                self.save(out_dir / "checkpoints" / "final.npz", cfg.episodes)

        logger.info(f"Finished {self.trial_id}: best energy {self.best_energy}, {self.updates} updates")
        return TrainingResult(
            curve=self.curve,
            best_energy=self.best_energy,
            best_conformations=self.best,
            first_best_episode=self.first_best_episode,
            checkpoints=self.checkpoints,
            updates=self.updates,
        )

    def _record(self, i: int, record: EpisodeRecord, out_dir: Optional[Path]) -> None:
        energy = record.energy if record.complete else 0
        self.curve.append((i, energy, record.complete, record.epsilon))
        if not record.complete:
            return

        if self.database is not None and record.energy in self.tracked_energies:
            self.database.add(
                ConformationRecord(
                    sequence_id=self.sequence_id,
                    sequence=self.seq.monomers,
                    actions=record.actions,
                    energy=record.energy,
                    first_seen_episode=i,
                    trial_id=self.trial_id,
                )
            )

        if self.best_energy is None or record.energy < self.best_energy:
            self.best_energy = record.energy
            self.first_best_episode = i
            self._best_keys = set()
            self.best = []
            logger.info(f"Episode {i}: new best energy {record.energy} ({record.actions})")
        elif record.energy > self.best_energy or record.actions in self._best_keys:
            return
        self._best_keys.add(record.actions)
        best = BestConformation(episode=i, energy=record.energy, actions=record.actions)
        self.best.append(best)
        if out_dir is not None:
            append_jsonl(
                out_dir / "best.jsonl",
                {
                    "episode": i,
                    "energy": record.energy,
                    "actions": record.actions,
                    "sequence": self.seq.monomers,
                    "sequence_id": self.sequence_id,
                    "trial": self.trial_id,
                },
            )

    def _checkpoint_due(self, episode: int, out_dir: Optional[Path]) -> bool:
        every = self.config.checkpoint_every
        return out_dir is not None and self.policy is not None and every > 0 and episode % every == 0

    def _log_progress(self, i: int, eps: float) -> None:
        msg = f"Episode {i + 1}/{self.config.episodes}: eps={eps:.4f} best={self.best_energy}"
        if self.policy is not None:
            greedy = greedy_rollout(self.policy, self.seq)
            greedy_energy = greedy.energy_if_terminal if greedy.status is EpisodeStatus.COMPLETE else None
            msg += f" greedy={greedy_energy} updates={self.updates} loss={self.last_loss}"
        logger.info(msg)

    def save(self, path: Path, episode: int) -> Path:
        """Checkpoint network, optimiser, RNG streams and counters."""
        counters = {
            "episode": episode,
            "updates": self.updates,
            "syncs": self.sync.syncs,
            "sync_count": self.sync.count,
            "best_energy": self.best_energy,
            "first_best_episode": self.first_best_episode,
            "best": [[b.episode, b.actions] for b in self.best],
            "mode": self.config.mode,
        }
        ckpt = Checkpoint(params=self.policy, adam=self.adam, rng_state=self.streams.state(), counters=counters)
        save_checkpoint(path, ckpt)
        self.checkpoints.append(Path(path))
        return Path(path)


def train(
    seq,
    config: TrainerConfig,
    out_dir: Optional[Path] = None,
    database: Optional[ConformationDatabase] = None,
    tracked_energies: Iterable[int] = (),
    sequence_id: Optional[str] = None,
    trial_id: Optional[str] = None,
    resume: Optional[Path] = None,
) -> TrainingResult:
    """Run one trial; see ``DQNTrainer``. ``resume`` continues from a checkpoint."""
    trainer = DQNTrainer(seq, config, database, tracked_energies, sequence_id, trial_id)
    if resume is not None:
        trainer.resume(resume)
    return trainer.run(out_dir)
