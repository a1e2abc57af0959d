"""Exhaustive enumeration of complete self-avoiding walks for small N.

The walk tree is exactly the one ``lattice.valid_actions`` defines: fixed
prefix, first non-forward move a left turn, actions tried in L, F, R order.
The tree is split at a shallow action prefix; each subtree is walked with a
flat occupancy grid and the partial counts are merged in prefix order, so
totals and the optimal-action list do not depend on the worker count.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from hpfold.config import OracleConfig
from hpfold.core import lattice
from hpfold.core.lattice import Action, WalkState, as_sequence
from hpfold.errors import FeasibilityError
from hpfold.utils.io import write_jsonl

logger = logging.getLogger(__name__)

# Complete-walk counts under the fixed prefix and first-turn-Left rule.
KNOWN_COUNTS: Dict[int, int] = {
    3: 2,
    4: 5,
    20: 41_889_578,
    24: 2_158_326_727,
}

_TURN = (1, 0, 3)  # heading offset for L, F, R
_NAMES = "LFR"


@dataclass
class EnumerationReport:
    n: int
    sequence: str
    complete_count: int = 0
    trapped_count: int = 0
    min_energy: Optional[int] = None
    degeneracy: int = 0
    optimal_actions: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)

    def merge(self, other: "EnumerationReport", cap: int) -> None:
        """Fold in the counts of a later subtree."""
        self.complete_count += other.complete_count
        self.trapped_count += other.trapped_count
        if other.min_energy is None:
            return
        if self.min_energy is None or other.min_energy < self.min_energy:
            self.min_energy = other.min_energy
            self.degeneracy = other.degeneracy
            self.optimal_actions = list(other.optimal_actions[:cap])
        elif other.min_energy == self.min_energy:
            self.degeneracy += other.degeneracy
            room = cap - len(self.optimal_actions)
            self.optimal_actions.extend(other.optimal_actions[: max(room, 0)])


class _SubtreeWalker:
    """Depth-first walk below one ``WalkState`` on a flat occupancy grid.

    Grid cells hold 0 when free, otherwise monomer index + 1.
    """

    def __init__(
        self,
        seq,
        collect_optimal: bool = False,
        cap: int = 0,
        on_complete: Optional[Callable[[Tuple[int, ...], int], None]] = None,
    ):
        self.seq = as_sequence(seq)
        n = len(self.seq)
        self.n = n
        self.width = 2 * n + 3
        self.offset = n + 1
        # index deltas for UP, LEFT, DOWN, RIGHT
        self.deltas = (1, -self.width, -1, self.width)
        self.is_h = [self.seq.is_h(i) for i in range(n)]
        self.collect = collect_optimal
        self.cap = cap
        self.on_complete = on_complete
        self.report = EnumerationReport(n=n, sequence=self.seq.monomers)
        self.path: List[int] = []

    def _site(self, c) -> int:
        x, y = c
        return (x + self.offset) * self.width + (y + self.offset)

    def run(self, state: WalkState) -> EnumerationReport:
        grid = [0] * (self.width * self.width)
        for i, c in enumerate(state.placed):
            grid[self._site(c)] = i + 1
        self.grid = grid
        self.path = [int(a) for a in state.actions]
        contacts = lattice.count_hh_contacts(state.placed, self.seq)
        if state.step_index == self.n:
            self._leaf(contacts)
        else:
            self._dfs(self._site(state.head), int(state.heading), state.first_turn_taken, state.step_index, contacts)
        return self.report

    def _leaf(self, contacts: int) -> None:
        report = self.report
        report.complete_count += 1
        e = -contacts
        if report.min_energy is None or e < report.min_energy:
            report.min_energy = e
            report.degeneracy = 1
            report.optimal_actions = [self._path_string()] if self.collect and self.cap > 0 else []
        elif e == report.min_energy:
            report.degeneracy += 1
            if self.collect and len(report.optimal_actions) < self.cap:
                report.optimal_actions.append(self._path_string())
        if self.on_complete is not None:
            self.on_complete(tuple(self.path), contacts)

    def _path_string(self) -> str:
        return "".join(_NAMES[a] for a in self.path)

    def _dfs(self, head: int, heading: int, turned: bool, k: int, contacts: int) -> None:
        # k monomers are placed; monomer k goes next
        grid, deltas, is_h, path = self.grid, self.deltas, self.is_h, self.path
        last = k + 1 == self.n
        moved = False
        for a in (0, 1, 2):
            if a == 2 and not turned:
                break
            h = (heading + _TURN[a]) & 3
            s = head + deltas[h]
            if grid[s]:
                continue
            moved = True
            c = contacts
            if is_h[k]:
                for d in deltas:
                    j = grid[s + d]
                    if j and j != k and is_h[j - 1]:
                        c += 1
            path.append(a)
            if last:
                self._leaf(c)
            else:
                grid[s] = k + 1
                self._dfs(s, h, turned or a != 1, k + 1, c)
                grid[s] = 0
            path.pop()
        if not moved:
            self.report.trapped_count += 1


def _walk_subtree(args) -> EnumerationReport:
    monomers, actions, collect, cap = args
    state = lattice.replay(monomers, actions).state if actions else lattice.reset(monomers)
    return _SubtreeWalker(monomers, collect, cap).run(state)


def _split(seq, depth: int) -> Tuple[List[str], EnumerationReport]:
    """Action prefixes of length ``depth`` (or shorter if the walk ends first).

    Walks trapped inside the split are counted into the returned report.
    Walks completed inside it come back as prefixes so they are recorded in
    order.
    """
    prefixes: List[str] = []
    trapped = EnumerationReport(n=len(seq), sequence=seq.monomers)

    def expand(state: WalkState, left: int) -> None:
        if left == 0 or state.step_index == len(seq):
            prefixes.append(state.action_string)
            return
        mask = lattice.valid_actions(state)
        if not any(mask):
            trapped.trapped_count += 1
            return
        for action in Action:
            if mask[action]:
                expand(lattice.step(state, seq, action).state, left - 1)

    expand(lattice.reset(seq), depth)
    return prefixes, trapped


def _check_feasible(n: int, config: OracleConfig) -> None:
    if n > config.max_n and not config.allow_large:
        raise FeasibilityError(
            f"Exhaustive enumeration of N={n} exceeds the configured bound N <= {config.max_n}; "
            "set allow_large to run it anyway"
        )


def enumerate_saws(
    seq,
    collect_optimal: bool = False,
    cap: Optional[int] = None,
    config: Optional[OracleConfig] = None,
) -> EnumerationReport:
    """Count every complete and trapped walk of ``seq`` and find its optimum.

    :param seq: HP sequence
    :param collect_optimal: keep optimal action strings
    :param cap: most optimal strings to keep (default ``config.optimal_cap``)
    :param config: feasibility bound, worker count and split depth
    :return: counts, minimum energy and its degeneracy
    :raises FeasibilityError: N above the bound without ``allow_large``
    """
    seq = as_sequence(seq)
    config = config or OracleConfig()
    cap = config.optimal_cap if cap is None else cap
    n = len(seq)
    _check_feasible(n, config)

    prefixes, report = _split(seq, min(config.split_depth, n - 2))
    tasks = [(seq.monomers, p, collect_optimal, cap) for p in prefixes]
    logger.info(f"Enumerating N={n} over {len(tasks)} subtrees with {config.workers} worker(s)")
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_walk_subtree, tasks, chunksize=1))
    else:
        parts = [_walk_subtree(t) for t in tasks]
    for part in parts:
        report.merge(part, cap)
    logger.info(
        f"N={n}: {report.complete_count} complete, {report.trapped_count} trapped, "
        f"min energy {report.min_energy} (degeneracy {report.degeneracy})"
    )
    return report


def count_walks(n: int, config: Optional[OracleConfig] = None) -> int:
    """Complete-walk count for length ``n``; independent of the sequence."""
    return enumerate_saws("P" * n, config=config).complete_count


def optimal_energy(seq, config: Optional[OracleConfig] = None) -> int:
    report = enumerate_saws(seq, config=config)
    return report.min_energy


def iter_walks(seq) -> Iterable[Tuple[str, List[lattice.Coord], int]]:
    """Yield (actions, coordinates, contacts) for every complete walk, in DFS order."""
    seq = as_sequence(seq)
    found: List[Tuple[Tuple[int, ...], int]] = []
    walker = _SubtreeWalker(seq, on_complete=lambda path, c: found.append((path, c)))
    walker.run(lattice.reset(seq))
    for path, contacts in found:
        actions = "".join(_NAMES[a] for a in path)
        yield actions, lattice.coordinates_for(actions), contacts


def landscape_export(seq, path: Path, config: Optional[OracleConfig] = None) -> int:
    """Write one JSON line per complete walk: actions, coords and H-H score.

    :param seq: HP sequence, N <= ``config.landscape_max_n``
    :param path: output JSON-lines file
    :param config: size bound
    :return: number of records written
    """
    seq = as_sequence(seq)
    config = config or OracleConfig()
    if len(seq) > config.landscape_max_n:
        raise FeasibilityError(
            f"Landscape export keeps every walk in memory; N={len(seq)} exceeds "
            f"landscape_max_n={config.landscape_max_n}"
        )
    count = write_jsonl(
        path,
        ({"actions": a, "coords": [list(c) for c in coords], "score": s} for a, coords, s in iter_walks(seq)),
    )
    logger.info(f"Wrote {count} walks of {seq} to {path}")
    return count


def verify_counts(
    ns: Iterable[int] = (4, 20),
    include_24: bool = False,
    config: Optional[OracleConfig] = None,
) -> Dict[int, Dict]:
    """Recompute complete-walk counts and compare them with the known values.

    :param ns: lengths to check; each must have a known count
    :param include_24: also run the N=24 census (hours)
    :param config: worker settings; the size bound is lifted for N=24
    :return: {n: {"expected", "actual", "match"}}
    """
    config = config or OracleConfig()
    ns = list(ns) + ([24] if include_24 and 24 not in ns else [])
    results = {}
    for n in ns:
        if n not in KNOWN_COUNTS:
            raise FeasibilityError(f"No known complete-walk count for N={n}")
        run_config = replace(config, allow_large=True) if n == 24 else config
        actual = count_walks(n, run_config)
        expected = KNOWN_COUNTS[n]
        results[n] = {"expected": expected, "actual": actual, "match": actual == expected}
        if actual != expected:
            logger.warning(f"N={n}: counted {actual} complete walks, expected {expected}")
    return results


def sample_fraction(n: int, episodes: int, config: Optional[OracleConfig] = None) -> float:
    """Share of the complete-walk space a run of ``episodes`` episodes could visit."""
    total = KNOWN_COUNTS.get(n)
    if total is None:
        total = count_walks(n, config)
    return episodes / total
