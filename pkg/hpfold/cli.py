"""Command-line interface for hpfold."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from hpfold.config import MODES, OracleConfig, RunConfig, load_config_file
from hpfold.core import benchmark, database, enumerator
from hpfold.core.lattice import as_sequence
from hpfold.core.trial import TrialRunner
from hpfold.errors import ConfigError, FeasibilityError, SequenceError
from hpfold.utils.io import read_csv, write_csv, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

ARCH_CHOICES = ("auto", "lstm", "lstm2x256", "lstm3x512", "fcn")


def _add_trial_flags(parser: argparse.ArgumentParser, mode_flag: bool = True) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--seq", type=str, default=None, help="Raw H/P sequence")
    source.add_argument("--benchmark-id", type=str, default=None, help="Benchmark entry id, e.g. 20mer-A")
    parser.add_argument(
        "--episodes", type=int, default=None, help="Episodes (default: the entry's episode count or 1000)"
    )
    parser.add_argument("--seed", type=int, default=None, help="Trial seed (default: 0)")
    if mode_flag:
        parser.add_argument("--mode", choices=MODES, default=None, help="drl (default) or rand")
    parser.add_argument("--arch", choices=ARCH_CHOICES, default=None, help="Q-network (default: auto by N)")
    parser.add_argument(
        "--prune-heuristics", action="store_true", help="Mask long forward runs and stop futile episodes"
    )
    parser.add_argument(
        "--reward-trapped", action="store_true", help="Pay |E| of the partial chain when trapped"
    )
    parser.add_argument("--checkpoint-every", type=int, default=None, help="Checkpoint interval in episodes")
    parser.add_argument("--dtype", choices=("float32", "float64"), default=None, help="Network precision")
    parser.add_argument("--resume", type=Path, default=None, help="Continue from a checkpoint (.npz)")
    parser.add_argument("-o", "--out", type=Path, default=None, help="Output root (default: $HPFOLD_OUTPUT or ./runs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpfold",
        description="hpfold: fold HP-model sequences on the square lattice with deep Q-learning",
    )
    parser.add_argument("-c", "--config", type=Path, default=None, help="JSON run configuration")
    parser.add_argument("-w", "--workers", type=int, default=None, help="Worker processes (default: 1)")
    parser.add_argument(
        "--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="Logging level"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Run one DQN (or RAND) trial")
    _add_trial_flags(train)

    baseline = sub.add_parser("baseline", help="Run one random-search trial")
    _add_trial_flags(baseline, mode_flag=False)

    enum = sub.add_parser("enumerate", help="Exhaustive enumeration for small N")
    target = enum.add_mutually_exclusive_group()
    target.add_argument("--seq", type=str, default=None, help="H/P sequence")
    target.add_argument("--n", type=int, default=None, help="Chain length (all-P sequence)")
    enum.add_argument("--verify-counts", action="store_true", help="Check the known complete-walk counts")
    enum.add_argument("--include-24", action="store_true", help="Also run the N=24 census (hours)")
    enum.add_argument("--landscape", type=Path, default=None, help="Write every walk and its score as JSON lines")
    enum.add_argument("--collect-optimal", action="store_true", help="List optimal action strings")
    enum.add_argument("--cap", type=int, default=None, help="Most optimal strings to list")
    enum.add_argument("--allow-large", action="store_true", help="Lift the N bound")
    enum.add_argument("--split-depth", type=int, default=None, help="Prefix depth for parallel subtrees")

    bench = sub.add_parser("bench", help="Run the benchmark suite")
    bench.add_argument("--entries", nargs="+", default=None, help="Entry ids (default: all)")
    bench.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES), help="Modes to run")
    bench.add_argument("--seeds", nargs="+", type=int, default=None, help="Seeds (default: 0 1 2 3)")
    bench.add_argument("--episodes-override", type=int, default=None, help="Episodes for every entry")
    bench.add_argument("--arch", choices=ARCH_CHOICES, default=None, help="Q-network")
    bench.add_argument("--prune-heuristics", action="store_true", help="Enable both search heuristics")
    bench.add_argument("-o", "--out", type=Path, default=None, help="Output root")

    plot = sub.add_parser("plotdata", help="Moving-minimum curves and seed bands as CSV")
    plot.add_argument("--curves", type=Path, required=True, help="curve.csv file or directory searched for them")
    plot.add_argument("--window", type=int, default=benchmark.DEFAULT_WINDOW, help="Moving-minimum window")
    plot.add_argument("-o", "--out", type=Path, default=None, help="Output directory (default: alongside input)")

    confdb = sub.add_parser("confdb", help="Build and export the conformation database")
    confdb.add_argument("--import", dest="imports", nargs="*", type=Path, default=[], help="best.jsonl logs")
    confdb.add_argument("--load", type=Path, default=None, help="Previously exported database")
    confdb.add_argument("--export", type=Path, default=None, help="Output directory")
    confdb.add_argument("--stats", action="store_true", help="Print distinct counts as JSON")
    confdb.add_argument("--draw", action="store_true", help="Draw every conformation")
    confdb.add_argument("--format", choices=("pdf", "svg"), default="pdf", help="Drawing format")
    confdb.add_argument("--energies", nargs="+", type=int, default=None, help="Only keep these energies")
    confdb.add_argument(
        "--best-known",
        type=int,
        default=None,
        help="Best-known energy for the stats buckets (default: the benchmark value, else the lowest stored)",
    )
    return parser


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < --config file < flags."""
    run = load_config_file(args.config) if args.config else RunConfig()
    trainer = run.trainer
    flags = {
        "episodes": getattr(args, "episodes", None),
        "seed": getattr(args, "seed", None),
        "mode": getattr(args, "mode", None),
        "arch": getattr(args, "arch", None),
        "checkpoint_every": getattr(args, "checkpoint_every", None),
        "dtype": getattr(args, "dtype", None),
    }
    trainer = replace(trainer, **{k: v for k, v in flags.items() if v is not None})
    if getattr(args, "prune_heuristics", False):
        trainer = replace(trainer, prune_consecutive_forward=True, prune_futile=True)
    if getattr(args, "reward_trapped", False):
        trainer = replace(trainer, reward_trapped_partial=True)
    run.trainer = trainer
    if getattr(args, "seq", None):
        run.sequence, run.benchmark_id = args.seq, None
    if getattr(args, "benchmark_id", None):
        run.benchmark_id, run.sequence = args.benchmark_id, None
    if getattr(args, "out", None) is not None:
        run.output_dir = args.out
    if args.workers is not None:
        run.workers = args.workers
    return run


def cmd_train(args: argparse.Namespace, mode: Optional[str] = None) -> int:
    run = resolve_run_config(args)
    if mode is not None:
        run.trainer = replace(run.trainer, mode=mode)
    best_known = None
    if run.benchmark_id:
        entry = benchmark.get_entry(run.benchmark_id)
        seq, sequence_id, best_known = entry.sequence, entry.id, entry.best_known_energy
        if getattr(args, "episodes", None) is None and not (args.config and _file_sets_episodes(args.config)):
            run.trainer = replace(run.trainer, episodes=entry.episodes_default)
    elif run.sequence:
        seq = as_sequence(run.sequence)
        sequence_id = seq.monomers
    else:
        raise ConfigError("Give --seq or --benchmark-id (or set one in --config)")

    runner = TrialRunner(run.trainer)
    outcome = runner.run(
        seq, run.output_dir, sequence_id, best_known, extra={"run": run.to_dict()}, resume=args.resume
    )
    result = outcome.result
    logger.info(f"✓ Best energy {result.best_energy} after {run.trainer.episodes} episodes")
    logger.info(f"✓ Artifacts: {outcome.out_dir}")
    return EXIT_OK


def _file_sets_episodes(path: Path) -> bool:
    data = json.loads(Path(path).read_text())
    return "episodes" in data.get("trainer", {})


def cmd_enumerate(args: argparse.Namespace) -> int:
    config = OracleConfig(allow_large=args.allow_large)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    if args.split_depth is not None:
        config = replace(config, split_depth=args.split_depth)

    if args.verify_counts:
        ns = [args.n] if args.n is not None else [4, 20]
        results = enumerator.verify_counts(ns, include_24=args.include_24, config=config)
        print(json.dumps({str(n): r for n, r in results.items()}, indent=2))
        return EXIT_OK if all(r["match"] for r in results.values()) else EXIT_RUNTIME

    if args.seq:
        seq = as_sequence(args.seq)
    elif args.n is not None:
        seq = as_sequence("P" * args.n)
    else:
        raise ConfigError("Give --seq or --n")

    report = enumerator.enumerate_saws(seq, collect_optimal=args.collect_optimal, cap=args.cap, config=config)
    print(json.dumps(report.to_dict(), indent=2))
    if args.landscape is not None:
        enumerator.landscape_export(seq, args.landscape, config)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    run = load_config_file(args.config) if args.config else RunConfig()
    ids = args.entries or list(benchmark.BENCHMARK)
    entries = [benchmark.get_entry(i) for i in ids]
    overrides = {}
    if args.episodes_override is not None:
        overrides["episodes"] = args.episodes_override
    if args.arch is not None:
        overrides["arch"] = args.arch
    if args.prune_heuristics:
        overrides.update(prune_consecutive_forward=True, prune_futile=True)
    out = args.out or run.output_dir
    workers = args.workers if args.workers is not None else run.workers
    seeds = args.seeds if args.seeds is not None else run.seeds

    result = benchmark.run_suite(
        entries, args.modes, seeds, overrides, out_dir=out, workers=workers, base_config=run.trainer
    )
    for row in benchmark.comparison_table(result.summaries):
        logger.info(f"{row}")
    logger.info(f"✓ Suite summary: {Path(out) / 'summary.csv'}")
    if result.failures:
        logger.warning(f"{len(result.failures)} of {len(result.summaries)} trials failed")
    return EXIT_OK


def _find_curves(path: Path) -> List[Path]:
    if path.is_file():
        return [path]
    return sorted(path.rglob("curve.csv"))


def cmd_plotdata(args: argparse.Namespace) -> int:
    curves = _find_curves(args.curves)
    if not curves:
        raise FileNotFoundError(f"No curve.csv found under {args.curves}")
    out = args.out or (args.curves if args.curves.is_dir() else args.curves.parent)

    minima = []
    for i, path in enumerate(curves):
        energies = [int(row["energy"]) for row in read_csv(path)]
        mm = benchmark.moving_minimum(energies, args.window)
        minima.append(mm)
        name = "min_curve.csv" if len(curves) == 1 else f"min_curve_{i}.csv"
        write_csv(Path(out) / name, ("episode", "energy", "moving_min"), zip(range(len(mm)), energies, mm.tolist()))
    if len(curves) > 1:
        mean, std = benchmark.aggregate_seeds(minima)
        benchmark.write_band(Path(out) / "band.csv", mean, std)
        write_json(Path(out) / "band_sources.json", [str(p) for p in curves])
    logger.info(f"✓ Plot data for {len(curves)} curve(s) in {out}")
    return EXIT_OK


def cmd_confdb(args: argparse.Namespace) -> int:
    db = database.load(args.load) if args.load else database.ConformationDatabase()
    rejected_total = []
    for log in args.imports:
        inserted, rejected = database.import_log(db, log, args.energies)
        logger.info(f"{log}: {inserted} new conformations, {len(rejected)} rejected")
        rejected_total.extend((str(log), line, reason) for line, reason in rejected)

    best_known = {}
    for seq_id in {r.sequence_id for r in db.records()}:
        if args.best_known is not None:
            best_known[seq_id] = args.best_known
        elif seq_id in benchmark.BENCHMARK:
            best_known[seq_id] = benchmark.BENCHMARK[seq_id].best_known_energy
    if args.export is not None:
        database.export(db, args.export, draw=args.draw, fmt=args.format, best_known=best_known or None)
        if rejected_total:
            write_csv(args.export / "rejected.csv", ("log", "line", "reason"), rejected_total)
    if args.stats:
        print(json.dumps(database.stats(db, best_known or None).to_dict(), indent=2))
    for log, line, reason in rejected_total:
        logger.warning(f"Rejected {log}:{line}: {reason}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "baseline": lambda args: cmd_train(args, mode="rand"),
    "enumerate": cmd_enumerate,
    "bench": cmd_bench,
    "plotdata": cmd_plotdata,
    "confdb": cmd_confdb,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s - %(levelname)s - %(message)s")

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SequenceError, FeasibilityError) as e:
        logger.error(f"{e}")
        print(f"hpfold: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

__all__ = ["main"]
