"""
Command-line entry point.

Commands: run, sweep-qea, tournament, modes, verify-log and report. Exit
status is 0 on success, 1 on configuration or argument errors and 2 on
any other failure (including a log that fails verification).
"""

import argparse
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from . import __version__
from .config import config as settings
from .configfile import RunConfig, apply_overrides, build_run_config, dump_config, load_config
from .eventlog import verify_log_file
from .exceptions import ArgumentError, ConfigError, DarsanError
from .experiments import (
    DEFAULT_REPETITIONS,
    DEFAULT_TOURNAMENT_REPETITIONS,
    SWEEP_QEA_PROFILE,
    export_modes,
    modes_frame,
    run_convergence_modes,
    run_min_qea_sweep,
    run_strategy_tournament,
)
from .logger import get_logger, set_level
from .report import report
from .sim import run_simulation

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

MANIFEST_NAME = "manifest.json"
CONFIG_NAME = "config.cfg"


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad arguments"""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ArgumentError(f"{self.prog}: {message}")


def _add_run_flags(parser: argparse.ArgumentParser, repetitions: bool = False) -> None:
    parser.add_argument("--config", help="Config file (.cfg)")
    parser.add_argument("--seed", type=int, help="Base seed (unsigned 64-bit)")
    parser.add_argument("--out", help=f"Output directory (default: {settings.OUTPUT_DIR})")
    parser.add_argument("--slope", help="Slope in (-inf, 0] or 'neg-inf'")
    parser.add_argument("--rounds", type=int, help="Admitted rounds per simulation")
    if repetitions:
        parser.add_argument("--repetitions", type=int, help="Repetitions per grid setting")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")


def build_parser() -> CliParser:
    parser = CliParser(prog="darsan", description="Decentralized review protocol simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="command", parser_class=CliParser)
    commands.required = True

    run = commands.add_parser("run", help="Run one simulation")
    _add_run_flags(run)

    sweep = commands.add_parser("sweep-qea", help="Sweep the minimum QEA of the initial experts")
    _add_run_flags(sweep, repetitions=True)

    tournament = commands.add_parser("tournament", help="Honest versus selfish strategy tournament")
    _add_run_flags(tournament, repetitions=True)

    modes = commands.add_parser("modes", help="Endorsement-only, prediction-only and combined runs")
    _add_run_flags(modes)

    verify = commands.add_parser("verify-log", help="Verify an exported event log")
    verify.add_argument("path", help="Event log file (.jsonl)")
    verify.add_argument("--quiet", action="store_true")

    summary = commands.add_parser("report", help="Summarize a results directory")
    summary.add_argument("results_dir", help="Directory written by another command")
    summary.add_argument("--quiet", action="store_true")
    return parser


def resolve_config(
    args: argparse.Namespace, defaults: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """Defaults, then the config file, then flags"""
    if args.config:
        run_config = load_config(args.config, defaults)
    else:
        run_config = build_run_config({}, defaults)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError(f"--seed {args.seed} is not an unsigned 64-bit integer")
    if args.rounds is not None and args.rounds < 0:
        raise ConfigError(f"--rounds {args.rounds} must not be negative")
    return apply_overrides(
        run_config,
        seed=args.seed,
        slope=args.slope,
        rounds=args.rounds,
        repetitions=getattr(args, "repetitions", None),
    )


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_dir: Path, command: str, run_config: RunConfig) -> Path:
    """Record the resolved config and a checksum of every artifact"""
    config_text = dump_config(run_config)
    (out_dir / CONFIG_NAME).write_text(config_text, encoding="utf-8")
    artifacts = {
        str(path.relative_to(out_dir)): sha256_file(path)
        for path in sorted(out_dir.rglob("*"))
        if path.is_file() and path.name != MANIFEST_NAME
    }
    manifest = {
        "command": command,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "config": config_text,
        "artifacts": artifacts,
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Manifest written: {path} ({len(artifacts)} artifacts)")
    return path


def _out_dir(args: argparse.Namespace) -> Path:
    target = Path(args.out or settings.OUTPUT_DIR)
    target.mkdir(parents=True, exist_ok=True)
    return target


def cmd_run(args: argparse.Namespace) -> int:
    run_config = resolve_config(args)
    out = _out_dir(args)
    result = run_simulation(run_config.simulation, progress=not args.quiet)
    result.export(out)
    result.scatter_frame().to_csv(out / "scatter.csv", index=False)
    write_manifest(out, "run", run_config)
    frame = result.population_frame()
    initial = frame[frame["initial_expert"]]
    final = frame.loc[result.final_experts]
    print(f"Rounds: {len(result.series)}  reviewers: {len(result.population)}")
    for label, group in (("Initial experts:", initial), ("Final experts:  ", final)):
        print(f"{label} mean qea {group['qea'].mean():.4f}, pdpa {group['pdpa'].mean():.4f}")
    print(f"Log head: {result.log_digest}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    run_config = resolve_config(args, SWEEP_QEA_PROFILE)
    out = _out_dir(args)
    sweep = run_min_qea_sweep(
        run_config.simulation,
        grid=run_config.qea_grid,
        repetitions=run_config.repetitions or DEFAULT_REPETITIONS,
        workers=run_config.workers or None,
        progress=not args.quiet,
    )
    sweep.export(out)
    write_manifest(out, "sweep-qea", run_config)
    print(report(out))
    return EXIT_OK


def cmd_tournament(args: argparse.Namespace) -> int:
    run_config = resolve_config(args)
    out = _out_dir(args)
    sweep = run_strategy_tournament(
        run_config.simulation,
        fractions=run_config.honest_fractions,
        selfish=run_config.selfish_strategies,
        repetitions=run_config.repetitions or DEFAULT_TOURNAMENT_REPETITIONS,
        non_expert_strategy=run_config.simulation.non_expert_strategy,
        workers=run_config.workers or None,
        progress=not args.quiet,
    )
    sweep.export(out)
    write_manifest(out, "tournament", run_config)
    print(report(out))
    return EXIT_OK


def cmd_modes(args: argparse.Namespace) -> int:
    run_config = resolve_config(args)
    out = _out_dir(args)
    results = run_convergence_modes(run_config.simulation, progress=not args.quiet)
    export_modes(results, out)
    write_manifest(out, "modes", run_config)
    print(modes_frame(results).to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    return EXIT_OK


def cmd_verify_log(args: argparse.Namespace) -> int:
    path = Path(args.path)
    if not path.is_file():
        raise ArgumentError(f"Log file not found: {path}")
    verification = verify_log_file(path)
    if not verification:
        print(f"FAILED: first bad event at index {verification.index}: {verification.reason}")
        return EXIT_RUNTIME
    lines = path.read_bytes().count(b"\n")
    print(f"OK: {lines} events verified")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    print(report(args.results_dir))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "run": cmd_run,
    "sweep-qea": cmd_sweep,
    "tournament": cmd_tournament,
    "modes": cmd_modes,
    "verify-log": cmd_verify_log,
    "report": cmd_report,
}


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the command and return the exit status"""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except ArgumentError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)

    if args.quiet:
        set_level("WARNING")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ArgumentError) as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except DarsanError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME


def main(argv: Optional[List[str]] = None) -> None:
    raise SystemExit(parse_and_dispatch(argv))
