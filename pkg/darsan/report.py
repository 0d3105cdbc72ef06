"""
Human-readable summaries of harness output directories.

Everything printed is recomputed from the CSV files alone.
"""

from pathlib import Path
from typing import List, Union

import pandas as pd

from .exceptions import ReportError
from .experiments import SCORE_COLUMNS, aggregate_runs, score_table, strategy_bars, strategy_columns
from .sim import POPULATION_COLUMNS, SERIES_COLUMNS

RUN_COLUMNS = ["setting", "repetition", "seed", *SCORE_COLUMNS]
MODE_COLUMNS = ["mode", "initial_score", "final_score", "initial_mean_qea", "final_mean_qea"]


def _read(path: Path, required: List[str]) -> pd.DataFrame:
    if not path.is_file():
        raise ReportError(f"Missing {path}", missing=[path.name])
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ReportError(f"{path} is empty", missing=list(required))
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ReportError(f"{path} lacks columns {missing}", missing=missing)
    if frame.empty:
        raise ReportError(f"{path} has no rows", missing=list(required))
    return frame


def load_runs(results_dir: Union[str, Path]) -> pd.DataFrame:
    """Per-run rows of a sweep or tournament"""
    return _read(Path(results_dir) / "runs.csv", RUN_COLUMNS)


def sweep_report(runs: pd.DataFrame) -> str:
    aggregate = aggregate_runs(runs)
    settings = ", ".join(f"{s:g}" for s in aggregate["setting"])
    counts = sorted(set(int(n) for n in aggregate["n"]))
    lines = [
        f"Settings: {settings}",
        f"Repetitions per setting: {', '.join(str(n) for n in counts)}",
        "",
        "Mean combined score",
        score_table(aggregate).to_string(float_format=lambda v: f"{v:.4f}"),
    ]
    present = [c for c in strategy_columns(runs) if runs[c].notna().any()]
    if present:
        bars = strategy_bars(aggregate)
        names = [c[len("mean_expertise_"):] for c in present]
        columns = ["setting", *names, "best_selfish", "best_selfish_mean"]
        lines += [
            "",
            "Mean final expertise of initial experts by strategy",
            bars[[c for c in columns if c in bars.columns]].to_string(
                index=False, float_format=lambda v: f"{v:.2f}"
            ),
        ]
    return "\n".join(lines)


def modes_report(path: Path) -> str:
    frame = _read(path, MODE_COLUMNS)
    return "\n".join(
        [
            "Convergence modes",
            frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"),
        ]
    )


def single_run_report(results_dir: Path, prefix: str = "") -> str:
    population = _read(results_dir / f"{prefix}population.csv", POPULATION_COLUMNS)
    series = _read(results_dir / f"{prefix}series.csv", SERIES_COLUMNS)
    initial = population[population["initial_expert"]]
    k = len(initial)
    final = population.nlargest(k, "final_expertise") if k else population.iloc[0:0]
    lines = [
        f"Reviewers: {len(population)}, rounds: {len(series)}",
        f"Initial experts mean qea {initial['qea'].mean():.4f}, pdpa {initial['pdpa'].mean():.4f}",
        f"Top-{k} by final expertise mean qea {final['qea'].mean():.4f}, "
        f"pdpa {final['pdpa'].mean():.4f}",
        f"Prediction expertise paid: {series['pool_paid'].sum():.2f}",
        f"Endorsement expertise paid: {series['endorsement_total'].sum():.2f}",
    ]
    return "\n".join(lines)


def report(results_dir: Union[str, Path]) -> str:
    """
    Summarize whatever harness outputs the directory holds.

    Raises:
        ReportError: If the directory holds no recognizable outputs or a
            file is partial
    """
    target = Path(results_dir)
    if not target.is_dir():
        raise ReportError(f"Results directory not found: {target}", missing=[str(target)])
    sections: List[str] = []
    if (target / "runs.csv").is_file():
        sections.append(sweep_report(load_runs(target)))
    if (target / "modes.csv").is_file():
        sections.append(modes_report(target / "modes.csv"))
    if (target / "population.csv").is_file() or (target / "series.csv").is_file():
        sections.append(single_run_report(target))
    if not sections:
        raise ReportError(
            f"No harness outputs in {target}: expected runs.csv, modes.csv "
            f"or population.csv with series.csv",
            missing=["runs.csv", "modes.csv", "population.csv", "series.csv"],
        )
    return "\n\n".join(sections)


def table_from_dir(results_dir: Union[str, Path]) -> pd.DataFrame:
    """The score table recomputed from runs.csv"""
    return score_table(aggregate_runs(load_runs(results_dir)))
