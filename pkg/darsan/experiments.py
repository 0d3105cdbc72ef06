"""
Experiment families over the simulator: convergence of single channels,
sweeps over the minimum QEA of the initial experts, and tournaments between
honest and selfish endorsement strategies.

Every repetition gets its own seed derived from the base seed, the
experiment name and the grid and repetition indices, so a sweep gives the
same report whether its runs execute sequentially or in a process pool.
"""

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.stats import spearmanr
from tqdm import tqdm

from .agents import SELFISH_STRATEGIES, Population, ReviewerProfile, Strategy
from .config import config as settings
from .core import ReviewerId
from .exceptions import ArgumentError, ConfigError
from .logger import get_logger
from .sim import SimConfig, SimulationResult, initial_population, run_simulation
from .validators import parse_slope, validate_unit_interval

logger = get_logger(__name__)

DEFAULT_QEA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
DEFAULT_FRACTION_GRID = DEFAULT_QEA_GRID
DEFAULT_REPETITIONS = 10
DEFAULT_TOURNAMENT_REPETITIONS = 5

# Population for sweep-qea runs: wide enough that 50 reviewers clear a minimum QEA of 0.9
SWEEP_QEA_PROFILE = {"n_reviewers": 1000, "trait_std": 0.5}

SCORE_COLUMNS = ("initial_score", "ideal_score", "actual_score")
TABLE_ROWS = {
    "initial_score": "Initial expert set",
    "ideal_score": "Ideal final expert set",
    "actual_score": "Actual final expert set",
}

MODES = (
    ("endorsement", 0.0, False),
    ("prediction", -math.inf, False),
    ("both", -1.0, True),
)


def slope_weights(slope: Union[float, str]) -> Tuple[float, float]:
    """
    Channel weights for a slope in (-inf, 0].

    Returns:
        (w_endorse, w_predict); slope 0 gives (1, 0) and -inf gives (0, 1)

    Raises:
        ArgumentError: If the slope is positive
    """
    value = parse_slope(slope)
    if math.isinf(value):
        return 0.0, 1.0
    magnitude = abs(value)
    return 1.0 / (1.0 + magnitude), magnitude / (1.0 + magnitude)


def combined_score(profiles: Iterable[ReviewerProfile]) -> float:
    """Mean of (qea + pdpa) / 2 over a nonempty set of reviewers"""
    values = [p.combined for p in profiles]
    if not values:
        raise ArgumentError("Combined score of an empty set is undefined")
    return float(np.mean(values))


def ideal_expert_set(
    population: Population, k: int, weights: Tuple[float, float]
) -> List[ReviewerId]:
    """Top-k reviewers by w_endorse * qea + w_predict * pdpa, ties by ascending id"""
    if k < 1 or k > len(population):
        raise ArgumentError(f"Cannot pick {k} reviewers from a population of {len(population)}")
    w_endorse, w_predict = weights
    scores = w_endorse * population.qea + w_predict * population.pdpa
    ids = np.arange(len(population))
    order = np.lexsort((ids, -scores))
    return sorted(int(i) for i in order[:k])


def derive_seed(base_seed: int, experiment: str, grid_index: int, repetition: int) -> int:
    """64-bit child seed from a digest of the run coordinates"""
    digest = hashlib.sha256(f"{base_seed}:{experiment}:{grid_index}:{repetition}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RunSummary(BaseModel):
    """Scores of one repetition at one grid setting"""

    model_config = ConfigDict(frozen=True)

    setting: float
    repetition: int
    seed: int
    initial_score: float
    ideal_score: float
    actual_score: float
    strategy_means: Dict[Strategy, float] = Field(default_factory=dict)

    def as_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {
            "setting": self.setting,
            "repetition": self.repetition,
            "seed": self.seed,
            "initial_score": self.initial_score,
            "ideal_score": self.ideal_score,
            "actual_score": self.actual_score,
        }
        for strategy in Strategy:
            row[f"mean_expertise_{strategy.value}"] = self.strategy_means.get(strategy, math.nan)
        return row


def summarize(result: SimulationResult, setting: float, repetition: int) -> RunSummary:
    """Initial, ideal and actual combined scores plus per-strategy expertise"""
    population = result.population
    params = result.config.engine_params()
    ideal = ideal_expert_set(
        population, result.config.k_experts, (params.w_endorse, params.w_predict)
    )
    return RunSummary(
        setting=setting,
        repetition=repetition,
        seed=result.config.seed,
        initial_score=combined_score(population[i] for i in result.initial_experts),
        ideal_score=combined_score(population[i] for i in ideal),
        actual_score=combined_score(population[i] for i in result.final_experts),
        strategy_means=result.strategy_means(),
    )


class SweepTask(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: SimConfig
    setting: float
    repetition: int


def run_task(task: SweepTask) -> RunSummary:
    """Run and score one repetition; module level so worker processes can import it"""
    result = run_simulation(task.config, keep_log=False)
    return summarize(result, task.setting, task.repetition)


def execute(
    tasks: Sequence[SweepTask],
    workers: Optional[int] = None,
    progress: bool = False,
    desc: str = "Runs",
    runner: Callable[[SweepTask], RunSummary] = run_task,
) -> List[RunSummary]:
    """Run tasks sequentially or in a process pool; results keep task order"""
    workers = settings.worker_count(workers or 0)
    bar = tqdm(total=len(tasks), desc=desc, disable=not progress)
    results: List[RunSummary] = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for summary in pool.map(runner, tasks):
                results.append(summary)
                bar.update(1)
    else:
        for task in tasks:
            results.append(runner(task))
            bar.update(1)
    bar.close()
    return results


class SweepReport(BaseModel):
    """Per-run rows of a sweep and their per-setting aggregates"""

    experiment: str
    parameter: str
    repetitions: int
    rows: List[RunSummary]

    def runs_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.as_row() for r in self.rows])

    def aggregate(self) -> pd.DataFrame:
        """Mean, sample std and count of every score per setting"""
        return aggregate_runs(self.runs_frame())

    def table(self) -> pd.DataFrame:
        return score_table(self.aggregate())

    def strategy_bars(self) -> pd.DataFrame:
        return strategy_bars(self.aggregate())

    def initial_trend(self) -> float:
        """Spearman correlation between the setting and the mean initial score"""
        return score_trend(self.aggregate(), "initial_score")

    def export(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """Write per-run rows, aggregates, the score table and, for tournaments, bar data"""
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        paths = {
            "runs": target / "runs.csv",
            "aggregate": target / "aggregate.csv",
            "table": target / "table.csv",
        }
        self.runs_frame().to_csv(paths["runs"], index=False)
        aggregate = self.aggregate()
        aggregate.to_csv(paths["aggregate"], index=False)
        score_table(aggregate).to_csv(paths["table"])
        if self.parameter == "honest_fraction":
            paths["bars"] = target / "bars.csv"
            strategy_bars(aggregate).to_csv(paths["bars"], index=False)
        logger.info(f"Sweep {self.experiment} written to {target}")
        return paths


def strategy_columns(frame: pd.DataFrame) -> List[str]:
    return [c for c in frame.columns if c.startswith("mean_expertise_")]


def aggregate_runs(runs: pd.DataFrame) -> pd.DataFrame:
    """
    Fold per-run rows into one row per setting.

    Columns: setting, n, then ``<score>_mean`` and ``<score>_std`` for every
    score and every per-strategy expertise column. Means over strategy
    columns skip runs where the strategy was absent.
    """
    value_columns = list(SCORE_COLUMNS) + strategy_columns(runs)
    grouped = runs.groupby("setting", sort=True)
    frame = pd.DataFrame({"setting": sorted(runs["setting"].unique())})
    frame["n"] = grouped.size().to_numpy()
    for column in value_columns:
        frame[f"{column}_mean"] = grouped[column].mean().to_numpy()
        frame[f"{column}_std"] = grouped[column].std(ddof=1).to_numpy()
    return frame


def score_table(aggregate: pd.DataFrame) -> pd.DataFrame:
    """Three score rows by one column per setting"""
    table = pd.DataFrame(
        [aggregate[f"{column}_mean"].to_numpy() for column in SCORE_COLUMNS],
        index=[TABLE_ROWS[c] for c in SCORE_COLUMNS],
        columns=[f"{s:g}" for s in aggregate["setting"]],
    )
    table.index.name = "expert_set"
    return table


def strategy_bars(aggregate: pd.DataFrame) -> pd.DataFrame:
    """Honest mean, every selfish mean and the best selfish strategy per setting"""
    rows = []
    for _, record in aggregate.iterrows():
        row: Dict[str, object] = {"setting": record["setting"]}
        for strategy in Strategy:
            row[strategy.value] = record.get(f"mean_expertise_{strategy.value}_mean", math.nan)
        selfish = {
            s.value: row[s.value]
            for s in SELFISH_STRATEGIES
            if not pd.isna(row[s.value])
        }
        if selfish:
            best = max(sorted(selfish), key=lambda name: selfish[name])
            row["best_selfish"] = best
            row["best_selfish_mean"] = selfish[best]
        else:
            row["best_selfish"] = ""
            row["best_selfish_mean"] = math.nan
        rows.append(row)
    return pd.DataFrame(rows)


def score_trend(aggregate: pd.DataFrame, column: str) -> float:
    """Spearman rank correlation of a mean score against the setting"""
    if len(aggregate) < 2:
        return math.nan
    rho, _ = spearmanr(aggregate["setting"], aggregate[f"{column}_mean"])
    return float(rho)


def _checked_grid(grid: Iterable[float], name: str) -> List[float]:
    values = [validate_unit_interval(v, name) for v in grid]
    if not values:
        raise ArgumentError(f"Empty {name} grid")
    if len(set(values)) != len(values):
        raise ArgumentError(f"Duplicate values in {name} grid")
    return values


def check_eligibility(tasks: Sequence[SweepTask]) -> None:
    """
    Fail before any run starts if some setting leaves fewer than
    ``k_experts`` reviewers eligible as initial experts.

    Raises:
        ConfigError: Naming every infeasible setting
    """
    infeasible = sorted(
        {
            task.setting
            for task in tasks
            if np.count_nonzero(
                initial_population(task.config).qea >= task.config.min_initial_qea
            )
            < task.config.k_experts
        }
    )
    if infeasible:
        settings_text = ", ".join(f"{s:g}" for s in infeasible)
        raise ConfigError(
            f"Too few reviewers meet min_qea {settings_text} for "
            f"{tasks[0].config.k_experts} initial experts; lower the grid or widen trait_std"
        )


def run_min_qea_sweep(
    base: SimConfig,
    grid: Sequence[float] = DEFAULT_QEA_GRID,
    repetitions: int = DEFAULT_REPETITIONS,
    workers: Optional[int] = None,
    progress: bool = False,
) -> SweepReport:
    """Vary the minimum QEA of the initial experts and score the expert sets"""
    if repetitions < 1:
        raise ArgumentError(f"Invalid repetition count: {repetitions}")
    values = _checked_grid(grid, "min_qea")
    tasks = [
        SweepTask(
            config=base.with_updates(
                min_initial_qea=value, seed=derive_seed(base.seed, "sweep-qea", g, r)
            ),
            setting=value,
            repetition=r,
        )
        for g, value in enumerate(values)
        for r in range(repetitions)
    ]
    check_eligibility(tasks)
    logger.info(f"Min-QEA sweep: {len(values)} settings x {repetitions} repetitions")
    rows = execute(tasks, workers, progress, desc="sweep-qea")
    return SweepReport(
        experiment="sweep-qea", parameter="min_qea", repetitions=repetitions, rows=rows
    )


def honest_seats(fraction: float, k: int) -> int:
    """Honest initial experts for a fraction, rounding half up"""
    return int(math.floor(fraction * k + 0.5))


def tournament_mix(
    fraction: float, k: int, selfish: Sequence[Strategy] = SELFISH_STRATEGIES
) -> Dict[Strategy, float]:
    """
    Strategy mix of the initial experts for one honest fraction.

    The selfish seats are split evenly; leftover seats go one each to the
    selfish strategies in the order given.
    """
    if not 0.0 < fraction < 1.0:
        raise ArgumentError(f"Honest fraction {fraction} must lie strictly between 0 and 1")
    if not selfish or any(s not in SELFISH_STRATEGIES for s in selfish):
        raise ArgumentError(f"Invalid selfish strategies: {list(selfish)}")
    if len(set(selfish)) != len(selfish):
        raise ArgumentError("Selfish strategies must not repeat")
    honest = honest_seats(fraction, k)
    remaining = k - honest
    share, extra = divmod(remaining, len(selfish))
    counts = {Strategy.HONEST: honest}
    for index, strategy in enumerate(selfish):
        counts[strategy] = share + (1 if index < extra else 0)
    return {s: n / k for s, n in counts.items() if n > 0}


def run_strategy_tournament(
    base: SimConfig,
    fractions: Sequence[float] = DEFAULT_FRACTION_GRID,
    selfish: Sequence[Strategy] = SELFISH_STRATEGIES,
    repetitions: int = DEFAULT_TOURNAMENT_REPETITIONS,
    non_expert_strategy: Strategy = Strategy.HONEST,
    workers: Optional[int] = None,
    progress: bool = False,
) -> SweepReport:
    """Pit honest initial experts against selfish ones at several honest fractions"""
    if repetitions < 1:
        raise ArgumentError(f"Invalid repetition count: {repetitions}")
    values = _checked_grid(fractions, "honest_fraction")
    mixes = [tournament_mix(f, base.k_experts, selfish) for f in values]
    tasks = [
        SweepTask(
            config=base.with_updates(
                strategy_mix=mix,
                non_expert_strategy=non_expert_strategy,
                seed=derive_seed(base.seed, "tournament", g, r),
            ),
            setting=value,
            repetition=r,
        )
        for g, (value, mix) in enumerate(zip(values, mixes))
        for r in range(repetitions)
    ]
    logger.info(
        f"Strategy tournament: {len(values)} fractions x {repetitions} repetitions, "
        f"selfish={[s.value for s in selfish]}, non-experts {non_expert_strategy.value}"
    )
    rows = execute(tasks, workers, progress, desc="tournament")
    return SweepReport(
        experiment="tournament",
        parameter="honest_fraction",
        repetitions=repetitions,
        rows=rows,
    )


def mode_config(base: SimConfig, slope: float, arrivals: bool) -> SimConfig:
    w_endorse, w_predict = slope_weights(slope)
    return base.with_updates(
        incentives=base.incentives.with_weights(w_endorse, w_predict),
        arrivals_enabled=arrivals,
    )


def run_convergence_modes(
    base: SimConfig, progress: bool = False, keep_log: bool = False
) -> Dict[str, SimulationResult]:
    """
    Endorsement-only (slope 0), prediction-only (slope -inf) and combined
    (slope -1, with arrivals) runs sharing the base seed and so the
    initial population.
    """
    results: Dict[str, SimulationResult] = {}
    for name, slope, arrivals in MODES:
        logger.info(f"Convergence mode {name}: slope {slope}, arrivals {arrivals}")
        results[name] = run_simulation(
            mode_config(base, slope, arrivals), progress=progress, keep_log=keep_log
        )
    return results


def modes_frame(results: Dict[str, SimulationResult]) -> pd.DataFrame:
    """Initial versus final expert-set traits per mode"""
    rows = []
    for name, result in results.items():
        population = result.population
        initial = result.initial_experts
        final = result.final_experts
        series = result.series_frame()
        params = result.config.engine_params()
        rows.append(
            {
                "mode": name,
                "w_endorse": params.w_endorse,
                "w_predict": params.w_predict,
                "population": len(population),
                "initial_mean_qea": float(population.qea[initial].mean()),
                "final_mean_qea": float(population.qea[final].mean()),
                "initial_mean_pdpa": float(population.pdpa[initial].mean()),
                "final_mean_pdpa": float(population.pdpa[final].mean()),
                "initial_score": combined_score(population[i] for i in initial),
                "final_score": combined_score(population[i] for i in final),
                "endorsement_total": float(series["endorsement_total"].sum()),
                "prediction_total": float(series["pool_paid"].sum()),
            }
        )
    return pd.DataFrame(rows)


def export_modes(
    results: Dict[str, SimulationResult], out_dir: Union[str, Path]
) -> Dict[str, Path]:
    """Per-mode outputs and scatter data, plus a summary across modes"""
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    paths: Dict[str, Path] = {}
    for name, result in results.items():
        for key, path in result.export(target, prefix=f"{name}_").items():
            paths[f"{name}_{key}"] = path
        scatter = target / f"{name}_scatter.csv"
        result.scatter_frame().to_csv(scatter, index=False)
        paths[f"{name}_scatter"] = scatter
    summary = target / "modes.csv"
    modes_frame(results).to_csv(summary, index=False)
    paths["modes"] = summary
    return paths
