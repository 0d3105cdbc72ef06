"""
Agent-based simulation of the review marketplace.

One round is the life of one admitted asset: expert rating and admission,
public reviews and predictions from the whole population, endorsements,
a noisy sale and settlement. Every concern draws from its own random
stream derived from the run seed, so enabling arrivals or changing a
strategy never shifts the draws of unrelated concerns.
"""

from pathlib import Path
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from tqdm import tqdm

from .agents import (
    NoiseParams,
    Population,
    ReviewerProfile,
    Strategy,
    choose_endorsements,
    sample_estimates,
)
from .cache import cached
from .config import config as settings
from .core import ExpertiseLedger, IncentiveParams, ReviewerId
from .eventlog import EventLog
from .exceptions import ConfigError
from .logger import get_logger
from .protocol import AssetRecord, ReviewEngine, RoundOutcome, replay_log

logger = get_logger(__name__)

STREAM_NAMES = (
    "population",
    "experts",
    "assets",
    "ratings",
    "reviews",
    "predictions",
    "endorsements",
    "sale",
    "arrivals",
)

REGENERATION_WARNING = 100
MIX_TOLERANCE = 1e-9


class SimConfig(BaseModel):
    """Parameters of one simulation run"""

    model_config = ConfigDict(frozen=True)

    n_reviewers: int = Field(default=500, ge=1)
    n_rounds: int = Field(default=3000, ge=0)
    k_experts: int = Field(default=50, ge=1)
    initial_expertise: float = Field(default=100_000.0, gt=0)
    trait_mean: float = Field(default=0.5, ge=0, le=1)
    trait_std: float = Field(default=0.15, ge=0)
    min_initial_qea: float = Field(default=0.0, ge=0, le=1)
    sale_noise_sigma: float = Field(default=0.05, ge=0)
    arrivals_enabled: bool = False
    arrival_count: int = Field(default=10, ge=1)
    arrival_interval: int = Field(default=100, ge=1)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0, lt=2**64)
    incentives: IncentiveParams = Field(default_factory=IncentiveParams)
    noise: NoiseParams = Field(default_factory=NoiseParams)
    strategy_mix: Dict[Strategy, float] = Field(default_factory=lambda: {Strategy.HONEST: 1.0})
    non_expert_strategy: Strategy = Strategy.HONEST
    entry_fee: float = Field(default=1.0, ge=0)
    sale_price: float = Field(default=0.0, ge=0, description="Gross revenue at demand 1")
    max_admission_attempts: int = Field(default=1000, ge=1)
    area: str = Field(default="art", min_length=1)

    @field_validator("strategy_mix")
    @classmethod
    def validate_mix(cls, v: Dict[Strategy, float]) -> Dict[Strategy, float]:
        """Fractions are nonnegative and sum to one"""
        if not v:
            raise ConfigError("strategy_mix must name at least one strategy")
        for strategy, fraction in v.items():
            if fraction < 0:
                raise ConfigError(f"Negative fraction {fraction} for strategy {strategy.value}")
        total = sum(v.values())
        if abs(total - 1.0) > MIX_TOLERANCE:
            raise ConfigError(f"strategy_mix fractions sum to {total}, expected 1")
        return v

    @model_validator(mode="after")
    def validate_sizes(self) -> "SimConfig":
        if self.k_experts > self.n_reviewers:
            raise ConfigError(
                f"k_experts ({self.k_experts}) exceeds n_reviewers ({self.n_reviewers})"
            )
        return self

    def engine_params(self) -> IncentiveParams:
        """Incentive constants with the expert pool size of this run"""
        if self.incentives.k == self.k_experts:
            return self.incentives
        return IncentiveParams(**{**self.incentives.model_dump(), "k": self.k_experts})

    def with_updates(self, **changes) -> "SimConfig":
        """Validated copy with some fields replaced"""
        return SimConfig(**{**self.model_dump(), **changes})


class RoundRecord(BaseModel):
    """One row of the per-round series"""

    model_config = ConfigDict(frozen=True)

    round: int
    asset_q: float
    asset_d: float
    admission_attempts: int
    outcome: RoundOutcome
    expert_mean_qea: float
    expert_mean_pdpa: float

    def as_row(self) -> Dict[str, object]:
        outcome = self.outcome
        return {
            "round": self.round,
            "asset_q": self.asset_q,
            "asset_d": self.asset_d,
            "observed_demand": outcome.observed_demand,
            "rbar": outcome.rbar,
            "eps": outcome.eps,
            "pool_paid": outcome.prediction_total,
            "expert_turnover_count": outcome.expert_turnover,
            "admission_attempts": self.admission_attempts,
            "endorsement_total": outcome.endorsement_total,
            "dividend_total": outcome.dividend_total,
            "expert_mean_qea": self.expert_mean_qea,
            "expert_mean_pdpa": self.expert_mean_pdpa,
        }


SERIES_COLUMNS = [
    "round",
    "asset_q",
    "asset_d",
    "observed_demand",
    "rbar",
    "eps",
    "pool_paid",
    "expert_turnover_count",
    "admission_attempts",
    "endorsement_total",
    "dividend_total",
    "expert_mean_qea",
    "expert_mean_pdpa",
]

POPULATION_COLUMNS = ["id", "qea", "pdpa", "strategy", "initial_expert", "final_expertise"]


def make_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent generators, one per concern, spawned from the run seed"""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child) for name, child in zip(STREAM_NAMES, children)}


def truncated_normal(rng: np.random.Generator, size: int, mean: float, std: float) -> np.ndarray:
    """Normal draws restricted to [0, 1] by redrawing out-of-range values"""
    if std == 0:
        return np.full(size, float(mean))
    values = rng.normal(mean, std, size)
    bad = (values < 0.0) | (values > 1.0)
    while bad.any():
        values[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = (values < 0.0) | (values > 1.0)
    return values


def draw_profiles(
    rng: np.random.Generator,
    first_id: int,
    count: int,
    mean: float,
    std: float,
    strategy: Strategy = Strategy.HONEST,
) -> List[ReviewerProfile]:
    """Profiles with qea and pdpa drawn independently, qea first"""
    qea = truncated_normal(rng, count, mean, std)
    pdpa = truncated_normal(rng, count, mean, std)
    return [
        ReviewerProfile(
            id=first_id + i,
            qea=float(qea[i]),
            pdpa=float(pdpa[i]),
            strategy=strategy,
        )
        for i in range(count)
    ]


def init_population(config: SimConfig, rng: np.random.Generator) -> Population:
    """Initial reviewers with traits from the truncated population distribution"""
    return Population(
        draw_profiles(
            rng,
            0,
            config.n_reviewers,
            config.trait_mean,
            config.trait_std,
            config.non_expert_strategy,
        )
    )


@cached(key_prefix="population")
def _initial_profiles(
    seed: int, n_reviewers: int, trait_mean: float, trait_std: float
) -> Tuple[ReviewerProfile, ...]:
    rng = make_streams(seed)["population"]
    return tuple(draw_profiles(rng, 0, n_reviewers, trait_mean, trait_std))


def initial_population(config: SimConfig) -> Population:
    """The run's initial population, shared through the population cache"""
    profiles = _initial_profiles(
        config.seed, config.n_reviewers, config.trait_mean, config.trait_std
    )
    return Population(
        p.model_copy(update={"strategy": config.non_expert_strategy}) for p in profiles
    )


class ExpertBootstrap(NamedTuple):
    experts: List[ReviewerId]
    engine: ReviewEngine


def pick_initial_experts(
    population: Population,
    config: SimConfig,
    rng: np.random.Generator,
    log: Optional[EventLog] = None,
) -> ExpertBootstrap:
    """
    Choose the initial experts uniformly among reviewers meeting the
    minimum QEA and register everyone with a fresh engine.

    Raises:
        ConfigError: If fewer than ``k_experts`` reviewers are eligible
    """
    eligible = np.nonzero(population.qea >= config.min_initial_qea)[0]
    if eligible.size < config.k_experts:
        raise ConfigError(
            f"Only {eligible.size} reviewers have qea >= {config.min_initial_qea}; "
            f"{config.k_experts} initial experts needed"
        )
    chosen = np.sort(rng.choice(eligible, size=config.k_experts, replace=False))
    experts = [int(i) for i in chosen]

    engine = ReviewEngine(config.engine_params(), areas=(config.area,), log=log)
    engine.register_reviewers(len(population))
    engine.grant_expertise(config.area, {i: config.initial_expertise for i in experts})
    return ExpertBootstrap(experts, engine)


def allocate_strategies(mix: Mapping[Strategy, float], count: int) -> Dict[Strategy, int]:
    """Split ``count`` seats by the mix fractions using largest remainders"""
    ordered = [s for s in Strategy if s in mix]
    quotas = np.array([mix[s] * count for s in ordered], dtype=np.float64)
    seats = np.floor(quotas + MIX_TOLERANCE).astype(int)
    leftover = count - int(seats.sum())
    if leftover > 0:
        remainders = quotas - seats
        # Stable sort keeps enum order among equal remainders
        for index in np.argsort(-remainders, kind="stable")[:leftover]:
            seats[index] += 1
    return {s: int(n) for s, n in zip(ordered, seats)}


def assign_strategies(
    population: Population,
    experts: Sequence[ReviewerId],
    config: SimConfig,
    rng: np.random.Generator,
) -> Population:
    """Hand out the strategy mix among the initial experts at random"""
    seats = allocate_strategies(config.strategy_mix, len(experts))
    shuffled = [int(i) for i in rng.permutation(np.asarray(experts, dtype=np.int64))]
    assignment: Dict[ReviewerId, Strategy] = {}
    position = 0
    for strategy, count in seats.items():
        for reviewer in shuffled[position : position + count]:
            assignment[reviewer] = strategy
        position += count
    return population.with_strategies(assignment)


def generate_asset(
    rng: np.random.Generator, asset_id: str, area: str = "art", entry_fee: float = 0.0
) -> AssetRecord:
    """Asset with independent uniform hidden quality and demand"""
    quality = float(rng.random())
    demand = float(rng.random())
    return AssetRecord(
        id=asset_id,
        area_tags=[area],
        hidden_quality=quality,
        hidden_demand=demand,
        entry_fee=entry_fee,
    )


def observed_demand(demand: float, sigma: float, rng: np.random.Generator) -> float:
    """Realized demand: hidden demand plus Gaussian noise, clamped to [0, 1]"""
    return float(min(1.0, max(0.0, demand + rng.normal(0.0, sigma))))


def run_round(
    engine: ReviewEngine,
    population: Population,
    strategies: Mapping[ReviewerId, Strategy],
    config: SimConfig,
    streams: Mapping[str, np.random.Generator],
    round_index: int,
) -> RoundRecord:
    """
    Run one admitted asset through the engine.

    Rejected assets are discarded and regenerated.

    Raises:
        ConfigError: If no asset is admitted within ``max_admission_attempts``
    """
    attempts = 0
    while True:
        if attempts >= config.max_admission_attempts:
            raise ConfigError(
                f"No asset admitted in {attempts} attempts at round {round_index}; "
                f"thresh={engine.params.thresh} is too high"
            )
        attempts += 1
        if attempts == REGENERATION_WARNING + 1:
            logger.warning(
                f"Round {round_index}: {REGENERATION_WARNING} assets rejected in a row"
            )
        asset = generate_asset(
            streams["assets"], f"r{round_index}-a{attempts}", config.area, config.entry_fee
        )
        state = engine.submit_asset(asset)
        raters = sorted(state.assigned)
        ratings = sample_estimates(
            asset.hidden_quality, population.qea[raters], streams["ratings"], config.noise
        )
        engine.record_ratings(state.round_id, dict(zip(raters, ratings.tolist())))
        if engine.finalize_admission(state.round_id).admitted:
            break

    round_id = state.round_id
    ids = list(range(len(population)))
    reviews = dict(
        zip(
            ids,
            sample_estimates(
                asset.hidden_quality, population.qea, streams["reviews"], config.noise
            ).tolist(),
        )
    )
    predictions = dict(
        zip(
            ids,
            sample_estimates(
                asset.hidden_demand, population.pdpa, streams["predictions"], config.noise
            ).tolist(),
        )
    )
    engine.record_reviews(round_id, reviews)
    engine.record_predictions(round_id, predictions)
    endorsements = choose_endorsements(strategies, reviews, state.assigned, streams["endorsements"])
    if endorsements:
        engine.record_endorsements(round_id, endorsements)

    demand = observed_demand(asset.hidden_demand, config.sale_noise_sigma, streams["sale"])
    outcome = engine.settle_round(round_id, demand, config.sale_price * demand)

    experts = engine.current_experts(config.area)
    return RoundRecord(
        round=round_index,
        asset_q=asset.hidden_quality,
        asset_d=asset.hidden_demand,
        admission_attempts=attempts,
        outcome=outcome,
        expert_mean_qea=float(population.qea[experts].mean()),
        expert_mean_pdpa=float(population.pdpa[experts].mean()),
    )


class SimulationResult(BaseModel):
    """Everything a finished run produced"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: SimConfig
    population: Population
    initial_experts: List[ReviewerId]
    final_experts: List[ReviewerId]
    ledger: ExpertiseLedger
    series: List[RoundRecord]
    log: EventLog

    @property
    def log_digest(self) -> str:
        """Head hash of the event log"""
        return self.log.head_hash

    def final_expertise(self) -> np.ndarray:
        return np.array(self.ledger.expertise_vector(self.config.area))

    def population_frame(self) -> pd.DataFrame:
        frame = self.population.to_frame()
        initial = set(self.initial_experts)
        frame["initial_expert"] = [i in initial for i in frame["id"]]
        frame["final_expertise"] = self.final_expertise()
        return frame[POPULATION_COLUMNS]

    def series_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.as_row() for r in self.series], columns=SERIES_COLUMNS)

    def scatter_frame(self) -> pd.DataFrame:
        """Trait scatter with initial and final expert membership"""
        initial = set(self.initial_experts)
        final = set(self.final_experts)
        return pd.DataFrame(
            {
                "id": np.arange(len(self.population)),
                "qea": self.population.qea,
                "pdpa": self.population.pdpa,
                "is_initial_expert": [i in initial for i in range(len(self.population))],
                "is_final_expert": [i in final for i in range(len(self.population))],
            }
        )

    def strategy_means(self) -> Dict[Strategy, float]:
        """Mean final expertise of the initial experts, grouped by strategy"""
        expertise = self.final_expertise()
        groups: Dict[Strategy, List[float]] = {}
        for reviewer in self.initial_experts:
            strategy = self.population[reviewer].strategy
            groups.setdefault(strategy, []).append(float(expertise[reviewer]))
        return {s: float(np.mean(values)) for s, values in groups.items()}

    def identical_to(self, other: "SimulationResult") -> bool:
        """Bit-identical ledger, log and series"""
        return (
            self.log_digest == other.log_digest
            and self.ledger.equals(other.ledger)
            and self.initial_experts == other.initial_experts
            and self.final_experts == other.final_experts
            and [r.as_row() for r in self.series] == [r.as_row() for r in other.series]
        )

    def export(self, out_dir: Union[str, Path], prefix: str = "") -> Dict[str, Path]:
        """Write the CSV tables and, when it was retained, the event log"""
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        paths = {
            "population": target / f"{prefix}population.csv",
            "series": target / f"{prefix}series.csv",
        }
        self.population_frame().to_csv(paths["population"], index=False)
        self.series_frame().to_csv(paths["series"], index=False)
        if self.log.keep_events:
            paths["events"] = self.log.export(target / f"{prefix}events.jsonl")
        logger.info(f"Simulation outputs written to {target}")
        return paths


class Simulation:
    """Mutable state of a run in progress"""

    def __init__(self, config: SimConfig, keep_log: bool = True):
        self.config = config
        self.streams = make_streams(config.seed)
        population = initial_population(config)
        bootstrap = pick_initial_experts(
            population, config, self.streams["experts"], EventLog(keep_events=keep_log)
        )
        self.engine = bootstrap.engine
        self.initial_experts = bootstrap.experts
        self.population = assign_strategies(
            population, bootstrap.experts, config, self.streams["experts"]
        )
        self.strategies = self.population.strategies()
        self.series: List[RoundRecord] = []

    def add_arrivals(self) -> range:
        """Register a batch of newcomers with zero expertise"""
        config = self.config
        ids = self.engine.register_reviewers(config.arrival_count)
        self.population.extend(
            draw_profiles(
                self.streams["arrivals"],
                ids.start,
                config.arrival_count,
                config.trait_mean,
                config.trait_std,
                config.non_expert_strategy,
            )
        )
        self.strategies = self.population.strategies()
        logger.debug(f"{config.arrival_count} reviewers joined (population {len(self.population)})")
        return ids

    def arrivals_due(self, round_index: int) -> bool:
        config = self.config
        return (
            config.arrivals_enabled
            and round_index > 0
            and round_index % config.arrival_interval == 0
        )

    def step(self, round_index: int) -> RoundRecord:
        if self.arrivals_due(round_index):
            self.add_arrivals()
        record = run_round(
            self.engine, self.population, self.strategies, self.config, self.streams, round_index
        )
        self.series.append(record)
        return record

    def run(self, progress: bool = False) -> SimulationResult:
        config = self.config
        logger.info(
            f"Simulation start: {config.n_reviewers} reviewers, {config.n_rounds} rounds, "
            f"k={config.k_experts}, seed={config.seed}"
        )
        rounds = tqdm(
            range(config.n_rounds), desc="Rounds", disable=not progress, leave=False
        )
        for round_index in rounds:
            self.step(round_index)
        result = self.result()
        logger.info(
            f"Simulation finished: {len(self.population)} reviewers, "
            f"log head {result.log_digest[:12]}"
        )
        return result

    def result(self) -> SimulationResult:
        return SimulationResult(
            config=self.config,
            population=self.population,
            initial_experts=list(self.initial_experts),
            final_experts=sorted(self.engine.current_experts(self.config.area)),
            ledger=self.engine.ledger.copy(),
            series=list(self.series),
            log=self.engine.log,
        )


def run_simulation(
    config: SimConfig, progress: bool = False, keep_log: bool = True
) -> SimulationResult:
    """
    Run ``config.n_rounds`` admitted rounds from a fresh bootstrap.

    With ``keep_log=False`` the result still carries the log digest but not
    the events, so it cannot be exported or replayed.
    """
    return Simulation(config, keep_log=keep_log).run(progress=progress)


def replay_simulation(result: SimulationResult) -> ReviewEngine:
    """Rebuild the engine of a finished run from its event log alone"""
    return replay_log(result.log, result.config.engine_params(), (result.config.area,))


def verify_replay(result: SimulationResult) -> bool:
    """True when replaying the log reproduces the ledger and the log head bit for bit"""
    engine = replay_simulation(result)
    return engine.ledger.equals(result.ledger) and engine.log.head_hash == result.log_digest
