"""
Tests for sim module
"""

import numpy as np
import pandas as pd
import pytest

from darsan.agents import Population, ReviewerProfile, Strategy
from darsan.eventlog import EventLog, verify_log_file
from darsan.exceptions import ConfigError
from darsan.sim import (
    POPULATION_COLUMNS,
    SERIES_COLUMNS,
    SimConfig,
    Simulation,
    allocate_strategies,
    generate_asset,
    init_population,
    make_streams,
    observed_demand,
    pick_initial_experts,
    run_simulation,
    verify_replay,
)


class TestSimConfig:
    """Tests for SimConfig"""

    def test_defaults(self):
        """Test the reference setup"""
        config = SimConfig()
        assert config.n_reviewers == 500
        assert config.n_rounds == 3000
        assert config.k_experts == 50
        assert config.initial_expertise == 100_000.0
        assert config.engine_params().k == 50

    def test_mix_must_sum_to_one(self):
        """Test strategy fractions are validated"""
        with pytest.raises(ConfigError):
            SimConfig(strategy_mix={Strategy.HONEST: 0.5, Strategy.LAZY: 0.4})

    def test_k_cannot_exceed_population(self):
        """Test the expert pool fits in the population"""
        with pytest.raises(ConfigError):
            SimConfig(n_reviewers=10, k_experts=11)

    def test_engine_params_follow_k(self):
        """Test the engine pool size comes from k_experts"""
        assert SimConfig(n_reviewers=10, k_experts=4).engine_params().k == 4


class TestPopulationDraws:
    """Tests for population generation"""

    def test_trait_moments(self):
        """Test traits follow the truncated normal"""
        config = SimConfig(n_reviewers=10_000, k_experts=1)
        population = init_population(config, np.random.default_rng(0))
        assert abs(population.qea.mean() - 0.5) < 0.01
        assert abs(population.pdpa.mean() - 0.5) < 0.01
        assert population.qea.min() >= 0.0
        assert population.qea.max() <= 1.0

    def test_zero_std(self):
        """Test a zero standard deviation gives identical traits"""
        config = SimConfig(n_reviewers=20, k_experts=1, trait_std=0.0)
        population = init_population(config, np.random.default_rng(0))
        assert set(population.qea.tolist()) == {0.5}

    def test_same_seed_same_population(self):
        """Test population draws are reproducible"""
        config = SimConfig(n_reviewers=50, k_experts=1)
        a = init_population(config, make_streams(5)["population"])
        b = init_population(config, make_streams(5)["population"])
        assert a.qea.tolist() == b.qea.tolist()


class TestInitialExperts:
    """Tests for pick_initial_experts"""

    def test_experts_meet_minimum(self):
        """Test every initial expert meets the minimum QEA"""
        config = SimConfig(n_reviewers=200, k_experts=10, min_initial_qea=0.6)
        population = init_population(config, np.random.default_rng(1))
        bootstrap = pick_initial_experts(population, config, np.random.default_rng(2))
        assert len(bootstrap.experts) == 10
        assert all(population.qea[i] >= 0.6 for i in bootstrap.experts)
        assert bootstrap.engine.current_experts("art") == bootstrap.experts
        assert all(
            bootstrap.engine.ledger.expertise(i, "art") == 100_000.0 for i in bootstrap.experts
        )

    def test_too_few_eligible(self):
        """Test an unsatisfiable minimum raises ConfigError"""
        config = SimConfig(n_reviewers=5, k_experts=2, min_initial_qea=0.9)
        population = Population(ReviewerProfile(id=i, qea=0.5, pdpa=0.5) for i in range(5))
        with pytest.raises(ConfigError):
            pick_initial_experts(population, config, np.random.default_rng(0))


class TestStrategyAllocation:
    """Tests for allocate_strategies"""

    def test_largest_remainder(self):
        """Test leftover seats go to the largest remainders in enum order"""
        seats = allocate_strategies({Strategy.HONEST: 0.5, Strategy.LAZY: 0.5}, 5)
        assert seats == {Strategy.HONEST: 3, Strategy.LAZY: 2}

    def test_exact_split(self):
        """Test fractions that divide evenly"""
        seats = allocate_strategies({Strategy.HONEST: 0.5, Strategy.ENDORSE_POOR: 0.5}, 50)
        assert seats == {Strategy.HONEST: 25, Strategy.ENDORSE_POOR: 25}


class TestAssetsAndSales:
    """Tests for generate_asset and observed_demand"""

    def test_asset_values_in_range(self):
        """Test hidden values are uniform draws in [0, 1]"""
        rng = np.random.default_rng(0)
        assets = [generate_asset(rng, f"a{i}") for i in range(5_000)]
        quality = np.array([a.hidden_quality for a in assets])
        assert quality.min() >= 0.0 and quality.max() < 1.0
        assert abs(quality.mean() - 0.5) < 0.02

    def test_zero_noise_is_exact(self):
        """Test sigma 0 observes the hidden demand"""
        assert observed_demand(0.37, 0.0, np.random.default_rng(0)) == 0.37

    def test_clamped(self):
        """Test observed demand is clamped to [0, 1]"""
        rng = np.random.default_rng(0)
        values = [observed_demand(1.0, 0.5, rng) for _ in range(1_000)]
        assert max(values) == 1.0
        assert min(values) >= 0.0

    def test_noise_moments(self):
        """Test the sale noise has the configured standard deviation"""
        rng = np.random.default_rng(8)
        values = np.array([observed_demand(0.5, 0.05, rng) for _ in range(50_000)])
        assert abs(values.mean() - 0.5) < 0.002
        assert abs(values.std() - 0.05) < 0.002


class TestSimulation:
    """Tests for full simulation runs"""

    def test_deterministic(self, small_config):
        """Test the same config gives bit-identical results"""
        assert run_simulation(small_config).identical_to(run_simulation(small_config))

    def test_seed_changes_run(self, small_config):
        """Test another seed gives another log"""
        a = run_simulation(small_config)
        b = run_simulation(small_config.with_updates(seed=8))
        assert a.log_digest != b.log_digest

    def test_series_shape(self, small_config):
        """Test one series row per admitted round"""
        result = run_simulation(small_config)
        frame = result.series_frame()
        assert list(frame.columns) == SERIES_COLUMNS
        assert len(frame) == small_config.n_rounds
        assert frame["round"].tolist() == list(range(small_config.n_rounds))
        assert (frame["admission_attempts"] >= 1).all()
        assert len(result.final_experts) == small_config.k_experts

    def test_zero_rounds(self, small_config):
        """Test zero rounds leaves the bootstrap ledger"""
        result = run_simulation(small_config.with_updates(n_rounds=0))
        expertise = result.final_expertise()
        assert result.series == []
        assert sorted(result.final_experts) == sorted(result.initial_experts)
        assert expertise[result.initial_experts].tolist() == [100_000.0] * small_config.k_experts
        assert expertise.sum() == 100_000.0 * small_config.k_experts

    def test_zero_threshold_admits_first_asset(self, small_config):
        """Test thresh 0 never regenerates an asset"""
        params = small_config.incentives.model_copy(update={"thresh": 0.0})
        result = run_simulation(small_config.with_updates(incentives=params))
        assert all(r.admission_attempts == 1 for r in result.series)

    def test_unreachable_threshold(self, small_config):
        """Test a threshold no asset can meet stops with ConfigError"""
        params = small_config.incentives.model_copy(update={"thresh": 1.0})
        config = small_config.with_updates(incentives=params, max_admission_attempts=5)
        with pytest.raises(ConfigError):
            run_simulation(config)

    def test_no_endorsement_everywhere(self, small_config):
        """Test abstaining reviewers produce no endorsement gains"""
        config = small_config.with_updates(
            strategy_mix={Strategy.NO_ENDORSEMENT: 1.0},
            non_expert_strategy=Strategy.NO_ENDORSEMENT,
        )
        result = run_simulation(config)
        assert all(r.outcome.endorsement_total == 0.0 for r in result.series)
        assert all(r.outcome.endorsements == 0 for r in result.series)

    def test_expertise_never_decreases(self, small_config):
        """Test settlement only ever adds expertise"""
        simulation = Simulation(small_config)
        previous = np.array(simulation.engine.ledger.expertise_vector("art"))
        for round_index in range(10):
            simulation.step(round_index)
            current = np.array(simulation.engine.ledger.expertise_vector("art"))
            assert (current >= previous).all()
            previous = current

    def test_arrivals(self, small_config):
        """Test newcomers join at every interval with zero expertise"""
        config = small_config.with_updates(
            n_rounds=25, arrivals_enabled=True, arrival_count=3, arrival_interval=10
        )
        result = run_simulation(config)
        assert len(result.population) == small_config.n_reviewers + 6
        assert [p.id for p in result.population] == list(range(len(result.population)))

    def test_arrivals_do_not_shift_other_streams(self, small_config):
        """Test enabling arrivals leaves the rounds before the first arrival unchanged"""
        base = run_simulation(small_config.with_updates(n_rounds=10))
        config = small_config.with_updates(
            n_rounds=10, arrivals_enabled=True, arrival_interval=10
        )
        with_arrivals = run_simulation(config)
        assert with_arrivals.identical_to(base)

    def test_strategies_assigned_to_initial_experts(self, small_config):
        """Test the mix is dealt among the initial experts"""
        config = small_config.with_updates(
            strategy_mix={Strategy.HONEST: 0.6, Strategy.LAZY: 0.4}
        )
        result = run_simulation(config.with_updates(n_rounds=0))
        strategies = [result.population[i].strategy for i in result.initial_experts]
        assert strategies.count(Strategy.HONEST) == 3
        assert strategies.count(Strategy.LAZY) == 2
        others = set(range(config.n_reviewers)) - set(result.initial_experts)
        assert {result.population[i].strategy for i in others} == {Strategy.HONEST}


class TestResults:
    """Tests for SimulationResult outputs and replay"""

    def test_replay(self, small_config):
        """Test the log alone reproduces the run"""
        assert verify_replay(run_simulation(small_config))

    def test_log_verifies(self, small_config):
        """Test the event log of a run verifies"""
        assert run_simulation(small_config).log.verify()

    def test_export(self, small_config, tmp_path):
        """Test CSV and log export"""
        result = run_simulation(small_config)
        paths = result.export(tmp_path)
        population = pd.read_csv(paths["population"])
        series = pd.read_csv(paths["series"])
        assert list(population.columns) == POPULATION_COLUMNS
        assert list(series.columns) == SERIES_COLUMNS
        assert population["initial_expert"].sum() == small_config.k_experts
        assert verify_log_file(paths["events"])
        assert EventLog.load(paths["events"]).head_hash == result.log_digest

    def test_head_only_log(self, small_config, tmp_path):
        """Test runs without a retained log keep the same digest"""
        full = run_simulation(small_config)
        light = run_simulation(small_config, keep_log=False)
        assert light.log_digest == full.log_digest
        paths = light.export(tmp_path)
        assert "events" not in paths

    def test_scatter_frame(self, small_config):
        """Test the scatter marks initial and final experts"""
        result = run_simulation(small_config)
        scatter = result.scatter_frame()
        assert scatter["is_initial_expert"].sum() == small_config.k_experts
        assert scatter["is_final_expert"].sum() == small_config.k_experts

    def test_strategy_means(self, small_config):
        """Test per-strategy means cover the initial experts"""
        config = small_config.with_updates(
            strategy_mix={Strategy.HONEST: 0.6, Strategy.ENDORSE_POOR: 0.4}
        )
        means = run_simulation(config).strategy_means()
        assert set(means) == {Strategy.HONEST, Strategy.ENDORSE_POOR}
        assert all(value >= 100_000.0 for value in means.values())
