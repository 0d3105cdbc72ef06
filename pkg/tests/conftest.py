"""
Test configuration and fixtures
"""

import logging

import pytest

from darsan.core import IncentiveParams
from darsan.logger import logger
from darsan.protocol import AssetRecord, ReviewEngine
from darsan.sim import SimConfig


@pytest.fixture(autouse=True)
def restore_log_level():
    """Commands run with --quiet lower the package log level; put it back"""
    level = logger.level
    yield
    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level or logging.INFO)


@pytest.fixture
def params():
    """Small hand-checkable constants with a three-seat expert pool"""
    return IncentiveParams(k=3, c1=0.5, c2=1e-4, pool_scale=10_000.0)


@pytest.fixture
def engine(params):
    """Six reviewers; 0, 1 and 2 bootstrapped as experts with 100, 80 and 60"""
    engine = ReviewEngine(params, areas=("art",))
    engine.register_reviewers(6)
    engine.grant_expertise("art", {0: 100.0, 1: 80.0, 2: 60.0})
    return engine


def make_asset(asset_id="asset-1", fee=0.0, tags=("art",), quality=None, demand=None):
    return AssetRecord(
        id=asset_id,
        area_tags=list(tags),
        entry_fee=fee,
        hidden_quality=quality,
        hidden_demand=demand,
    )


def open_listed_round(engine, asset_id="asset-1", fee=0.0):
    """Submit an asset and have every assigned expert rate it 1.0"""
    state = engine.submit_asset(make_asset(asset_id, fee))
    engine.record_ratings(state.round_id, {e: 1.0 for e in sorted(state.assigned)})
    decision = engine.finalize_admission(state.round_id)
    assert decision.admitted
    return state.round_id


@pytest.fixture
def small_config():
    """A simulation small enough for the fast suite"""
    return SimConfig(n_reviewers=40, n_rounds=30, k_experts=5, seed=7)


@pytest.fixture
def tiny_config_text():
    """Config file text for a quick CLI run"""
    return "\n".join(
        [
            "[simulation]",
            "n_reviewers = 20",
            "n_rounds = 5",
            "k_experts = 3",
            "seed = 11",
            "",
            "[incentives]",
            "slope = -1",
            "",
            "[experiment]",
            "qea_grid = 0.3",
            "honest_fractions = 0.5",
            "",
        ]
    )
