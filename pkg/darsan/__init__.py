"""
DARSAN - decentralized review protocol engine, agent simulator and experiment harness
"""

__version__ = "1.0.0"
__description__ = "Expertise-weighted decentralized review protocol and its simulator"

from .core import ExpertiseLedger, IncentiveParams
from .protocol import ReviewEngine
from .sim import SimConfig, run_simulation

__all__ = ["ExpertiseLedger", "IncentiveParams", "ReviewEngine", "SimConfig", "run_simulation"]
