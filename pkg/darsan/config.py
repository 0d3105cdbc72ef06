"""
Environment configuration for the DARSAN review engine and simulator
"""

import os

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Settings:
    """Process-wide settings read from environment variables"""

    LOG_LEVEL: str = os.getenv("DARSAN_LOG_LEVEL", "INFO")

    # Seed used when neither the config file nor --seed provides one
    DEFAULT_SEED: int = int(os.getenv("DARSAN_DEFAULT_SEED", "20230601"))

    OUTPUT_DIR: str = os.getenv("DARSAN_OUTPUT_DIR", "results")

    # 1 runs sweep repetitions sequentially; more fans them out to a process pool
    WORKERS: int = int(os.getenv("DARSAN_WORKERS", "1"))

    POPULATION_CACHE_SIZE: int = int(os.getenv("DARSAN_POPULATION_CACHE_SIZE", "32"))

    # Section names accepted in .cfg files
    CONFIG_SECTIONS = ["simulation", "incentives", "agents", "experiment"]

    @classmethod
    def worker_count(cls, requested: int = 0) -> int:
        """Resolve the worker count, preferring an explicit request"""
        workers = requested or cls.WORKERS
        return max(1, int(workers))


config = Settings()
