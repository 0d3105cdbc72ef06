"""
Caching of generated reviewer populations.

Experiments that share a population seed (the convergence modes, the
repetitions of a sweep setting rerun under another slope) draw the same
initial traits; the cache hands back the stored traits instead of drawing
them again.
"""

from functools import wraps
from typing import Any, Callable, Optional, TypeVar

from cachetools import LRUCache

from .config import config
from .logger import get_logger

logger = get_logger(__name__)

T = TypeVar("T")


class PopulationCache:
    """LRU cache with hit/miss statistics"""

    def __init__(self, maxsize: int = 32):
        """
        Initialize the cache.

        Args:
            maxsize: Maximum number of populations kept
        """
        self._cache: LRUCache = LRUCache(maxsize=max(1, maxsize))
        self._stats = {"hits": 0, "misses": 0}
        logger.debug(f"Population cache initialized with maxsize={maxsize}")

    def get(self, key: str) -> Optional[Any]:
        value = self._cache.get(key)
        if value is not None:
            self._stats["hits"] += 1
            logger.debug(f"Population cache hit: {key}")
        else:
            self._stats["misses"] += 1
        return value

    def set(self, key: str, value: Any) -> None:
        self._cache[key] = value

    def clear(self) -> None:
        self._cache.clear()
        self._stats = {"hits": 0, "misses": 0}

    def get_stats(self) -> dict:
        """Hit/miss counts, hit rate and occupancy"""
        total = self._stats["hits"] + self._stats["misses"]
        hit_rate = (self._stats["hits"] / total * 100) if total > 0 else 0
        return {
            "hits": self._stats["hits"],
            "misses": self._stats["misses"],
            "total_requests": total,
            "hit_rate_percent": round(hit_rate, 2),
            "current_size": len(self._cache),
            "max_size": self._cache.maxsize,
        }

    @staticmethod
    def build_key(*args: Any, **kwargs: Any) -> str:
        """Cache key from arguments; floats use repr so distinct values never collide"""
        parts = [repr(arg) for arg in args]
        parts.extend(f"{k}={v!r}" for k, v in sorted(kwargs.items()))
        return ":".join(parts)


population_cache = PopulationCache(maxsize=config.POPULATION_CACHE_SIZE)


def cached(key_prefix: str = "", cache: Optional[PopulationCache] = None) -> Callable:
    """
    Memoize a pure function in a ``PopulationCache``.

    Cached values are shared between callers and must not be mutated.
    """

    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> T:
            store = cache if cache is not None else population_cache
            key = f"{key_prefix}:{func.__name__}:{store.build_key(*args, **kwargs)}"
            value = store.get(key)
            if value is not None:
                return value
            value = func(*args, **kwargs)
            store.set(key, value)
            return value

        return wrapper

    return decorator
