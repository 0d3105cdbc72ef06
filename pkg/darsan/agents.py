"""
Reviewer behaviour: noisy estimates of hidden asset properties and the
endorsement strategies.

Estimates are drawn from a symmetric triangular distribution centred on the
true value, restricted to [0, 1] and renormalized there. The half-width
shrinks linearly as the reviewer's trait grows.
"""

from bisect import bisect_left, bisect_right
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .core import ReviewerId
from .exceptions import ArgumentError, ConfigError
from .protocol import AssetRecord
from .validators import validate_unit_interval

ArrayLike = Union[float, np.ndarray]


class Strategy(str, Enum):
    """Endorsement behaviour of a reviewer"""

    HONEST = "Honest"
    LAZY = "Lazy"
    ENDORSE_EXPERT = "EndorseExpert"
    ENDORSE_POOR = "EndorsePoor"
    NO_ENDORSEMENT = "NoEndorsement"


SELFISH_STRATEGIES = (
    Strategy.LAZY,
    Strategy.ENDORSE_EXPERT,
    Strategy.ENDORSE_POOR,
    Strategy.NO_ENDORSEMENT,
)


class NoiseParams(BaseModel):
    """Bounds of the estimate half-width"""

    model_config = ConfigDict(frozen=True)

    w_max: float = Field(default=0.5, gt=0, description="Half-width at trait 0")
    w_min: float = Field(default=0.001, gt=0, description="Half-width at trait 1")

    @model_validator(mode="after")
    def validate_order(self) -> "NoiseParams":
        if self.w_min > self.w_max:
            raise ConfigError(f"w_min ({self.w_min}) must not exceed w_max ({self.w_max})")
        return self


DEFAULT_NOISE = NoiseParams()


class ReviewerProfile(BaseModel):
    """Hidden traits of one reviewer; fixed for the lifetime of a simulation"""

    model_config = ConfigDict(frozen=True)

    id: ReviewerId = Field(..., ge=0)
    qea: float = Field(..., ge=0, le=1, description="Quality estimation ability")
    pdpa: float = Field(..., ge=0, le=1, description="Popular demand prediction ability")
    strategy: Strategy = Strategy.HONEST

    @property
    def combined(self) -> float:
        return (self.qea + self.pdpa) / 2.0


class TriangularNoise(BaseModel):
    """Symmetric triangular distribution around ``peak`` truncated to [0, 1]"""

    model_config = ConfigDict(frozen=True)

    peak: float = Field(..., ge=0, le=1)
    half_width: float = Field(..., gt=0)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        return truncated_triangular_cdf(x, self.peak, self.half_width)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> ArrayLike:
        return sample_truncated_triangular(self.peak, self.half_width, rng.random(size))


def trait_width(trait: ArrayLike, params: NoiseParams = DEFAULT_NOISE) -> ArrayLike:
    """Half-width of the estimate distribution for a trait value (or array)"""
    if np.ndim(trait) == 0:
        trait = validate_unit_interval(trait, "trait")
        return params.w_max * (1.0 - trait) + params.w_min * trait
    values = np.asarray(trait, dtype=np.float64)
    if values.size and (values.min() < 0.0 or values.max() > 1.0 or np.isnan(values).any()):
        raise ArgumentError("Traits must lie in [0, 1]")
    return params.w_max * (1.0 - values) + params.w_min * values


def _untruncated_cdf(x: np.ndarray, peak: np.ndarray, width: np.ndarray) -> np.ndarray:
    left = peak - width
    right = peak + width
    rising = (x - left) ** 2 / (2.0 * width**2)
    falling = 1.0 - (right - x) ** 2 / (2.0 * width**2)
    value = np.where(x <= peak, rising, falling)
    return np.where(x <= left, 0.0, np.where(x >= right, 1.0, value))


def _untruncated_ppf(t: np.ndarray, peak: np.ndarray, width: np.ndarray) -> np.ndarray:
    lower = peak - width + width * np.sqrt(2.0 * t)
    upper = peak + width - width * np.sqrt(2.0 * (1.0 - t))
    return np.where(t <= 0.5, lower, upper)


def truncated_triangular_cdf(x: ArrayLike, peak: ArrayLike, half_width: ArrayLike) -> ArrayLike:
    """CDF of the truncated distribution on [0, 1]"""
    x_arr = np.asarray(x, dtype=np.float64)
    peak_arr = np.asarray(peak, dtype=np.float64)
    width_arr = np.asarray(half_width, dtype=np.float64)
    low = _untruncated_cdf(np.zeros_like(peak_arr), peak_arr, width_arr)
    high = _untruncated_cdf(np.ones_like(peak_arr), peak_arr, width_arr)
    inner = (_untruncated_cdf(np.clip(x_arr, 0.0, 1.0), peak_arr, width_arr) - low) / (high - low)
    result = np.clip(inner, 0.0, 1.0)
    return float(result) if result.ndim == 0 else result


def sample_truncated_triangular(peak: ArrayLike, half_width: ArrayLike, u: ArrayLike) -> ArrayLike:
    """
    Inverse-CDF sample of the truncated triangular distribution.

    Args:
        peak: Mode of the untruncated distribution, in [0, 1]
        half_width: Distance from the peak to either intercept, positive
        u: Uniform draw(s) in [0, 1); broadcast against peak and half_width

    Returns:
        A float for scalar input, otherwise an array; always within [0, 1]
    """
    peak_arr = np.asarray(peak, dtype=np.float64)
    width_arr = np.asarray(half_width, dtype=np.float64)
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(width_arr <= 0.0):
        raise ArgumentError("Half-width must be positive")
    if np.any(peak_arr < 0.0) or np.any(peak_arr > 1.0):
        raise ArgumentError("Peak must lie in [0, 1]")
    low = _untruncated_cdf(np.zeros_like(peak_arr), peak_arr, width_arr)
    high = _untruncated_cdf(np.ones_like(peak_arr), peak_arr, width_arr)
    t = low + u_arr * (high - low)
    result = np.clip(_untruncated_ppf(t, peak_arr, width_arr), 0.0, 1.0)
    return float(result) if result.ndim == 0 else result


def sample_estimates(
    peak: float, traits: np.ndarray, rng: np.random.Generator, noise: NoiseParams = DEFAULT_NOISE
) -> np.ndarray:
    """One estimate of ``peak`` per trait value, drawn with a single uniform each"""
    traits = np.asarray(traits, dtype=np.float64)
    return sample_truncated_triangular(peak, trait_width(traits, noise), rng.random(traits.size))


def honest_review(
    profile: ReviewerProfile,
    asset: AssetRecord,
    rng: np.random.Generator,
    noise: NoiseParams = DEFAULT_NOISE,
) -> float:
    """Review of the asset's hidden quality"""
    if asset.hidden_quality is None:
        raise ArgumentError(f"Asset {asset.id} has no hidden quality to estimate")
    return sample_truncated_triangular(
        asset.hidden_quality, trait_width(profile.qea, noise), rng.random()
    )


def honest_prediction(
    profile: ReviewerProfile,
    asset: AssetRecord,
    rng: np.random.Generator,
    noise: NoiseParams = DEFAULT_NOISE,
) -> float:
    """Prediction of the asset's hidden popular demand"""
    if asset.hidden_demand is None:
        raise ArgumentError(f"Asset {asset.id} has no hidden demand to predict")
    return sample_truncated_triangular(
        asset.hidden_demand, trait_width(profile.pdpa, noise), rng.random()
    )


def choose_endorsement(
    strategy: Strategy,
    self_id: ReviewerId,
    own_review: float,
    visible: Mapping[ReviewerId, Tuple[float, bool, float]],
    rng: np.random.Generator,
) -> Optional[ReviewerId]:
    """
    Pick the review to endorse.

    Args:
        strategy: Endorsement behaviour
        self_id: The endorsing reviewer
        own_review: The endorser's own review of the asset
        visible: Reviewer -> (review, is current expert, round-start expertise)
        rng: Random stream; consumed only by Lazy and EndorseExpert

    Returns:
        The endorsee, or None when the strategy abstains or nobody qualifies
    """
    candidates = sorted(r for r in visible if r != self_id)
    if not candidates or strategy == Strategy.NO_ENDORSEMENT:
        return None
    if strategy == Strategy.HONEST:
        return min(candidates, key=lambda r: (abs(own_review - visible[r][0]), r))
    if strategy == Strategy.ENDORSE_POOR:
        return min(candidates, key=lambda r: (-abs(own_review - visible[r][0]), r))
    if strategy == Strategy.LAZY:
        return candidates[int(rng.integers(len(candidates)))]
    if strategy == Strategy.ENDORSE_EXPERT:
        experts = [r for r in candidates if visible[r][1]]
        if not experts:
            return None
        return experts[int(rng.integers(len(experts)))]
    raise ArgumentError(f"Unknown strategy: {strategy!r}")


class ReviewIndex:
    """
    Reviews grouped by value for nearest/farthest lookups.

    Each group lists its reviewers by ascending id, so the smallest id other
    than the asking reviewer is the first or second member.
    """

    def __init__(self, reviews: Mapping[ReviewerId, float]):
        groups: Dict[float, List[ReviewerId]] = {}
        for reviewer in sorted(reviews):
            groups.setdefault(reviews[reviewer], []).append(reviewer)
        self.values = sorted(groups)
        self.members = [groups[v] for v in self.values]

    def _first_other(self, group: int, me: ReviewerId) -> Optional[ReviewerId]:
        members = self.members[group]
        if members[0] != me:
            return members[0]
        return members[1] if len(members) > 1 else None

    def nearest(self, me: ReviewerId, own: float) -> Optional[ReviewerId]:
        """Reviewer minimizing |own - review|, ties by ascending id"""
        split = bisect_right(self.values, own)
        best = np.inf
        chosen: Optional[ReviewerId] = None
        for groups in (range(split - 1, -1, -1), range(split, len(self.values))):
            for group in groups:
                candidate = self._first_other(group, me)
                if candidate is None:
                    continue
                diff = abs(own - self.values[group])
                if diff > best:
                    break
                if diff < best or candidate < chosen:
                    best, chosen = diff, candidate
        return chosen

    def farthest(self, me: ReviewerId, own: float) -> Optional[ReviewerId]:
        """Reviewer maximizing |own - review|, ties by ascending id"""
        split = bisect_left(self.values, own)
        best = -1.0
        chosen: Optional[ReviewerId] = None
        for groups in (range(0, split), range(len(self.values) - 1, split - 1, -1)):
            for group in groups:
                candidate = self._first_other(group, me)
                if candidate is None:
                    continue
                diff = abs(own - self.values[group])
                if diff < best:
                    break
                if diff > best or candidate < chosen:
                    best, chosen = diff, candidate
        return chosen


def choose_endorsements(
    strategies: Mapping[ReviewerId, Strategy],
    reviews: Mapping[ReviewerId, float],
    experts: Iterable[ReviewerId],
    rng: np.random.Generator,
) -> Dict[ReviewerId, ReviewerId]:
    """
    Endorsements of every reviewer in ``strategies`` who wrote a review.

    Produces the same choices, and consumes the random stream in the same
    way, as calling ``choose_endorsement`` for each endorser in ascending id
    order with every other review visible.
    """
    index = ReviewIndex(reviews)
    visible_experts = sorted(r for r in set(experts) if r in reviews)
    expert_slot = {r: i for i, r in enumerate(visible_experts)}
    everyone = sorted(reviews)
    slot = {r: i for i, r in enumerate(everyone)}
    chosen: Dict[ReviewerId, ReviewerId] = {}
    for reviewer in sorted(strategies):
        if reviewer not in reviews:
            continue
        strategy = strategies[reviewer]
        own = reviews[reviewer]
        endorsee: Optional[ReviewerId] = None
        if strategy == Strategy.HONEST:
            endorsee = index.nearest(reviewer, own)
        elif strategy == Strategy.ENDORSE_POOR:
            endorsee = index.farthest(reviewer, own)
        elif strategy == Strategy.LAZY:
            endorsee = _draw_excluding(everyone, slot.get(reviewer), rng)
        elif strategy == Strategy.ENDORSE_EXPERT:
            endorsee = _draw_excluding(visible_experts, expert_slot.get(reviewer), rng)
        if endorsee is not None:
            chosen[reviewer] = endorsee
    return chosen


def _draw_excluding(
    pool: Sequence[ReviewerId], own_slot: Optional[int], rng: np.random.Generator
) -> Optional[ReviewerId]:
    size = len(pool) - (1 if own_slot is not None else 0)
    if size <= 0:
        return None
    pick = int(rng.integers(size))
    if own_slot is not None and pick >= own_slot:
        pick += 1
    return pool[pick]


class Population:
    """Column view of reviewer profiles indexed by reviewer id"""

    def __init__(self, profiles: Iterable[ReviewerProfile] = ()):
        self._profiles: List[ReviewerProfile] = []
        self.qea = np.empty(0, dtype=np.float64)
        self.pdpa = np.empty(0, dtype=np.float64)
        self.extend(profiles)

    def __len__(self) -> int:
        return len(self._profiles)

    def __getitem__(self, reviewer: ReviewerId) -> ReviewerProfile:
        return self._profiles[reviewer]

    def __iter__(self):
        return iter(self._profiles)

    @property
    def profiles(self) -> List[ReviewerProfile]:
        return list(self._profiles)

    def extend(self, profiles: Iterable[ReviewerProfile]) -> None:
        """Append profiles whose ids continue the current numbering"""
        added = list(profiles)
        for offset, profile in enumerate(added):
            if profile.id != len(self._profiles) + offset:
                raise ArgumentError(
                    f"Profile id {profile.id} breaks the numbering at "
                    f"{len(self._profiles) + offset}"
                )
        self._profiles.extend(added)
        self.qea = np.array([p.qea for p in self._profiles], dtype=np.float64)
        self.pdpa = np.array([p.pdpa for p in self._profiles], dtype=np.float64)

    def strategies(self) -> Dict[ReviewerId, Strategy]:
        return {p.id: p.strategy for p in self._profiles}

    def with_strategies(self, assignment: Mapping[ReviewerId, Strategy]) -> "Population":
        """Copy with some reviewers' strategies replaced"""
        return Population(
            p.model_copy(update={"strategy": assignment[p.id]}) if p.id in assignment else p
            for p in self._profiles
        )

    def combined_scores(self) -> np.ndarray:
        return (self.qea + self.pdpa) / 2.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "id": [p.id for p in self._profiles],
                "qea": self.qea,
                "pdpa": self.pdpa,
                "strategy": [p.strategy.value for p in self._profiles],
            }
        )
