"""
Domain types and incentive mathematics of the review protocol.

Everything here is a pure function of its arguments except the methods of
``ExpertiseLedger``, which mutate the ledger they are called on.
"""

from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import ArgumentError, ConfigError, DegenerateInputError
from .validators import validate_nonnegative, validate_unit_interval

AreaId = str
ReviewerId = int

WEIGHT_TOLERANCE = 1e-12


class IncentiveParams(BaseModel):
    """Authority-chosen constants driving the incentive equations"""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=0.001, ge=0, description="Coefficient of mingain")
    beta: float = Field(default=0.001, ge=0, description="Coefficient of addgain")
    c1: float = Field(default=10.0, gt=0, description="Dividend scale constant")
    c2: float = Field(default=1e-3, gt=0, description="Prediction-share floor constant")
    pool_scale: float = Field(
        default=8_000_000.0, gt=0, description="Expertise pool per unit of system-wide error"
    )
    k: int = Field(default=50, ge=1, description="Expert pool size per area")
    thresh: float = Field(default=0.5, ge=0, le=1, description="Admission threshold")
    burn_fraction: float = Field(default=1.0, gt=0, le=1)
    w_endorse: float = Field(default=0.5, ge=0, le=1)
    w_predict: float = Field(default=0.5, ge=0, le=1)
    broad_dividends: bool = Field(
        default=False, description="Also pay dividends on prediction gains"
    )
    token_payout_fraction: float = Field(default=0.10, ge=0, le=1)
    revenue_fraction: float = Field(default=0.0, ge=0, le=1)
    gainer_token_share: float = Field(default=0.0, ge=0, le=1)

    @model_validator(mode="after")
    def validate_weights(self) -> "IncentiveParams":
        """Gain weights must split the unit between the two channels"""
        if abs(self.w_endorse + self.w_predict - 1.0) > WEIGHT_TOLERANCE:
            raise ConfigError(
                f"w_endorse + w_predict must equal 1, got {self.w_endorse} + {self.w_predict}"
            )
        return self

    def with_weights(self, w_endorse: float, w_predict: float) -> "IncentiveParams":
        """Return a copy with different channel weights"""
        return IncentiveParams(
            **{**self.model_dump(), "w_endorse": w_endorse, "w_predict": w_predict}
        )


class ExpertiseLedger:
    """
    Per-area expertise scores plus the cumulative investment table.

    Reviewer ids are dense integers handed out by ``add_reviewers``. The
    investment table is indexed ``[endorsee, investor]``. Endorsements made
    during a round are staged and only folded into the table by
    ``commit_investments``, so the table always holds the counts as of the
    most recent round boundary.
    """

    def __init__(self, areas: Iterable[AreaId] = (), capacity: int = 64):
        self._size = 0
        self._capacity = max(1, capacity)
        self._expertise: Dict[AreaId, np.ndarray] = {}
        self._invshare = np.zeros((self._capacity, self._capacity), dtype=np.int64)
        self._pending: List[Tuple[ReviewerId, ReviewerId]] = []
        self._epoch = 0
        self._history: Dict[int, List[Tuple[ReviewerId, ReviewerId]]] = {}
        for area in areas:
            self.add_area(area)

    def __len__(self) -> int:
        return self._size

    @property
    def areas(self) -> List[AreaId]:
        return sorted(self._expertise)

    @property
    def reviewer_ids(self) -> range:
        return range(self._size)

    def add_area(self, area: AreaId) -> None:
        """Register an area of expertise; existing areas are left untouched"""
        if not isinstance(area, str) or not area:
            raise ArgumentError(f"Invalid area id: {area!r}")
        if area not in self._expertise:
            self._expertise[area] = np.zeros(self._capacity, dtype=np.float64)

    def _grow(self, needed: int) -> None:
        capacity = self._capacity
        while capacity < needed:
            capacity *= 2
        if capacity == self._capacity:
            return
        for area, values in self._expertise.items():
            grown = np.zeros(capacity, dtype=np.float64)
            grown[: self._capacity] = values
            self._expertise[area] = grown
        table = np.zeros((capacity, capacity), dtype=np.int64)
        table[: self._capacity, : self._capacity] = self._invshare
        self._invshare = table
        self._capacity = capacity

    def add_reviewers(self, count: int) -> range:
        """Register ``count`` new reviewers with zero expertise everywhere"""
        if count < 0:
            raise ArgumentError(f"Invalid reviewer count: {count}")
        start = self._size
        self._grow(start + count)
        self._size = start + count
        return range(start, self._size)

    def _check_reviewer(self, reviewer: ReviewerId) -> int:
        index = int(reviewer)
        if index < 0 or index >= self._size:
            raise ArgumentError(f"Unknown reviewer: {reviewer!r}")
        return index

    def _check_area(self, area: AreaId) -> np.ndarray:
        if area not in self._expertise:
            raise ArgumentError(f"Unknown area: {area!r}")
        return self._expertise[area]

    def has_reviewer(self, reviewer: ReviewerId) -> bool:
        return 0 <= int(reviewer) < self._size

    def expertise(self, reviewer: ReviewerId, area: AreaId) -> float:
        values = self._check_area(area)
        return float(values[self._check_reviewer(reviewer)])

    def expertise_vector(self, area: AreaId) -> np.ndarray:
        """Read-only view of every registered reviewer's expertise in an area"""
        view = self._check_area(area)[: self._size]
        view = view.view()
        view.flags.writeable = False
        return view

    def total_expertise(self) -> float:
        return float(sum(values[: self._size].sum() for values in self._expertise.values()))

    def credit(self, reviewer: ReviewerId, area: AreaId, amount: float) -> None:
        """Add a nonnegative amount of expertise"""
        values = self._check_area(area)
        index = self._check_reviewer(reviewer)
        values[index] += validate_nonnegative(amount, "expertise credit")

    def credit_many(self, area: AreaId, reviewers: Sequence[int], amounts: np.ndarray) -> None:
        """Credit several reviewers at once, applied in the order given"""
        values = self._check_area(area)
        indices = np.asarray(reviewers, dtype=np.int64)
        amounts = np.asarray(amounts, dtype=np.float64)
        if indices.shape != amounts.shape:
            raise ArgumentError("Reviewer and amount arrays differ in length")
        if indices.size == 0:
            return
        if indices.min() < 0 or indices.max() >= self._size:
            raise ArgumentError("Credit addressed to an unknown reviewer")
        if np.any(amounts < 0) or np.any(np.isnan(amounts)):
            raise ArgumentError("Expertise credits must be nonnegative")
        np.add.at(values, indices, amounts)

    def scale(self, reviewer: ReviewerId, area: AreaId, factor: float) -> None:
        """Multiply one entry by a factor in [0, 1]"""
        values = self._check_area(area)
        index = self._check_reviewer(reviewer)
        values[index] *= validate_unit_interval(factor, "scale factor")

    # Investment table

    def record_investment(self, investor: ReviewerId, endorsee: ReviewerId) -> None:
        """Stage one endorsement; visible in the table after the next commit"""
        self._check_reviewer(investor)
        self._check_reviewer(endorsee)
        if investor == endorsee:
            raise ArgumentError("A reviewer cannot invest in themselves")
        self._pending.append((int(investor), int(endorsee)))

    def commit_investments(self) -> int:
        """Fold staged endorsements into the table, returning how many were applied"""
        applied = len(self._pending)
        for investor, endorsee in self._pending:
            self._invshare[endorsee, investor] += 1
        self._epoch += 1
        self._history[self._epoch] = list(self._pending)
        self._pending.clear()
        return applied

    @property
    def epoch(self) -> int:
        """Number of commits so far; identifies a round boundary"""
        return self._epoch

    def prune_history(self, oldest_needed: int) -> None:
        """Forget commit batches no open round can still ask about"""
        for epoch in [e for e in self._history if e <= oldest_needed]:
            del self._history[epoch]

    @property
    def pending_investments(self) -> List[Tuple[ReviewerId, ReviewerId]]:
        return list(self._pending)

    def invshare(self, investor: ReviewerId, endorsee: ReviewerId) -> int:
        """Committed count plus any staged endorsements of the current round"""
        staged = sum(1 for pair in self._pending if pair == (int(investor), int(endorsee)))
        return self.invshare_snapshot(investor, endorsee) + staged

    def invshare_snapshot(self, investor: ReviewerId, endorsee: ReviewerId) -> int:
        """Count as of the most recent round boundary"""
        return int(
            self._invshare[self._check_reviewer(endorsee), self._check_reviewer(investor)]
        )

    def investors(
        self, endorsee: ReviewerId, as_of: Optional[int] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Ids and counts of every investor in ``endorsee``, ascending by id.

        ``as_of`` names an earlier epoch; commits made after it are taken
        back out so a round sees the table as it stood when it opened.
        """
        row = self._invshare[self._check_reviewer(endorsee), : self._size]
        if as_of is not None and as_of < self._epoch:
            row = row.copy()
            for epoch in range(as_of + 1, self._epoch + 1):
                if epoch not in self._history:
                    raise ArgumentError(f"Investment history for epoch {epoch} was pruned")
                for investor, target in self._history[epoch]:
                    if target == endorsee:
                        row[investor] -= 1
        ids = np.nonzero(row)[0]
        return ids, row[ids]

    def investor_snapshot(
        self, endorsee: ReviewerId, as_of: Optional[int] = None
    ) -> Dict[ReviewerId, int]:
        ids, counts = self.investors(endorsee, as_of)
        return {int(i): int(c) for i, c in zip(ids, counts)}

    def copy(self) -> "ExpertiseLedger":
        clone = ExpertiseLedger(capacity=self._capacity)
        clone._size = self._size
        clone._expertise = {area: values.copy() for area, values in self._expertise.items()}
        clone._invshare = self._invshare.copy()
        clone._pending = list(self._pending)
        clone._epoch = self._epoch
        clone._history = {e: list(batch) for e, batch in self._history.items()}
        return clone

    def equals(self, other: "ExpertiseLedger") -> bool:
        """Bit-identical comparison of expertise and committed investments"""
        if self._size != other._size or self.areas != other.areas:
            return False
        n = self._size
        for area in self.areas:
            if not np.array_equal(self._expertise[area][:n], other._expertise[area][:n]):
                return False
        return bool(np.array_equal(self._invshare[:n, :n], other._invshare[:n, :n]))


class BurnResult(NamedTuple):
    applied: bool
    before: float
    after: float


def mingain(exp_e: float, params: IncentiveParams) -> float:
    """Minimum gain conferred by an endorser holding ``exp_e`` expertise"""
    return params.alpha * validate_nonnegative(exp_e, "endorser expertise")


def addgain(diff: float, params: IncentiveParams) -> float:
    """Additional gain for an expertise gap of ``diff`` between endorser and endorsee"""
    return params.beta * validate_nonnegative(diff, "expertise difference")


def endorsement_gain(exp_e: float, exp_r: float, params: IncentiveParams) -> float:
    """
    Expertise gained by an endorsee holding ``exp_r`` when endorsed by an
    expert holding ``exp_e``.
    """
    exp_e = validate_nonnegative(exp_e, "endorser expertise")
    exp_r = validate_nonnegative(exp_r, "endorsee expertise")
    return mingain(exp_e, params) + addgain(max(0.0, exp_e - exp_r), params)


def dividend_vector(
    delta: float,
    endorser: ReviewerId,
    investor_ids: np.ndarray,
    counts: np.ndarray,
    params: IncentiveParams,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Array form of ``dividends``: returns (ids, payouts) with the endorser removed.

    The denominator includes the endorser's own shares; their slice is forfeited.
    """
    delta = validate_nonnegative(delta, "endorsement gain")
    ids = np.asarray(investor_ids, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if ids.size == 0 or total <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    payouts = params.c1 * delta * counts / total
    keep = ids != int(endorser)
    return ids[keep], payouts[keep]


def dividends(
    delta: float,
    endorsee: ReviewerId,
    endorser: ReviewerId,
    snapshot: Mapping[ReviewerId, int],
    params: IncentiveParams,
) -> Dict[ReviewerId, float]:
    """
    Investment dividends paid to prior investors of ``endorsee`` when they
    gain ``delta`` from an endorsement by ``endorser``.

    Args:
        delta: Endorsement gain of the endorsee
        endorsee: Reviewer being endorsed (used only for error messages)
        endorser: Reviewer making the endorsement; receives nothing
        snapshot: Investor -> endorsement count as of the previous round
        params: Incentive constants (uses c1)

    Returns:
        Investor -> dividend; empty when the endorsee has no investors
    """
    for investor, count in snapshot.items():
        if count < 0:
            raise ArgumentError(
                f"Negative investment share {count} from {investor} in {endorsee}"
            )
    if not snapshot:
        return {}
    ordered = sorted(snapshot)
    ids, payouts = dividend_vector(
        delta,
        endorser,
        np.array(ordered, dtype=np.int64),
        np.array([snapshot[i] for i in ordered], dtype=np.float64),
        params,
    )
    return {int(i): float(p) for i, p in zip(ids, payouts)}


def weighted_mean_rating(ratings: Sequence[Tuple[float, float]]) -> float:
    """
    Expertise-weighted mean of admission ratings.

    Raises:
        ArgumentError: If the list is empty or a weight is negative
        DegenerateInputError: If every weight is zero
    """
    if not ratings:
        raise ArgumentError("Cannot average an empty list of ratings")
    numerator = 0.0
    denominator = 0.0
    for rating, weight in ratings:
        rating = validate_unit_interval(rating, "rating")
        weight = validate_nonnegative(weight, "rating weight")
        numerator += rating * weight
        denominator += weight
    if denominator <= 0.0:
        raise DegenerateInputError("All rating weights are zero")
    # Clip rounding drift so the mean stays a valid rating
    return min(1.0, max(0.0, numerator / denominator))


def admit(rbar: float, thresh: float) -> bool:
    """Admission decision; the threshold itself is admitted"""
    return validate_unit_interval(rbar, "rbar") >= validate_unit_interval(thresh, "thresh")


def prediction_error(demand: float, prediction: float) -> float:
    """Squared error of one prediction against the observed demand"""
    demand = validate_unit_interval(demand, "demand")
    prediction = validate_unit_interval(prediction, "prediction")
    return (demand - prediction) ** 2


def system_error(errors_and_expertise: Sequence[Tuple[float, float]]) -> float:
    """
    System-wide prediction error: mean of individual errors weighted by
    squared expertise.

    Raises:
        ArgumentError: If the list is empty
        DegenerateInputError: If every expertise is zero
    """
    if not errors_and_expertise:
        raise ArgumentError("Cannot compute system error without predictions")
    numerator = 0.0
    denominator = 0.0
    for error, expertise in errors_and_expertise:
        error = validate_nonnegative(error, "prediction error")
        weight = validate_nonnegative(expertise, "expertise") ** 2
        numerator += error * weight
        denominator += weight
    if denominator <= 0.0:
        raise DegenerateInputError("All predictors have zero expertise")
    return numerator / denominator


def prediction_shares(
    errors: Mapping[ReviewerId, float], eps: float, params: IncentiveParams
) -> Dict[ReviewerId, float]:
    """Shares of the prediction pool; reviewers at or above ``eps`` get none"""
    eps = validate_nonnegative(eps, "system error")
    shares: Dict[ReviewerId, float] = {}
    for reviewer, error in errors.items():
        error = validate_nonnegative(error, "prediction error")
        if error >= eps:
            continue
        shares[reviewer] = 1.0 / max(params.c2, error)
    return shares


def prediction_pool(eps: float, params: IncentiveParams) -> float:
    """Expertise available for prediction rewards on one asset"""
    return params.pool_scale * validate_nonnegative(eps, "system error") * params.w_predict


def distribute_prediction_pool(
    shares: Mapping[ReviewerId, float], eps: float, params: IncentiveParams
) -> Dict[ReviewerId, float]:
    """Split the prediction pool proportionally to shares"""
    pool = prediction_pool(eps, params)
    total = sum(shares.values())
    if not shares or pool <= 0.0 or total <= 0.0:
        return {}
    return {reviewer: pool * share / total for reviewer, share in shares.items()}


def select_experts(ledger: ExpertiseLedger, area: AreaId, k: int) -> List[ReviewerId]:
    """
    Top-k reviewers by expertise in an area, ties broken by ascending id.

    Zero-expertise reviewers fill the remaining slots in id order when fewer
    than k reviewers hold positive expertise.
    """
    if k < 1:
        raise ArgumentError(f"Invalid expert pool size: {k}")
    values = ledger.expertise_vector(area)
    ids = np.arange(values.size)
    order = np.lexsort((ids, -values))
    return [int(i) for i in order[:k]]


def burn_expertise(
    ledger: ExpertiseLedger,
    target: ReviewerId,
    votes: Iterable[ReviewerId],
    current_experts: Iterable[ReviewerId],
    area: AreaId,
    params: IncentiveParams,
) -> BurnResult:
    """
    Burn a fraction of ``target``'s expertise if a strict majority of the
    current experts vote for it. The ledger is updated in place.

    Raises:
        ArgumentError: If a voter is not one of the current experts
    """
    experts = set(current_experts)
    ballot = set(votes)
    outsiders = sorted(ballot - experts)
    if outsiders:
        raise ArgumentError(f"Voters {outsiders} are not current experts in {area!r}")
    before = ledger.expertise(target, area)
    if 2 * len(ballot) <= len(experts):
        return BurnResult(applied=False, before=before, after=before)
    ledger.scale(target, area, 1.0 - params.burn_fraction)
    return BurnResult(applied=True, before=before, after=ledger.expertise(target, area))
