"""
Per-asset round state machine over the expertise ledger.

A round runs submission, expert rating and admission, then public reviews,
predictions and endorsements, then settlement after the sale. Every
transition is appended to the engine's hash-chained event log, and every
operation validates its input completely before it changes anything.
"""

from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .core import (
    AreaId,
    BurnResult,
    ExpertiseLedger,
    IncentiveParams,
    ReviewerId,
    admit,
    burn_expertise,
    distribute_prediction_pool,
    dividend_vector,
    endorsement_gain,
    prediction_error,
    prediction_pool,
    prediction_shares,
    select_experts,
    system_error,
    weighted_mean_rating,
)
from .eventlog import NO_ROUND, EventKind, EventLog, ProtocolEvent
from .exceptions import (
    ArgumentError,
    AuthorizationError,
    DegenerateInputError,
    DuplicateEndorsementError,
    DuplicateError,
    DuplicateRoundError,
    MissingReviewError,
    SelfEndorsementError,
    StateError,
)
from .logger import get_logger
from .validators import validate_area_tags, validate_nonnegative, validate_unit_interval

logger = get_logger(__name__)


class AssetState(str, Enum):
    SUBMITTED = "Submitted"
    UNDER_ADMISSION = "UnderAdmission"
    REJECTED = "Rejected"
    LISTED = "Listed"
    SOLD = "Sold"
    SETTLED = "Settled"


ALLOWED_TRANSITIONS = {
    AssetState.SUBMITTED: {AssetState.UNDER_ADMISSION},
    AssetState.UNDER_ADMISSION: {AssetState.REJECTED, AssetState.LISTED},
    AssetState.LISTED: {AssetState.SOLD},
    AssetState.SOLD: {AssetState.SETTLED},
    AssetState.REJECTED: set(),
    AssetState.SETTLED: set(),
}


class AssetRecord(BaseModel):
    """
    An asset moving through the marketplace.

    ``hidden_quality`` and ``hidden_demand`` belong to the simulation layer;
    the engine never reads them (they are None for replayed assets).
    """

    model_config = ConfigDict(validate_assignment=True)

    id: str = Field(..., min_length=1)
    area_tags: FrozenSet[str]
    hidden_quality: Optional[float] = Field(default=None, ge=0, le=1, frozen=True)
    hidden_demand: Optional[float] = Field(default=None, ge=0, le=1, frozen=True)
    state: AssetState = AssetState.SUBMITTED
    entry_fee: float = Field(default=0.0, ge=0)

    @field_validator("area_tags", mode="before")
    @classmethod
    def validate_tags(cls, v: Iterable[str]) -> FrozenSet[str]:
        """At least one nonempty area tag"""
        return validate_area_tags(v)

    def transition(self, new_state: AssetState) -> None:
        """Move to ``new_state`` if the lifecycle allows it"""
        if new_state not in ALLOWED_TRANSITIONS[self.state]:
            raise StateError(
                f"Asset {self.id} cannot move from {self.state.value} to {new_state.value}"
            )
        self.state = new_state


class TokenLedger:
    """Economic incentive pool and per-reviewer token balances"""

    def __init__(self, incentive_pool: float = 0.0):
        self.incentive_pool = validate_nonnegative(incentive_pool, "incentive pool")
        self.balances: Dict[ReviewerId, float] = {}

    def deposit(self, amount: float) -> None:
        self.incentive_pool += validate_nonnegative(amount, "deposit")

    def pay(self, weights: Mapping[ReviewerId, float], amount: float) -> Dict[ReviewerId, float]:
        """Pay ``amount`` out of the pool split proportionally to ``weights``"""
        amount = min(validate_nonnegative(amount, "payout"), self.incentive_pool)
        total = sum(weights.values())
        if amount <= 0.0 or total <= 0.0:
            return {}
        paid = {}
        for reviewer in sorted(weights):
            if weights[reviewer] <= 0.0:
                continue
            share = amount * weights[reviewer] / total
            self.balances[reviewer] = self.balances.get(reviewer, 0.0) + share
            paid[reviewer] = share
        self.incentive_pool = max(0.0, self.incentive_pool - sum(paid.values()))
        return paid

    def balance(self, reviewer: ReviewerId) -> float:
        return self.balances.get(reviewer, 0.0)


class AdmissionDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    round_id: int
    asset_id: str
    rbar: float
    admitted: bool
    fee_forfeited: float = 0.0


class RoundOutcome(BaseModel):
    """Settlement results of one listed asset"""

    model_config = ConfigDict(frozen=True)

    round_id: int
    asset_id: str
    rbar: float
    observed_demand: float
    eps: Optional[float] = None
    eps_by_area: Dict[str, float] = Field(default_factory=dict)
    endorsement_total: float = 0.0
    dividend_total: float = 0.0
    prediction_total: float = 0.0
    tokens_paid: float = 0.0
    expert_turnover: int = 0
    endorsements: int = 0
    predictions: int = 0


class RoundState:
    """Everything collected for one asset between submission and settlement"""

    def __init__(
        self,
        round_id: int,
        asset: AssetRecord,
        experts: Dict[AreaId, Tuple[ReviewerId, ...]],
        start_expertise: Dict[AreaId, np.ndarray],
        invshare_epoch: int,
    ):
        self.round_id = round_id
        self.asset = asset
        self.experts = experts
        self.assigned: FrozenSet[ReviewerId] = frozenset(
            reviewer for members in experts.values() for reviewer in members
        )
        self.start_expertise = start_expertise
        self.invshare_epoch = invshare_epoch
        self.expert_ratings: Dict[ReviewerId, float] = {}
        self.rbar: Optional[float] = None
        self.reviews: Dict[ReviewerId, float] = {}
        self.predictions: Dict[ReviewerId, float] = {}
        self.endorsements: Dict[ReviewerId, ReviewerId] = {}
        self.observed_demand: Optional[float] = None

    @property
    def state(self) -> AssetState:
        return self.asset.state

    def start_value(self, area: AreaId, reviewer: ReviewerId) -> float:
        """Round-start expertise in one area; reviewers registered later count as zero"""
        values = self.start_expertise[area]
        return float(values[reviewer]) if reviewer < values.size else 0.0

    def start_weight(self, reviewer: ReviewerId) -> float:
        """Round-start expertise summed over the asset's areas"""
        return float(sum(self.start_value(area, reviewer) for area in self.start_expertise))

    def visible_reviews(self, viewer: ReviewerId) -> Dict[ReviewerId, Tuple[float, bool, float]]:
        """Reviews other than the viewer's own, with expert flag and round-start weight"""
        return {
            reviewer: (review, reviewer in self.assigned, self.start_weight(reviewer))
            for reviewer, review in self.reviews.items()
            if reviewer != viewer
        }


def _pairs(mapping: Mapping[int, float]) -> List[List[Any]]:
    return [[int(key), float(mapping[key])] for key in sorted(mapping)]


def listing_order(rounds: Iterable[RoundState]) -> List[str]:
    """Listed asset ids by descending weighted rating, ties by ascending id"""
    entries = []
    for state in rounds:
        if state.state != AssetState.LISTED:
            raise StateError(f"Asset {state.asset.id} is {state.state.value}, not Listed")
        entries.append((-float(state.rbar), state.asset.id))
    return [asset_id for _, asset_id in sorted(entries)]


class ReviewEngine:
    """
    The review protocol over one deployment.

    Holds the expertise ledger, the token ledger, the current expert set of
    every area and the event log. Rounds are addressed by integer ids handed
    out by ``submit_asset``.
    """

    def __init__(
        self,
        params: IncentiveParams,
        areas: Sequence[AreaId] = ("art",),
        log: Optional[EventLog] = None,
    ):
        if not areas:
            raise ArgumentError("A deployment needs at least one area")
        self.params = params
        self.ledger = ExpertiseLedger(areas)
        self.tokens = TokenLedger()
        self.log = log if log is not None else EventLog()
        self.experts: Dict[AreaId, List[ReviewerId]] = {area: [] for area in self.ledger.areas}
        self._rounds: Dict[int, RoundState] = {}
        self._open_assets: Dict[str, int] = {}
        self._next_round = 0
        logger.debug(f"ReviewEngine initialized for areas {self.ledger.areas}")

    # Reviewer management

    def register_reviewers(self, count: int) -> range:
        """Add ``count`` reviewers with zero expertise"""
        if count < 1:
            raise ArgumentError(f"Invalid reviewer count: {count}")
        ids = self.ledger.add_reviewers(count)
        self.log.append(EventKind.REVIEWER_REGISTERED, {"first": ids.start, "count": count})
        self._refresh_experts("registration")
        return ids

    def grant_expertise(self, area: AreaId, grants: Mapping[ReviewerId, float]) -> None:
        """Bootstrap expertise directly (initial expert set)"""
        if area not in self.experts:
            raise ArgumentError(f"Unknown area: {area!r}")
        for reviewer, amount in grants.items():
            if not self.ledger.has_reviewer(reviewer):
                raise ArgumentError(f"Unknown reviewer: {reviewer!r}")
            validate_nonnegative(amount, "granted expertise")
        ids = sorted(grants)
        self.ledger.credit_many(area, ids, np.array([grants[i] for i in ids], dtype=np.float64))
        self.log.append(
            EventKind.EXPERTISE_DISTRIBUTED,
            {
                "channel": "grant",
                "area": area,
                "total": float(sum(grants[i] for i in ids)),
                "recipients": _pairs(grants),
            },
        )
        self._refresh_experts("grant")

    def _refresh_experts(self, reason: str, round_id: int = NO_ROUND) -> int:
        turnover = 0
        for area in self.ledger.areas:
            previous = set(self.experts[area])
            current = select_experts(self.ledger, area, self.params.k)
            changed = len(set(current) - previous)
            turnover += changed
            self.experts[area] = current
            self.log.append(
                EventKind.EXPERTS_ROTATED,
                {"area": area, "reason": reason, "experts": current, "turnover": changed},
                round_id,
            )
        return turnover

    def current_experts(self, area: AreaId) -> List[ReviewerId]:
        if area not in self.experts:
            raise ArgumentError(f"Unknown area: {area!r}")
        return list(self.experts[area])

    # Round access

    def round(self, round_id: int) -> RoundState:
        if round_id not in self._rounds:
            raise ArgumentError(f"Unknown round: {round_id}")
        return self._rounds[round_id]

    def _round_in(self, round_id: int, state: AssetState) -> RoundState:
        current = self.round(round_id)
        if current.state != state:
            raise StateError(
                f"Round {round_id} is {current.state.value}; operation requires {state.value}"
            )
        return current

    def _check_reviewer(self, reviewer: ReviewerId) -> None:
        if not self.ledger.has_reviewer(reviewer):
            raise ArgumentError(f"Unknown reviewer: {reviewer!r}")

    def listed_rounds(self) -> List[RoundState]:
        return [r for r in self._rounds.values() if r.state == AssetState.LISTED]

    def listing(self) -> List[str]:
        return listing_order(self.listed_rounds())

    # Pre-listing

    def submit_asset(self, asset: AssetRecord) -> RoundState:
        """Open a round and assign the asset to the experts of its areas"""
        if asset.id in self._open_assets:
            raise DuplicateRoundError(f"Asset {asset.id} already has an open round")
        if asset.state != AssetState.SUBMITTED:
            raise StateError(f"Asset {asset.id} is {asset.state.value}, not Submitted")
        unknown = sorted(set(asset.area_tags) - set(self.experts))
        if unknown:
            raise ArgumentError(f"Asset {asset.id} carries unknown areas {unknown}")

        round_id = self._next_round
        areas = sorted(asset.area_tags)
        experts = {
            area: tuple(select_experts(self.ledger, area, self.params.k)) for area in areas
        }
        start = {area: self.ledger.expertise_vector(area).copy() for area in areas}
        state = RoundState(round_id, asset, experts, start, self.ledger.epoch)
        asset.transition(AssetState.UNDER_ADMISSION)

        self._next_round += 1
        self._rounds[round_id] = state
        self._open_assets[asset.id] = round_id
        self.log.append(
            EventKind.ASSET_SUBMITTED,
            {
                "asset": asset.id,
                "areas": areas,
                "entry_fee": float(asset.entry_fee),
                "experts": {area: list(members) for area, members in experts.items()},
            },
            round_id,
        )
        logger.debug(
            f"Round {round_id}: asset {asset.id} assigned to {len(state.assigned)} experts"
        )
        return state

    def record_rating(self, round_id: int, expert: ReviewerId, rating: float) -> RoundState:
        return self.record_ratings(round_id, {expert: rating})

    def record_ratings(self, round_id: int, ratings: Mapping[ReviewerId, float]) -> RoundState:
        """Store admission ratings from experts assigned at round start"""
        state = self._round_in(round_id, AssetState.UNDER_ADMISSION)
        clean = {}
        for expert, rating in ratings.items():
            if expert not in state.assigned:
                raise AuthorizationError(
                    f"Reviewer {expert} was not an assigned expert of round {round_id}"
                )
            if expert in state.expert_ratings:
                raise DuplicateError(f"Expert {expert} already rated round {round_id}")
            clean[int(expert)] = validate_unit_interval(rating, "rating")
        state.expert_ratings.update(clean)
        self.log.append(EventKind.RATING_RECORDED, {"ratings": _pairs(clean)}, round_id)
        return state

    def finalize_admission(self, round_id: int) -> AdmissionDecision:
        """Close the rating window and admit or reject the asset"""
        state = self._round_in(round_id, AssetState.UNDER_ADMISSION)
        if not state.expert_ratings:
            raise DegenerateInputError(f"Round {round_id} has no ratings to decide on")
        rbar = weighted_mean_rating(
            [(state.expert_ratings[e], state.start_weight(e)) for e in sorted(state.expert_ratings)]
        )
        admitted = admit(rbar, self.params.thresh)
        state.rbar = rbar
        asset = state.asset
        forfeited = 0.0
        if admitted:
            asset.transition(AssetState.LISTED)
        else:
            asset.transition(AssetState.REJECTED)
            forfeited = float(asset.entry_fee)
            self.tokens.deposit(forfeited)
            del self._open_assets[asset.id]
        self.log.append(
            EventKind.ADMISSION_DECIDED,
            {"asset": asset.id, "rbar": rbar, "admitted": admitted},
            round_id,
        )
        if not admitted:
            self.log.append(
                EventKind.FEE_FORFEITED,
                {"asset": asset.id, "fee": forfeited, "pool": self.tokens.incentive_pool},
                round_id,
            )
        logger.debug(f"Round {round_id}: rbar={rbar:.4f} admitted={admitted}")
        return AdmissionDecision(
            round_id=round_id,
            asset_id=asset.id,
            rbar=rbar,
            admitted=admitted,
            fee_forfeited=forfeited,
        )

    # Pre-sale

    def record_review(self, round_id: int, reviewer: ReviewerId, review: float) -> RoundState:
        return self.record_reviews(round_id, {reviewer: review})

    def record_reviews(self, round_id: int, reviews: Mapping[ReviewerId, float]) -> RoundState:
        state = self._round_in(round_id, AssetState.LISTED)
        clean = self._collect(state.reviews, reviews, "review", round_id)
        state.reviews.update(clean)
        self.log.append(EventKind.REVIEW_RECORDED, {"reviews": _pairs(clean)}, round_id)
        return state

    def record_prediction(
        self, round_id: int, reviewer: ReviewerId, prediction: float
    ) -> RoundState:
        return self.record_predictions(round_id, {reviewer: prediction})

    def record_predictions(
        self, round_id: int, predictions: Mapping[ReviewerId, float]
    ) -> RoundState:
        state = self._round_in(round_id, AssetState.LISTED)
        clean = self._collect(state.predictions, predictions, "prediction", round_id)
        state.predictions.update(clean)
        self.log.append(EventKind.PREDICTION_RECORDED, {"predictions": _pairs(clean)}, round_id)
        return state

    def _collect(
        self,
        existing: Mapping[ReviewerId, float],
        incoming: Mapping[ReviewerId, float],
        what: str,
        round_id: int,
    ) -> Dict[ReviewerId, float]:
        clean = {}
        for reviewer, value in incoming.items():
            self._check_reviewer(reviewer)
            if reviewer in existing:
                raise DuplicateError(
                    f"Reviewer {reviewer} already submitted a {what} in round {round_id}"
                )
            clean[int(reviewer)] = validate_unit_interval(value, what)
        return clean

    def record_endorsement(
        self, round_id: int, endorser: ReviewerId, endorsee: ReviewerId
    ) -> RoundState:
        return self.record_endorsements(round_id, {endorser: endorsee})

    def record_endorsements(
        self, round_id: int, endorsements: Mapping[ReviewerId, ReviewerId]
    ) -> RoundState:
        """Store endorsements; expertise only moves at settlement"""
        state = self._round_in(round_id, AssetState.LISTED)
        clean = {}
        for endorser, endorsee in endorsements.items():
            self._check_reviewer(endorser)
            self._check_reviewer(endorsee)
            if endorser == endorsee:
                raise SelfEndorsementError(f"Reviewer {endorser} cannot endorse their own review")
            if endorser in state.endorsements:
                raise DuplicateEndorsementError(
                    f"Reviewer {endorser} already used their endorsement in round {round_id}"
                )
            if endorsee not in state.reviews:
                raise MissingReviewError(f"Reviewer {endorsee} has no review in round {round_id}")
            clean[int(endorser)] = int(endorsee)
        state.endorsements.update(clean)
        self.log.append(
            EventKind.ENDORSEMENT_RECORDED,
            {"endorsements": [[e, clean[e]] for e in sorted(clean)]},
            round_id,
        )
        return state

    # Post-sale

    def settle_round(
        self, round_id: int, observed_demand: float, gross_revenue: float = 0.0
    ) -> RoundOutcome:
        """
        Apply the sale outcome: endorsement gains and dividends, prediction
        rewards, investment commit, expert rotation and token incentives.
        """
        state = self._round_in(round_id, AssetState.LISTED)
        demand = validate_unit_interval(observed_demand, "observed demand")
        revenue = validate_nonnegative(gross_revenue, "gross revenue")
        params = self.params
        areas = sorted(state.experts)
        n = len(self.ledger)

        # Everything that can fail is computed before the first mutation
        errors = {r: prediction_error(demand, p) for r, p in sorted(state.predictions.items())}
        eps_by_area: Dict[str, float] = {}
        if errors:
            for area in areas:
                try:
                    eps_by_area[area] = system_error(
                        [(errors[r], state.start_value(area, r)) for r in errors]
                    )
                except DegenerateInputError:
                    # No predictor held expertise in the area at round start
                    logger.warning(
                        f"Round {round_id}: no weighted predictions in area '{area}', "
                        f"prediction pool skipped"
                    )

        state.asset.transition(AssetState.SOLD)
        state.observed_demand = demand
        self.log.append(
            EventKind.SALE_OBSERVED, {"demand": demand, "revenue": revenue}, round_id
        )

        gains = np.zeros(n, dtype=np.float64)
        endorsement_total = 0.0
        dividend_total = 0.0
        prediction_total = 0.0

        for area in areas:
            endorse_credit, dividend_credit = self._endorsement_credits(state, area, n)
            endorsement_total += self._apply(area, endorse_credit, "endorsement", round_id)
            dividend_total += self._apply(area, dividend_credit, "dividend", round_id)
            gains += endorse_credit + dividend_credit

        for area in areas:
            if area not in eps_by_area:
                continue
            eps = eps_by_area[area]
            shares = prediction_shares(errors, eps, params)
            payouts = distribute_prediction_pool(shares, eps, params)
            pred_credit = np.zeros(n, dtype=np.float64)
            for reviewer in sorted(payouts):
                pred_credit[reviewer] += payouts[reviewer]
            prediction_total += self._apply(
                area,
                pred_credit,
                "prediction",
                round_id,
                extra={"eps": eps, "pool": prediction_pool(eps, params)},
            )
            gains += pred_credit
            if params.broad_dividends:
                broad = self._broad_dividends(state, pred_credit, n)
                dividend_total += self._apply(area, broad, "prediction_dividend", round_id)
                gains += broad

        for endorser in sorted(state.endorsements):
            self.ledger.record_investment(endorser, state.endorsements[endorser])
        self.ledger.commit_investments()

        turnover = self._refresh_experts("settlement", round_id)

        tokens_paid = self._pay_tokens(state, gains, revenue, round_id)

        state.asset.transition(AssetState.SETTLED)
        del self._open_assets[state.asset.id]
        self.ledger.prune_history(self._oldest_open_epoch())

        primary = areas[0]
        outcome = RoundOutcome(
            round_id=round_id,
            asset_id=state.asset.id,
            rbar=float(state.rbar),
            observed_demand=demand,
            eps=eps_by_area.get(primary),
            eps_by_area=eps_by_area,
            endorsement_total=endorsement_total,
            dividend_total=dividend_total,
            prediction_total=prediction_total,
            tokens_paid=tokens_paid,
            expert_turnover=turnover,
            endorsements=len(state.endorsements),
            predictions=len(state.predictions),
        )
        logger.debug(
            f"Round {round_id} settled: endorse={endorsement_total:.2f} "
            f"dividend={dividend_total:.2f} predict={prediction_total:.2f} turnover={turnover}"
        )
        return outcome

    def _endorsement_credits(
        self, state: RoundState, area: AreaId, n: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        params = self.params
        experts = set(state.experts[area])
        endorse_credit = np.zeros(n, dtype=np.float64)
        dividend_credit = np.zeros(n, dtype=np.float64)
        for endorser in sorted(state.endorsements):
            # Only endorsements from experts confer expertise
            if endorser not in experts:
                continue
            endorsee = state.endorsements[endorser]
            delta = params.w_endorse * endorsement_gain(
                state.start_value(area, endorser), state.start_value(area, endorsee), params
            )
            if delta <= 0.0:
                continue
            endorse_credit[endorsee] += delta
            ids, counts = self.ledger.investors(endorsee, as_of=state.invshare_epoch)
            ids, payouts = dividend_vector(delta, endorser, ids, counts, params)
            np.add.at(dividend_credit, ids, payouts)
        return endorse_credit, dividend_credit

    def _broad_dividends(self, state: RoundState, pred_credit: np.ndarray, n: int) -> np.ndarray:
        broad = np.zeros(n, dtype=np.float64)
        for reviewer in np.nonzero(pred_credit)[0]:
            ids, counts = self.ledger.investors(int(reviewer), as_of=state.invshare_epoch)
            ids, payouts = dividend_vector(
                float(pred_credit[reviewer]), -1, ids, counts, self.params
            )
            np.add.at(broad, ids, payouts)
        return broad

    def _apply(
        self,
        area: AreaId,
        credit: np.ndarray,
        channel: str,
        round_id: int,
        extra: Optional[Dict[str, Any]] = None,
    ) -> float:
        ids = np.nonzero(credit)[0]
        amounts = credit[ids]
        self.ledger.credit_many(area, ids, amounts)
        total = float(amounts.sum())
        payload: Dict[str, Any] = {
            "channel": channel,
            "area": area,
            "total": total,
            "recipients": [[int(i), float(a)] for i, a in zip(ids, amounts)],
        }
        payload.update(extra or {})
        self.log.append(EventKind.EXPERTISE_DISTRIBUTED, payload, round_id)
        return total

    def _pay_tokens(
        self, state: RoundState, gains: np.ndarray, revenue: float, round_id: int
    ) -> float:
        params = self.params
        self.tokens.deposit(params.revenue_fraction * revenue)
        budget = self.tokens.incentive_pool * params.token_payout_fraction
        gainer_budget = budget * params.gainer_token_share
        gainer_weights = {int(i): float(gains[i]) for i in np.nonzero(gains)[0]}
        gainers = self.tokens.pay(gainer_weights, gainer_budget) if gainer_weights else {}
        rater_weights = {r: state.start_weight(r) for r in state.expert_ratings}
        raters = self.tokens.pay(rater_weights, budget - sum(gainers.values()))
        paid = float(sum(raters.values()) + sum(gainers.values()))
        self.log.append(
            EventKind.INCENTIVE_PAID,
            {
                "paid": paid,
                "pool": self.tokens.incentive_pool,
                "raters": _pairs(raters),
                "gainers": _pairs(gainers),
            },
            round_id,
        )
        return paid

    def _oldest_open_epoch(self) -> int:
        epochs = [self._rounds[r].invshare_epoch for r in self._open_assets.values()]
        return min(epochs) if epochs else self.ledger.epoch

    # Checks and balances

    def internal_review(
        self, target: ReviewerId, votes: Iterable[ReviewerId], area: AreaId
    ) -> BurnResult:
        """Majority vote of the current experts of ``area`` to burn ``target``'s expertise"""
        self._check_reviewer(target)
        ballot = sorted(set(int(v) for v in votes))
        result = burn_expertise(
            self.ledger, target, ballot, self.current_experts(area), area, self.params
        )
        self.log.append(
            EventKind.EXPERTISE_BURNED,
            {
                "target": int(target),
                "area": area,
                "votes": ballot,
                "applied": result.applied,
                "before": result.before,
                "after": result.after,
            },
        )
        if result.applied:
            self._refresh_experts("burn")
        logger.info(
            f"Internal review of {target} in {area!r}: {len(ballot)} votes, burned={result.applied}"
        )
        return result


def replay_log(
    events: Iterable[ProtocolEvent], params: IncentiveParams, areas: Sequence[AreaId]
) -> ReviewEngine:
    """
    Re-execute every logged operation on a fresh engine.

    Derived events (distributions, rotations, payouts, forfeits) are produced
    again by the replayed operations; the caller can compare the replayed
    log's head hash with the original's.
    """
    engine = ReviewEngine(params, areas)
    for event in events:
        payload = event.payload
        kind = event.kind
        if kind == EventKind.REVIEWER_REGISTERED:
            engine.register_reviewers(int(payload["count"]))
        elif kind == EventKind.EXPERTISE_DISTRIBUTED and payload["channel"] == "grant":
            engine.grant_expertise(
                payload["area"], {int(r): float(a) for r, a in payload["recipients"]}
            )
        elif kind == EventKind.ASSET_SUBMITTED:
            asset = AssetRecord(
                id=payload["asset"], area_tags=payload["areas"], entry_fee=payload["entry_fee"]
            )
            engine.submit_asset(asset)
        elif kind == EventKind.RATING_RECORDED:
            engine.record_ratings(event.round, {int(r): v for r, v in payload["ratings"]})
        elif kind == EventKind.ADMISSION_DECIDED:
            engine.finalize_admission(event.round)
        elif kind == EventKind.REVIEW_RECORDED:
            engine.record_reviews(event.round, {int(r): v for r, v in payload["reviews"]})
        elif kind == EventKind.PREDICTION_RECORDED:
            engine.record_predictions(event.round, {int(r): v for r, v in payload["predictions"]})
        elif kind == EventKind.ENDORSEMENT_RECORDED:
            engine.record_endorsements(
                event.round, {int(e): int(t) for e, t in payload["endorsements"]}
            )
        elif kind == EventKind.SALE_OBSERVED:
            engine.settle_round(event.round, payload["demand"], payload["revenue"])
        elif kind == EventKind.EXPERTISE_BURNED:
            engine.internal_review(payload["target"], payload["votes"], payload["area"])
    return engine
