"""
Tests for core module
"""

import numpy as np
import pytest

from darsan.core import (
    ExpertiseLedger,
    IncentiveParams,
    admit,
    burn_expertise,
    distribute_prediction_pool,
    dividends,
    endorsement_gain,
    prediction_error,
    prediction_pool,
    prediction_shares,
    select_experts,
    system_error,
    weighted_mean_rating,
)
from darsan.exceptions import ArgumentError, ConfigError, DegenerateInputError, RangeError


class TestIncentiveParams:
    """Tests for IncentiveParams"""

    def test_defaults(self):
        """Test default constants"""
        params = IncentiveParams()
        assert params.alpha == 0.001
        assert params.beta == 0.001
        assert params.c1 == 10.0
        assert params.c2 == 1e-3
        assert params.pool_scale == 8_000_000.0
        assert params.k == 50
        assert params.thresh == 0.5

    def test_weights_must_sum_to_one(self):
        """Test mismatched channel weights raise ConfigError"""
        with pytest.raises(ConfigError):
            IncentiveParams(w_endorse=0.7, w_predict=0.7)

    def test_with_weights(self):
        """Test with_weights keeps the other constants"""
        params = IncentiveParams(k=7, alpha=0.01).with_weights(1.0, 0.0)
        assert params.w_endorse == 1.0
        assert params.w_predict == 0.0
        assert params.k == 7
        assert params.alpha == 0.01

    def test_params_are_frozen(self):
        """Test constants cannot be reassigned"""
        params = IncentiveParams()
        with pytest.raises(Exception):
            params.k = 3


class TestEndorsementGain:
    """Tests for endorsement_gain"""

    def test_expert_endorsing_newcomer(self):
        """Test the full expertise gap is rewarded"""
        params = IncentiveParams()
        assert endorsement_gain(1e5, 0.0, params) == pytest.approx(200.0)

    def test_no_additional_gain_above_endorser(self):
        """Test endorsees above the endorser only get the minimum gain"""
        params = IncentiveParams()
        assert endorsement_gain(100.0, 300.0, params) == pytest.approx(0.1)

    def test_negative_expertise_rejected(self):
        """Test negative inputs raise ArgumentError"""
        with pytest.raises(ArgumentError):
            endorsement_gain(-1.0, 0.0, IncentiveParams())


class TestDividends:
    """Tests for dividends"""

    def test_proportional_to_shares(self, params):
        """Test payouts split c1 * delta by investment count"""
        payouts = dividends(200.0, 9, 5, {1: 2, 2: 1, 5: 1}, params)
        assert payouts == pytest.approx({1: 50.0, 2: 25.0})

    def test_endorser_slice_is_forfeited(self, params):
        """Test the endorser's own shares stay in the denominator but are not paid"""
        payouts = dividends(100.0, 9, 3, {3: 3, 4: 1}, params)
        assert set(payouts) == {4}
        assert payouts[4] == pytest.approx(0.5 * 100.0 / 4)

    def test_no_investors(self):
        """Test an endorsee without investors pays nothing"""
        assert dividends(50.0, 1, 2, {}, IncentiveParams()) == {}

    def test_negative_share_rejected(self):
        """Test negative counts raise ArgumentError"""
        with pytest.raises(ArgumentError):
            dividends(1.0, 1, 2, {3: -1}, IncentiveParams())

    def test_matches_direct_summation(self):
        """Test random instances against the closed formula"""
        rng = np.random.default_rng(5)
        params = IncentiveParams()
        for _ in range(200):
            size = int(rng.integers(1, 12))
            investors = rng.choice(50, size=size, replace=False)
            snapshot = {int(i): int(rng.integers(1, 9)) for i in investors}
            endorser = int(rng.integers(50))
            delta = float(rng.random() * 500)
            total = sum(snapshot.values())
            expected = {
                i: params.c1 * delta * n / total for i, n in snapshot.items() if i != endorser
            }
            assert dividends(delta, 99, endorser, snapshot, params) == pytest.approx(expected)


class TestRatingsAndAdmission:
    """Tests for weighted_mean_rating and admit"""

    def test_weighted_mean(self):
        """Test expertise-weighted averaging"""
        assert weighted_mean_rating([(0.8, 3.0), (0.2, 1.0)]) == pytest.approx(0.65)

    def test_empty_ratings(self):
        """Test an empty list raises ArgumentError"""
        with pytest.raises(ArgumentError):
            weighted_mean_rating([])

    def test_all_zero_weights(self):
        """Test zero total weight raises DegenerateInputError"""
        with pytest.raises(DegenerateInputError):
            weighted_mean_rating([(0.4, 0.0), (0.9, 0.0)])

    def test_rating_out_of_range(self):
        """Test ratings outside [0, 1] raise RangeError"""
        with pytest.raises(RangeError):
            weighted_mean_rating([(1.5, 1.0)])

    def test_threshold_is_inclusive(self):
        """Test an asset at the threshold is admitted"""
        assert admit(0.5, 0.5)
        assert not admit(0.49, 0.5)
        assert admit(0.0, 0.0)


class TestPredictionRewards:
    """Tests for the prediction error, pool and shares"""

    def test_prediction_error(self):
        """Test squared error"""
        assert prediction_error(0.5, 0.2) == pytest.approx(0.09)

    def test_prediction_out_of_range(self):
        """Test out-of-range predictions raise RangeError"""
        with pytest.raises(RangeError):
            prediction_error(0.5, 1.2)

    def test_system_error_weights_by_squared_expertise(self):
        """Test the system error against a hand computation"""
        assert system_error([(0.04, 2.0), (0.01, 1.0)]) == pytest.approx(0.034)

    def test_system_error_degenerate(self):
        """Test zero expertise everywhere raises DegenerateInputError"""
        with pytest.raises(DegenerateInputError):
            system_error([(0.1, 0.0)])
        with pytest.raises(ArgumentError):
            system_error([])

    def test_system_error_matches_direct_summation(self):
        """Test random instances against the closed formula"""
        rng = np.random.default_rng(11)
        for _ in range(200):
            size = int(rng.integers(1, 30))
            errors = rng.random(size) ** 2
            expertise = rng.random(size) * 1000 + 1e-3
            expected = float(np.sum(errors * expertise**2) / np.sum(expertise**2))
            pairs = list(zip(errors.tolist(), expertise.tolist()))
            assert system_error(pairs) == pytest.approx(expected, rel=1e-9)

    def test_shares_exclude_errors_at_or_above_eps(self, params):
        """Test only predictions better than the system error earn shares"""
        shares = prediction_shares({0: 0.0, 1: 0.01, 2: 0.1, 3: 0.5}, 0.1, params)
        assert shares == pytest.approx({0: 1e4, 1: 100.0})

    def test_pool_is_split_by_share(self, params):
        """Test the pool size and its proportional split"""
        shares = {0: 1e4, 1: 100.0}
        payouts = distribute_prediction_pool(shares, 0.1, params)
        pool = prediction_pool(0.1, params)
        assert pool == pytest.approx(500.0)
        assert payouts[0] == pytest.approx(500.0 * 1e4 / 10100)
        assert payouts[1] == pytest.approx(500.0 * 100 / 10100)
        assert sum(payouts.values()) == pytest.approx(pool)

    def test_no_pool_without_prediction_weight(self):
        """Test w_predict = 0 distributes nothing"""
        params = IncentiveParams().with_weights(1.0, 0.0)
        assert distribute_prediction_pool({0: 1e4}, 0.2, params) == {}


class TestIncentiveProperties:
    """Tests for the algebraic properties of the incentive equations"""

    def test_endorsement_gain_monotone(self):
        """Test gains rise with the endorser and fall with the endorsee"""
        params = IncentiveParams(alpha=0.002, beta=0.003)
        rng = np.random.default_rng(3)
        for _ in range(200):
            low, high = (float(x) for x in np.sort(rng.random(2) * 1e4))
            exp_r = float(rng.random() * 1e4)
            assert endorsement_gain(high, exp_r, params) >= endorsement_gain(low, exp_r, params)
            exp_e = float(rng.random() * 1e4)
            assert endorsement_gain(exp_e, low, params) >= endorsement_gain(exp_e, high, params)

    def test_endorsement_gain_floor(self):
        """Test an endorsee at or above the endorser receives exactly the minimum gain"""
        params = IncentiveParams()
        assert endorsement_gain(100.0, 100.0, params) == pytest.approx(params.alpha * 100.0)
        assert endorsement_gain(0.0, 50.0, params) == 0.0
        assert endorsement_gain(10.0, 0.0, params) == pytest.approx(
            (params.alpha + params.beta) * 10.0
        )

    def test_dividends_conserve_c1_delta(self):
        """Test paid dividends plus the forfeited slice equal c1 * delta"""
        params = IncentiveParams(c1=3.0)
        rng = np.random.default_rng(17)
        for _ in range(300):
            size = int(rng.integers(1, 20))
            investors = rng.choice(100, size=size, replace=False)
            snapshot = {int(i): int(rng.integers(1, 6)) for i in investors}
            endorser = int(rng.choice(investors)) if rng.random() < 0.5 else 100
            delta = float(rng.random() * 1000)
            total = sum(snapshot.values())
            forfeited = params.c1 * delta * snapshot.get(endorser, 0) / total
            paid = sum(dividends(delta, 101, endorser, snapshot, params).values())
            assert paid + forfeited == pytest.approx(params.c1 * delta, rel=1e-12)

    def test_system_error_within_predictor_errors(self):
        """Test the system error lies between the smallest and largest weighted error"""
        rng = np.random.default_rng(23)
        for _ in range(300):
            size = int(rng.integers(1, 25))
            errors = rng.random(size)
            expertise = rng.random(size) * 100 + 1e-6
            eps = system_error(list(zip(errors.tolist(), expertise.tolist())))
            assert errors.min() * (1 - 1e-12) <= eps <= errors.max() * (1 + 1e-12)

    def test_system_error_scale_invariance(self):
        """Test rescaling every expertise leaves the system error unchanged"""
        rng = np.random.default_rng(29)
        for _ in range(300):
            size = int(rng.integers(1, 25))
            errors = rng.random(size).tolist()
            expertise = rng.random(size) * 100 + 1e-6
            factor = float(10 ** rng.uniform(-3, 3))
            base = system_error(list(zip(errors, expertise.tolist())))
            scaled = system_error(list(zip(errors, (expertise * factor).tolist())))
            assert scaled == pytest.approx(base, rel=1e-12)

    def test_zero_expertise_predictor_has_no_weight(self):
        """Test a zero-expertise predictor does not move the system error"""
        assert system_error([(0.2, 4.0), (0.9, 0.0)]) == pytest.approx(0.2)

    def test_shares_order_and_cap(self):
        """Test shares fall with the error and are capped at 1 / c2"""
        params = IncentiveParams(c2=1e-3)
        errors = {0: 0.0, 1: 5e-4, 2: 1e-3, 3: 0.01, 4: 0.05, 5: 0.2}
        shares = prediction_shares(errors, 0.1, params)
        assert set(shares) == {0, 1, 2, 3, 4}
        assert shares[0] == shares[1] == shares[2] == pytest.approx(1.0 / params.c2)
        assert shares[2] > shares[3] > shares[4]

    def test_error_equal_to_eps_gets_nothing(self):
        """Test a prediction exactly as good as the system gets no share"""
        assert prediction_shares({0: 0.1, 1: 0.3}, 0.1, IncentiveParams()) == {}

    def test_pool_proportional_to_eps(self):
        """Test the pool grows linearly with the system error and the prediction weight"""
        params = IncentiveParams(pool_scale=200.0).with_weights(0.25, 0.75)
        assert prediction_pool(0.0, params) == 0.0
        assert prediction_pool(0.2, params) == pytest.approx(200.0 * 0.2 * 0.75)
        assert prediction_pool(0.4, params) == pytest.approx(2 * prediction_pool(0.2, params))


class TestIncentiveOracle:
    """Tests for the incentive equations against an independent numpy computation"""

    def test_random_instances(self):
        """Test system error, shares, pool payouts and dividends on random instances"""
        params = IncentiveParams(c1=2.5, c2=1e-3, pool_scale=5e4)
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            size = int(rng.integers(1, 40))
            errors = rng.random(size) ** 2
            expertise = rng.random(size) * 1e3
            expertise[rng.random(size) < 0.2] = 0.0
            if not expertise.any():
                expertise[0] = 1.0

            weights = expertise**2
            eps_expected = float(np.dot(errors, weights) / weights.sum())
            eps = system_error(list(zip(errors.tolist(), expertise.tolist())))
            assert eps == pytest.approx(eps_expected, rel=1e-12)

            by_id = dict(enumerate(errors.tolist()))
            winners = np.flatnonzero(errors < eps)
            share_values = 1.0 / np.maximum(params.c2, errors[winners])
            shares = prediction_shares(by_id, eps, params)
            assert sorted(shares) == winners.tolist()
            for reviewer, share in zip(winners.tolist(), share_values.tolist()):
                assert shares[reviewer] == pytest.approx(share, rel=1e-12)

            payouts = distribute_prediction_pool(shares, eps, params)
            pool = params.pool_scale * eps * params.w_predict
            if winners.size:
                expected = pool * share_values / share_values.sum()
                for reviewer, amount in zip(winners.tolist(), expected.tolist()):
                    assert payouts[reviewer] == pytest.approx(amount, rel=1e-12)

            investors = rng.choice(200, size=int(rng.integers(1, 15)), replace=False)
            counts = rng.integers(1, 10, size=investors.size)
            snapshot = dict(zip(investors.tolist(), counts.tolist()))
            endorser = int(investors[0]) if rng.random() < 0.3 else 500
            delta = float(rng.random() * 300)
            expected = params.c1 * delta * counts / counts.sum()
            paid = dividends(delta, 501, endorser, snapshot, params)
            assert endorser not in paid
            for investor, amount in zip(investors.tolist(), expected.tolist()):
                if investor != endorser:
                    assert paid[investor] == pytest.approx(amount, rel=1e-12)


class TestExpertiseLedger:
    """Tests for ExpertiseLedger"""

    def test_add_reviewers_grows_storage(self):
        """Test registering past the initial capacity keeps earlier values"""
        ledger = ExpertiseLedger(["art"], capacity=2)
        ledger.add_reviewers(2)
        ledger.credit(1, "art", 5.0)
        ids = ledger.add_reviewers(5)
        assert list(ids) == [2, 3, 4, 5, 6]
        assert len(ledger) == 7
        assert ledger.expertise(1, "art") == 5.0
        assert ledger.expertise(6, "art") == 0.0

    def test_unknown_reviewer_and_area(self):
        """Test unknown ids raise ArgumentError"""
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(2)
        with pytest.raises(ArgumentError):
            ledger.expertise(2, "art")
        with pytest.raises(ArgumentError):
            ledger.expertise(0, "music")

    def test_negative_credit_rejected(self):
        """Test expertise never decreases through credit"""
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(1)
        with pytest.raises(ArgumentError):
            ledger.credit(0, "art", -1.0)

    def test_expertise_vector_is_read_only(self):
        """Test the exposed vector cannot be written through"""
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(3)
        with pytest.raises(ValueError):
            ledger.expertise_vector("art")[0] = 1.0

    def test_investments_visible_after_commit(self):
        """Test staged endorsements reach the snapshot only after a commit"""
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(3)
        ledger.record_investment(0, 2)
        assert ledger.invshare(0, 2) == 1
        assert ledger.invshare_snapshot(0, 2) == 0
        assert ledger.commit_investments() == 1
        assert ledger.invshare_snapshot(0, 2) == 1
        assert ledger.investor_snapshot(2) == {0: 1}

    def test_self_investment_rejected(self):
        """Test a reviewer cannot invest in themselves"""
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(2)
        with pytest.raises(ArgumentError):
            ledger.record_investment(1, 1)

    def test_investors_as_of_earlier_epoch(self):
        """Test later commits are taken back out of an earlier view"""
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(4)
        ledger.record_investment(0, 3)
        ledger.commit_investments()
        epoch = ledger.epoch
        ledger.record_investment(1, 3)
        ledger.record_investment(0, 3)
        ledger.commit_investments()
        assert ledger.investor_snapshot(3) == {0: 2, 1: 1}
        assert ledger.investor_snapshot(3, as_of=epoch) == {0: 1}

    def test_copy_and_equals(self):
        """Test copies compare equal until one diverges"""
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(3)
        ledger.credit(2, "art", 1.5)
        clone = ledger.copy()
        assert clone.equals(ledger)
        clone.credit(0, "art", 1.0)
        assert not clone.equals(ledger)


class TestExpertSelection:
    """Tests for select_experts and burn_expertise"""

    def test_top_k_with_id_tie_break(self):
        """Test ties go to the smaller id"""
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(5)
        for reviewer, amount in {0: 1.0, 1: 3.0, 2: 3.0, 3: 2.0}.items():
            ledger.credit(reviewer, "art", amount)
        assert select_experts(ledger, "art", 3) == [1, 2, 3]

    def test_zero_expertise_fills_by_id(self):
        """Test zero-expertise reviewers fill remaining seats in id order"""
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(5)
        ledger.credit(4, "art", 1.0)
        assert select_experts(ledger, "art", 3) == [4, 0, 1]

    def _ledger(self):
        ledger = ExpertiseLedger(["art"])
        ledger.add_reviewers(5)
        ledger.credit(4, "art", 10.0)
        return ledger

    def test_majority_burns(self):
        """Test a strict majority of experts burns the target"""
        ledger = self._ledger()
        result = burn_expertise(ledger, 4, [0, 1], [0, 1, 2], "art", IncentiveParams())
        assert result.applied
        assert result.before == 10.0
        assert ledger.expertise(4, "art") == 0.0

    def test_half_does_not_burn(self):
        """Test exactly half of the experts is not a majority"""
        ledger = self._ledger()
        result = burn_expertise(ledger, 4, [0], [0, 1], "art", IncentiveParams())
        assert not result.applied
        assert ledger.expertise(4, "art") == 10.0

    def test_partial_burn_fraction(self):
        """Test burn_fraction below one keeps the rest"""
        ledger = self._ledger()
        burn_expertise(ledger, 4, [0, 1], [0, 1, 2], "art", IncentiveParams(burn_fraction=0.25))
        assert ledger.expertise(4, "art") == pytest.approx(7.5)

    def test_outsider_vote_rejected(self):
        """Test only current experts may vote"""
        with pytest.raises(ArgumentError):
            burn_expertise(self._ledger(), 4, [0, 3], [0, 1, 2], "art", IncentiveParams())
