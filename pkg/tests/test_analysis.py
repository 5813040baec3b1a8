import math

import pytest

from epir import analysis as an
from epir import mechanisms as m
from epir.core import ParameterError, SystemParams


class TestDirectBound:
    def test_worst_case_large_system(self):
        # ln(100001): one honest server among 100, n = 1e6, p = 1000
        assert an.eps_direct(10**6, 100, 99, 1000).epsilon == pytest.approx(
            math.log(100001), rel=1e-12
        )

    def test_half_corrupt_large_system(self):
        assert an.eps_direct(10**6, 100, 50, 1000).epsilon == pytest.approx(
            math.log(2001), rel=1e-12
        )

    def test_small_system(self):
        assert an.eps_direct(10**3, 10, 9, 10).epsilon == pytest.approx(math.log(1101), rel=1e-12)
        assert an.eps_direct(10**3, 10, 5, 10).epsilon == pytest.approx(math.log(221), rel=1e-12)

    def test_full_download_perfect(self):
        assert an.eps_direct(100, 4, 3, 100).epsilon == 0.0

    def test_all_corrupt_unbounded(self):
        assert math.isinf(an.eps_direct(100, 4, 4, 8).epsilon)

    def test_monotone_in_p(self):
        values = [an.eps_direct(10**4, 10, 5, p).epsilon for p in range(10, 10**4 + 1, 500)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_monotone_in_honest_count(self):
        values = [an.eps_direct(10**4, 10, d_a, 100).epsilon for d_a in range(9, -1, -1)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_parameter_errors(self):
        with pytest.raises(ParameterError):
            an.eps_direct(100, 4, 1, 7)  # p not a multiple of d
        with pytest.raises(ParameterError):
            an.eps_direct(100, 4, 1, 104)  # p > n
        with pytest.raises(ParameterError):
            an.eps_direct(100, 4, 5, 8)  # d_a > d


class TestBundledBound:
    def test_operating_points(self):
        assert an.eps_bundled(10**6, 100, 99, 1000, 1000).epsilon == pytest.approx(16.118, abs=5e-3)
        assert an.eps_bundled(10**6, 100, 50, 1000, 1000).epsilon == pytest.approx(8.295, abs=5e-3)

    def test_u1_doubles_direct(self):
        for (n, d, d_a, p) in [(10**6, 100, 99, 1000), (64, 4, 2, 8), (1000, 10, 3, 50)]:
            assert an.eps_bundled(n, d, d_a, p, 1).epsilon == pytest.approx(
                2 * an.eps_direct(n, d, d_a, p).epsilon, abs=1e-12
            )

    def test_monotone_in_u(self):
        values = [an.eps_bundled(10**4, 10, 5, 100, u).epsilon for u in [1, 2, 5, 10, 100, 10**4]]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestSparseBound:
    def test_one_honest_server(self):
        for d in (2, 10, 100):
            assert an.eps_sparse(0.25, d, d - 1).epsilon == pytest.approx(
                4 * math.atanh(0.5), rel=1e-12
            )

    def test_half_corrupt_large(self):
        assert an.eps_sparse(0.25, 100, 50).epsilon == pytest.approx(4 * 0.5**50, rel=1e-9)

    def test_theta_half_perfect(self):
        for d, d_a in [(2, 1), (10, 9), (100, 0)]:
            assert an.eps_sparse(0.5, d, d_a).epsilon == 0.0

    def test_all_corrupt_unbounded(self):
        assert math.isinf(an.eps_sparse(0.25, 4, 4).epsilon)

    def test_monotone_in_theta(self):
        values = [an.eps_sparse(t, 10, 9).epsilon for t in [0.05, 0.1, 0.2, 0.3, 0.4, 0.5]]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_limit_perfect_privacy(self):
        # epsilon -> 0 as the honest count grows
        assert an.eps_sparse(0.25, 10**4, 0).epsilon < 1e-300

    def test_theta_range(self):
        with pytest.raises(ParameterError):
            an.eps_sparse(0.0, 4, 2)
        with pytest.raises(ParameterError):
            an.eps_sparse(0.7, 4, 2)


class TestCompose:
    def test_u1_doubles(self):
        assert an.eps_compose(1.7, 1) == pytest.approx(3.4, abs=1e-15)

    def test_zero_stays_zero(self):
        for u in (1, 2, 1000):
            assert an.eps_compose(0.0, u) == pytest.approx(0.0, abs=1e-12)

    def test_known_point(self):
        # ln((81 + 999)/1000) for eps1 = 4*arctanh(1/2)
        eps1 = 4 * math.atanh(0.5)
        assert an.eps_compose(eps1, 1000) == pytest.approx(math.log(1.08), rel=1e-9)

    def test_monotone_and_limit(self):
        values = [an.eps_compose(3.0, u) for u in [1, 10, 100, 10**4, 10**6, 10**9]]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-6

    def test_infinite_stays_infinite(self):
        assert math.isinf(an.eps_compose(math.inf, 100))

    def test_huge_eps_no_overflow(self):
        out = an.eps_compose(500.0, 10)
        assert out == pytest.approx(1000.0 - math.log(10), rel=1e-12)


class TestAnonSparse:
    def test_operating_points(self):
        assert an.eps_anon_sparse(0.25, 100, 99, 1000).epsilon == pytest.approx(
            math.log(1.08), rel=1e-9
        )
        assert an.eps_anon_sparse(0.25, 100, 50, 1000).epsilon < 1e-15
        # exact value at (0.25, 10, 5, 1000); the loose headline figure for
        # this point is an order-of-magnitude statement
        assert an.eps_anon_sparse(0.25, 10, 5, 1000).epsilon == pytest.approx(
            2.8409e-4, rel=1e-3
        )

    def test_consistency_with_composition(self):
        for theta in (0.05, 0.25, 0.45, 0.5):
            for d, d_a in [(4, 1), (10, 5), (100, 99)]:
                for u in (1, 3, 1000):
                    direct = an.eps_anon_sparse(theta, d, d_a, u).epsilon
                    composed = an.eps_compose(an.eps_sparse(theta, d, d_a).epsilon, u)
                    assert direct == pytest.approx(composed, abs=1e-12)


class TestSubsetDelta:
    def test_worst_case(self):
        assert an.delta_subset(100, 99, 10).delta == pytest.approx(0.9, abs=1e-12)

    def test_half_corrupt(self):
        # independent route: delta = C(d_a, t) / C(d, t)
        expected = math.comb(50, 10) / math.comb(100, 10)
        got = an.delta_subset(100, 50, 10)
        assert got.delta == pytest.approx(expected, rel=1e-12)
        assert got.delta == pytest.approx(5.934e-4, rel=1e-3)
        assert got.epsilon == 0.0

    def test_more_servers_than_corrupt(self):
        for d, d_a in [(10, 5), (100, 99)]:
            assert an.delta_subset(d, d_a, d_a + 1).delta == 0.0

    def test_non_increasing_in_t(self):
        values = [an.delta_subset(20, 15, t).delta for t in range(1, 21)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_accepts_t_one(self):
        assert an.delta_subset(10, 5, 1).delta == pytest.approx(0.5, abs=1e-15)

    def test_range_errors(self):
        with pytest.raises(ParameterError):
            an.delta_subset(10, 5, 0)
        with pytest.raises(ParameterError):
            an.delta_subset(10, 5, 11)


class TestNaiveCompositionDeltas:
    def test_full_download_kills_delta0(self):
        delta_0, _ = an.naive_composition_deltas(16, 16, 5)
        assert delta_0 == 0.0

    def test_single_user_bounds_are_one(self):
        assert an.naive_composition_deltas(16, 4, 1) == (1.0, 1.0)

    def test_tiny_case(self):
        delta_0, delta_u = an.naive_composition_deltas(3, 2, 2)
        assert delta_u == pytest.approx(0.5, abs=1e-15)
        assert delta_0 == pytest.approx(0.5, abs=1e-15)

    def test_range_errors(self):
        with pytest.raises(ParameterError):
            an.naive_composition_deltas(4, 1, 2)
        with pytest.raises(ParameterError):
            an.naive_composition_deltas(4, 5, 2)


class TestCostModel:
    def setup_method(self):
        self.params = SystemParams(n=1000, d=10)

    def test_chor(self):
        cost = an.cost_model(m.Chor(), self.params, 1.0, 1.0)
        assert cost.cm_records == 10
        assert cost.cp_accesses == 5000.0
        assert cost.cp_weighted == 10000.0

    def test_direct(self):
        cost = an.cost_model(m.Direct(1000), SystemParams(n=10**6, d=100), 1.0, 1.0)
        assert cost.cm_records == 1000
        assert cost.cp_accesses == 1000.0
        assert cost.cp_weighted == 1000.0  # access cost only, no processing

    def test_sparse_half_matches_chor(self):
        sparse = an.cost_model(m.Sparse(0.5), self.params, 1.0, 2.0)
        chor = an.cost_model(m.Chor(), self.params, 1.0, 2.0)
        assert sparse == chor

    def test_subset_full_matches_chor(self):
        subset = an.cost_model(m.Subset(10), self.params, 2.0, 3.0)
        chor = an.cost_model(m.Chor(), self.params, 2.0, 3.0)
        assert subset == chor

    def test_anonymity_does_not_change_cost(self):
        assert an.cost_model(m.AnonSparse(0.2), self.params) == an.cost_model(
            m.Sparse(0.2), self.params
        )
        assert an.cost_model(m.BundledAnon(100), self.params) == an.cost_model(
            m.Direct(100), self.params
        )

    def test_naive_mechanisms(self):
        assert an.cost_model(m.NaiveDummy(40), self.params).cm_records == 40
        assert an.cost_model(m.NaiveAnon(), self.params).cp_accesses == 1.0

    def test_unknown_mechanism(self):
        with pytest.raises(ParameterError):
            an.cost_model("not-a-mechanism", self.params)


class TestPrivacyBoundType:
    def test_validation(self):
        with pytest.raises(ParameterError):
            an.PrivacyBound(-1.0)
        with pytest.raises(ParameterError):
            an.PrivacyBound(0.0, 1.5)

    def test_infinity_allowed(self):
        assert math.isinf(an.PrivacyBound(math.inf).epsilon)
