"""Change-of-variables estimators, Yudovich arithmetic, singular demo."""

import math

import numpy as np
import pytest

from gbbmlab.flow import GbbmParams, evolve_modes, free_evolution, integrate
from gbbmlab.measures import MeasureSpec, log_gaussian_weight, sample_mu_s
from gbbmlab.spectral import SpectralField
from gbbmlab.transport import (
    EstimateWithError,
    SetSpec,
    fitted_growth_exponent,
    holder_exponent_check,
    holder_ratio_constant,
    measure_probability,
    pushforward_mass,
    radon_nikodym_weight,
    set_contains,
    singular_pairing_sums,
    singular_partial_sums,
    transported_probability_direct,
    transported_probability_weighted,
    yudovich_bound,
)

from conftest import random_field


class TestSetSpec:
    def test_ball_contains_zero(self):
        A = SetSpec.sobolev_ball(1.0, 10.0)
        assert set_contains(A, SpectralField.zeros(4))

    def test_half_space_example(self):
        A = SetSpec.half_space(1, "re", 0.0)
        assert not set_contains(A, SpectralField.from_modes({1: 1.0}))
        assert set_contains(A, SpectralField.from_modes({1: -1.0}))

    def test_ball_invariant_under_free_evolution(self):
        A = SetSpec.sobolev_ball(1.5, 2.0)
        u = random_field(1, 8, scale=0.3)
        for t in (0.4, 5.0):
            assert set_contains(A, u) == set_contains(A, free_evolution(u, 2.0, t))

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            SetSpec(kind="simplex")


class TestEstimateWithError:
    def test_agreement_helper(self):
        a = EstimateWithError(0.5, 0.01, 100, 0)
        b = EstimateWithError(0.52, 0.01, 100, 1)
        assert a.agrees_with(b)
        c = EstimateWithError(0.6, 0.01, 100, 2)
        assert not a.agrees_with(c)


class TestRadonNikodymWeight:
    def test_identity_at_zero_time(self):
        p = GbbmParams(2.0, 1, 8)
        u = random_field(2, 8, scale=0.3)
        assert radon_nikodym_weight(u, p, 0.0) == 1.0

    def test_linear_flow_has_unit_weight(self):
        # S(t) is an H^{s+gamma/2} isometry, so the weight of the free
        # evolution alone is exactly 1
        spec = MeasureSpec(1, 2.0, 8)
        u = sample_mu_s(spec, 3)
        for t in (0.6, -2.0):
            diff = log_gaussian_weight(free_evolution(u, 2.0, t), spec) \
                - log_gaussian_weight(u, spec)
            assert abs(diff) < 1e-12

    def test_inverse_flow_cancels(self):
        p = GbbmParams(2.0, 1, 6)
        u = sample_mu_s(MeasureSpec(1, 2.0, 6), 4)
        t, dt = 0.5, 1e-3
        w_fwd = radon_nikodym_weight(u, p, t, dt)
        moved = SpectralField(evolve_modes(u.coeffs, p, t, dt))
        w_back = radon_nikodym_weight(moved, p, -t, dt)
        assert w_fwd * w_back == pytest.approx(1.0, abs=1e-8)

    def test_group_property(self):
        p = GbbmParams(2.0, 1, 6)
        u = sample_mu_s(MeasureSpec(1, 2.0, 6), 5)
        t1, t2, dt = 0.3, 0.4, 1e-3
        w_total = radon_nikodym_weight(u, p, t1 + t2, dt)
        moved = SpectralField(evolve_modes(u.coeffs, p, t1, dt))
        w_split = radon_nikodym_weight(u, p, t1, dt) * radon_nikodym_weight(moved, p, t2, dt)
        assert w_total == pytest.approx(w_split, abs=1e-6)


class TestEstimators:
    def test_t_zero_direct_equals_plain(self):
        spec = MeasureSpec(1, 2.0, 4, r=20.0)
        p = GbbmParams(2.0, 1, 4)
        A = SetSpec.sobolev_ball(1.0, 1.0)
        direct = transported_probability_direct(A, spec, p, 0.0, 2000, 17)
        plain = measure_probability(A, spec, 2000, 17)
        assert direct.value == plain.value and direct.stderr == plain.stderr

    def test_t_zero_weighted_equals_plain(self):
        spec = MeasureSpec(1, 2.0, 4, r=20.0)
        p = GbbmParams(2.0, 1, 4)
        A = SetSpec.sobolev_ball(1.0, 1.0)
        weighted = transported_probability_weighted(A, spec, p, 0.0, 2000, 17)
        plain = measure_probability(A, spec, 2000, 17)
        assert weighted.value == plain.value

    def test_full_space_no_cutoff_is_one(self):
        spec = MeasureSpec(1, 2.0, 4)
        p = GbbmParams(2.0, 1, 4)
        A = SetSpec.sobolev_ball(1.0, math.inf)
        est = transported_probability_direct(A, spec, p, 0.0, 1000, 3)
        assert est.value == 1.0 and est.stderr == 0.0

    def test_cross_estimator_identity(self):
        # the change-of-variables identity, small configuration
        spec = MeasureSpec(1, 2.0, 4, r=20.0)
        p = GbbmParams(2.0, 1, 4)
        A = SetSpec.sobolev_ball(1.0, 1.0)
        t, M = 0.3, 20_000
        direct = transported_probability_direct(A, spec, p, t, M, 23)
        weighted = transported_probability_weighted(A, spec, p, t, M, 23)
        assert direct.agrees_with(weighted)
        assert direct.stderr > 0 and weighted.stderr > 0

    def test_pushforward_mass_is_one(self):
        spec = MeasureSpec(1, 2.0, 4)
        p = GbbmParams(2.0, 1, 4)
        est = pushforward_mass(spec, p, 0.4, 20_000, 29)
        assert abs(est.value - 1.0) <= 3.0 * est.stderr

    def test_sample_floor_enforced(self):
        spec = MeasureSpec(1, 2.0, 4)
        p = GbbmParams(2.0, 1, 4)
        with pytest.raises(ValueError):
            transported_probability_direct(
                SetSpec.sobolev_ball(1.0, 1.0), spec, p, 0.1, 10, 0)

    def test_incompatible_spec_rejected(self):
        spec = MeasureSpec(2, 2.0, 4)
        p = GbbmParams(2.0, 1, 4)
        with pytest.raises(ValueError):
            transported_probability_direct(
                SetSpec.sobolev_ball(1.0, 1.0), spec, p, 0.1, 1000, 0)


class TestYudovichBound:
    def test_direct_arithmetic(self):
        # (2 + log 1)^{1/2} = sqrt(2); bound = exp(e sqrt 2)
        assert yudovich_bound(1.0, 1.0, 1.0, 0.5) == pytest.approx(
            46.72274206040535, rel=1e-12)

    def test_zero_time(self):
        assert yudovich_bound(0.37, 0.0, 5.0, 0.5) == 0.37

    def test_log_grid_point(self):
        # m = e^{-2}: (2+2)^{1/2} = 2, bound = e^{2e-2}
        assert yudovich_bound(math.exp(-2.0), 1.0, 1.0, 0.5) == pytest.approx(
            31.079973004503163, rel=1e-12)

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            yudovich_bound(0.0, 1.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            yudovich_bound(0.5, 1.0, 1.0, 1.5)
        with pytest.raises(ValueError):
            yudovich_bound(0.5, -1.0, 1.0, 0.5)


class TestHolderExponentCheck:
    def test_single_point(self):
        assert holder_exponent_check([1.0], 1.0, 1.0, 0.5, 0.1)

    def test_geometric_grid_passes(self):
        grid = [math.exp(-k) for k in range(41)]
        assert holder_exponent_check(grid, 1.0, 1.0, 0.5, 0.1)
        assert math.isfinite(holder_ratio_constant(grid, 1.0, 1.0, 0.5, 0.1))

    def test_delta_zero_fails(self):
        grid = [math.exp(-k) for k in range(41)]
        assert not holder_exponent_check(grid, 1.0, 1.0, 0.5, 0.0)

    def test_constant_dominates_grid(self):
        grid = [math.exp(-k) for k in range(41)]
        c = holder_ratio_constant(grid, 1.0, 1.0, 0.5, 0.1)
        for m in grid:
            assert yudovich_bound(m, 1.0, 1.0, 0.5) <= c * m ** 0.9 * (1 + 1e-12)


class TestSingularDemo:
    def test_summand_closed_form(self):
        # each H^{s+gamma/2} summand is 4 sin^2(t omega_n / 2)
        gamma, s, t = 1.4, 1, 1.0
        Ns = [2, 4, 8, 16]
        sums = singular_partial_sums(gamma, s, t, Ns)
        n = np.arange(1, 17, dtype=float)
        w = n / (1.0 + n ** gamma)
        oracle = np.cumsum(4.0 * np.sin(t * w / 2.0) ** 2)
        assert np.allclose(sums, [oracle[N - 1] for N in Ns], rtol=1e-12)

    def test_summand_asymptotics(self):
        # tail summand ~ t^2 n^{2 - 2 gamma}
        gamma, t = 1.4, 1.0
        big = singular_partial_sums(gamma, 1, t, [2 ** 14 - 1, 2 ** 14])
        summand = big[1] - big[0]
        n = float(2 ** 14)
        assert summand == pytest.approx(t * t * n ** (2.0 - 2.0 * gamma), rel=0.01)

    def test_divergent_slope(self):
        Ns = [2 ** k for k in range(6, 15)]
        sums = singular_partial_sums(1.4, 1, 1.0, Ns)
        assert np.all(np.diff(sums) > 0)
        exponent = fitted_growth_exponent(Ns, sums)
        assert exponent == pytest.approx(0.2, abs=0.05)

    def test_convergent_control(self):
        Ns = [2 ** k for k in range(6, 15)]
        sums = singular_partial_sums(1.6, 1, 1.0, Ns, enforce_range=False)
        exponent = fitted_growth_exponent(Ns, sums)
        assert exponent == pytest.approx(3.0 - 2.0 * 1.6, abs=0.05)
        assert exponent < 0.0
        # increments die out like N^{-0.2}: the series converges
        inc = np.diff(sums)
        assert inc[-1] < 0.5 * inc[0]

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="4/3"):
            singular_partial_sums(1.6, 1, 1.0, [64, 128])
        with pytest.raises(ValueError):
            singular_partial_sums(1.4, 1, 0.0, [64, 128])

    def test_pairing_witness_diverges(self):
        Ns = [2 ** k for k in range(6, 15)]
        pairing = singular_pairing_sums(1.4, 1, 1.0, Ns)
        assert pairing[-1] > pairing[0]
        assert pairing[-1] > 1.5 * pairing[len(Ns) // 2]


class TestChiInvarianceAlongFlow:
    def test_direct_estimator_consistent_with_trajectory(self):
        # chi_r computed before and after the backward flow agrees
        spec = MeasureSpec(1, 2.0, 4, r=20.0)
        p = GbbmParams(2.0, 1, 4)
        u = sample_mu_s(spec, 77)
        traj = integrate(u, p, 0.5, 1e-3, record_every=50)
        from gbbmlab.measures import cutoff_chi_r

        flags = {cutoff_chi_r(state, spec) for state in traj.states}
        assert len(flags) == 1
