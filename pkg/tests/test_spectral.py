"""Field representation, norms, projectors, products, dyadic blocks."""

import math

import numpy as np
import pytest

from gbbmlab.spectral import (
    GridSample,
    SpectralField,
    dirichlet_project,
    dyadic_scales,
    field_from_csv,
    field_from_json,
    field_to_csv,
    field_to_json,
    fractional_derivative,
    from_grid,
    l2_inner,
    l2_norm,
    lebesgue_norm,
    lp_block,
    lp_bump,
    pointwise_product,
    sobolev_norm,
    sup_norm,
    to_grid,
    x_derivative,
)

from conftest import random_field

COS2X = SpectralField.from_modes({1: 1.0})  # the field 2 cos x


class TestSpectralField:
    def test_coefficients_immutable(self):
        u = random_field(0, 4)
        with pytest.raises(ValueError):
            u.coeffs[0] = 5.0

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SpectralField(np.array([1.0, np.nan], dtype=complex))

    def test_vector_space_ops(self):
        u = random_field(1, 5)
        v = random_field(2, 3)
        w = u + v
        assert w.n_max == 5
        assert w.coeff(2) == u.coeff(2) + v.coeff(2)
        assert np.allclose((2.0 * u).coeffs, 2.0 * u.coeffs)
        assert np.allclose((u - u).coeffs, 0.0)

    def test_from_modes_bounds(self):
        with pytest.raises(ValueError):
            SpectralField.from_modes({0: 1.0})
        u = SpectralField.from_modes({3: 2j}, n_max=5)
        assert u.n_max == 5 and u.coeff(3) == 2j


class TestSobolevNorm:
    @pytest.mark.parametrize("sigma", [-1.0, 0.0, 0.5, 3.0])
    def test_unit_mode_any_sigma(self, sigma):
        assert sobolev_norm(COS2X, sigma) == pytest.approx(1.0, abs=1e-15)

    def test_zero_field(self):
        assert sobolev_norm(SpectralField.zeros(4), 3.0) == 0.0

    def test_second_mode(self):
        u = SpectralField.from_modes({2: 1.0})
        assert sobolev_norm(u, 1.0) == pytest.approx(2.0, abs=1e-14)


class TestL2Norm:
    def test_two_cos(self):
        assert l2_norm(COS2X) == pytest.approx(3.5449077018110318, abs=1e-12)

    def test_zero(self):
        assert l2_norm(SpectralField.zeros(3)) == 0.0

    def test_two_modes(self):
        u = SpectralField.from_modes({1: 1.0, 2: 1.0})
        assert l2_norm(u) == pytest.approx(5.0132565492620005, abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_parseval_against_quadrature(self, seed):
        u = random_field(seed, 24)
        assert lebesgue_norm(u, 2.0, 2) == pytest.approx(l2_norm(u), abs=1e-10)


class TestFractionalDerivative:
    def test_half_derivative_of_first_mode(self):
        v = fractional_derivative(COS2X, 0.5)
        assert np.allclose(v.coeffs, COS2X.coeffs)

    def test_multiplier_on_second_mode(self):
        u = SpectralField.from_modes({2: 1.0})
        assert fractional_derivative(u, 1.0).coeff(2) == pytest.approx(2.0)

    def test_inverse_multipliers(self):
        u = random_field(7, 12)
        gamma = 1.7
        v = fractional_derivative(fractional_derivative(u, -gamma), gamma)
        assert np.max(np.abs(v.coeffs - u.coeffs)) < 1e-14

    def test_composition(self):
        u = random_field(8, 10)
        a, b = 0.7, -1.3
        v1 = fractional_derivative(fractional_derivative(u, a), b)
        v2 = fractional_derivative(u, a + b)
        assert np.max(np.abs(v1.coeffs - v2.coeffs)) < 1e-13

    def test_signed_derivative_is_minus_two_sin(self):
        g = to_grid(x_derivative(COS2X, 1), 4)
        x = 2.0 * np.pi * np.arange(len(g.values)) / len(g.values)
        assert np.max(np.abs(g.values + 2.0 * np.sin(x))) < 1e-12


class TestDirichletProjector:
    def test_truncates(self):
        u = SpectralField.from_modes({1: 1.0, 2: 1.0})
        v = dirichlet_project(u, 1)
        assert v.coeff(1) == 1.0 and v.coeff(2) == 0.0

    def test_identity_above_n_max(self):
        u = random_field(3, 6)
        assert np.array_equal(dirichlet_project(u, 10).coeffs, u.coeffs)

    def test_norm_nonincreasing(self):
        u = random_field(4, 16)
        for sigma in (0.0, 1.0, 2.5):
            assert sobolev_norm(dirichlet_project(u, 7), sigma) <= sobolev_norm(u, sigma)

    def test_projector_algebra_exact(self):
        u = random_field(5, 20)
        a = dirichlet_project(dirichlet_project(u, 12), 5)
        b = dirichlet_project(dirichlet_project(u, 5), 12)
        c = dirichlet_project(u, 5)
        assert np.array_equal(a.coeffs, c.coeffs)
        assert np.array_equal(b.coeffs, c.coeffs)


def _conv_oracle(u: SpectralField, v: SpectralField) -> np.ndarray:
    """O(N^2) double loop over signed modes, written independently."""
    nu, nv = u.n_max, v.n_max
    out = np.zeros(nu + nv, dtype=complex)

    def get(f, k):
        if k > 0:
            return f.coeffs[k - 1] if k <= f.n_max else 0.0
        return np.conj(f.coeffs[-k - 1]) if -k <= f.n_max else 0.0

    for n in range(1, nu + nv + 1):
        acc = 0.0 + 0.0j
        for k in range(-nu, nu + 1):
            if k == 0 or n - k == 0:
                continue
            acc += get(u, k) * get(v, n - k)
        out[n - 1] = acc
    return out


class TestPointwiseProduct:
    def test_two_cos_squared(self):
        w = pointwise_product(COS2X, COS2X)
        assert w.n_max == 2
        assert w.coeff(1) == 0.0
        assert w.coeff(2) == 1.0  # (2cos x)^2 = 2 + 2cos 2x, mean dropped

    def test_by_zero(self):
        u = random_field(6, 5)
        w = pointwise_product(u, SpectralField.zeros(5))
        assert np.all(w.coeffs == 0.0)

    @pytest.mark.parametrize("n_max", [16, 48])
    def test_against_direct_convolution(self, n_max):
        u = random_field(11, n_max)
        v = random_field(12, n_max)
        w = pointwise_product(u, v)
        oracle = _conv_oracle(u, v)
        scale = np.max(np.abs(oracle))
        assert np.max(np.abs(w.coeffs - oracle)) < 1e-12 * scale

    def test_commutative_exact(self):
        u, v = random_field(13, 40), random_field(14, 37)
        assert np.array_equal(pointwise_product(u, v).coeffs,
                              pointwise_product(v, u).coeffs)

    def test_bilinear(self):
        u, v, w = random_field(15, 10), random_field(16, 10), random_field(17, 10)
        left = pointwise_product(u + v, w)
        right = pointwise_product(u, w) + pointwise_product(v, w)
        assert np.max(np.abs(left.coeffs - right.coeffs)) < 1e-13
        scaled = pointwise_product(0.37 * u, w)
        assert np.max(np.abs(scaled.coeffs - 0.37 * pointwise_product(u, w).coeffs)) < 1e-13


class TestLittlewoodPaley:
    def test_sharp_window(self):
        u = SpectralField.from_modes({1: 1.0, 2: 1.0, 3: 1.0, 4: 1.0})
        b = lp_block(u, 2, "sharp")
        assert np.array_equal(b.coeffs, np.array([0, 1, 1, 0], dtype=complex))

    def test_sharp_blocks_reconstruct_exactly(self):
        u = random_field(21, 37)
        total = SpectralField.zeros(u.n_max)
        for lam in dyadic_scales(u.n_max):
            total = total + lp_block(u, lam, "sharp")
        assert np.array_equal(total.coeffs, u.coeffs)

    def test_sharp_blocks_orthogonal(self):
        u = random_field(22, 32)
        blocks = [lp_block(u, lam, "sharp") for lam in dyadic_scales(u.n_max)]
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                assert l2_inner(blocks[i], blocks[j]) == 0.0

    def test_smooth_partition_of_unity(self):
        n = np.arange(1, 700, dtype=float)
        total = sum(lp_bump(n / lam) for lam in dyadic_scales(1024))
        assert np.max(np.abs(total - 1.0)) < 1e-12

    def test_smooth_blocks_reconstruct(self):
        u = random_field(23, 50)
        total = SpectralField.zeros(u.n_max)
        for lam in dyadic_scales(u.n_max):
            total = total + lp_block(u, lam, "smooth")
        assert np.max(np.abs(total.coeffs - u.coeffs)) < 1e-12

    def test_rejects_non_dyadic(self):
        with pytest.raises(ValueError):
            lp_block(COS2X, 3)

    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    def test_bernstein(self, sigma):
        u = random_field(24, 64)
        for lam in dyadic_scales(u.n_max):
            b = lp_block(u, lam, "sharp")
            lhs = l2_norm(fractional_derivative(b, sigma))
            assert lhs <= 2.0 ** sigma * lam ** sigma * l2_norm(b) * (1 + 1e-12)


class TestGridSampling:
    @pytest.mark.parametrize("oversample", [2, 3])
    def test_round_trip(self, oversample):
        u = random_field(31, 20)
        v = from_grid(to_grid(u, oversample))
        scale = np.max(np.abs(u.coeffs))
        assert np.max(np.abs(v.coeffs - u.coeffs)) < 1e-12 * scale

    def test_grid_length_contract(self):
        g = to_grid(random_field(32, 10), 4)
        assert len(g.values) == 4 * 2 * 10 and g.n_max == 10

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            GridSample(2, np.ones(7))

    def test_sup_of_two_cos(self):
        assert sup_norm(COS2X, 8) == pytest.approx(2.0, abs=1e-3)

    def test_sup_zero(self):
        assert sup_norm(SpectralField.zeros(5), 4) == 0.0

    def test_sup_dominates_mean_value(self):
        for seed in (41, 42, 43):
            u = random_field(seed, 12)
            assert sup_norm(u, 8) >= l2_norm(u) / math.sqrt(2.0 * math.pi)


class TestLebesgueNorm:
    def test_quartic_of_two_cos(self):
        # int_0^{2pi} (2cos)^4 = 12 pi
        assert lebesgue_norm(COS2X, 4.0, 8) == pytest.approx(
            (12.0 * math.pi) ** 0.25, rel=1e-10)

    def test_monotone_on_probability_circle(self):
        u = random_field(44, 16)
        two_pi = 2.0 * math.pi
        normalized = [lebesgue_norm(u, p, 8) / two_pi ** (1.0 / p)
                      for p in (1.0, 2.0, 4.0, 8.0)]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(normalized, normalized[1:]))

    def test_rejects_p_below_one(self):
        with pytest.raises(ValueError):
            lebesgue_norm(COS2X, 0.5)


class TestSerialization:
    def test_json_round_trip_bit_exact(self):
        u = random_field(51, 9)
        v = field_from_json(field_to_json(u))
        assert np.array_equal(u.coeffs, v.coeffs)

    def test_csv_round_trip_bit_exact(self):
        u = random_field(52, 9)
        v = field_from_csv(field_to_csv(u))
        assert np.array_equal(u.coeffs, v.coeffs)

    def test_awkward_values_survive(self):
        u = SpectralField(np.array([0.1 + (1 / 3) * 1j, 1e-300 + 0j, 7e88 + 1e-17j]))
        assert np.array_equal(field_from_csv(field_to_csv(u)).coeffs, u.coeffs)
        assert np.array_equal(field_from_json(field_to_json(u)).coeffs, u.coeffs)

    def test_json_is_triples(self):
        import json

        doc = json.loads(field_to_json(SpectralField.from_modes({2: 1 + 2j})))
        assert doc == [[1, 0.0, 0.0], [2, 1.0, 2.0]]
