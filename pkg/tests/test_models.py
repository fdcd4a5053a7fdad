"""Nonlinear terms: vanishing cases, exact cancellations, operator composition."""

import numpy as np
import pytest
from conftest import random_coefficients, random_solenoidal_field, rel, sample

from mnsflow import _fft
from mnsflow import operators as ops
from mnsflow.diagnostics import cancellation_check
from mnsflow.initial import abc_flow, taylor_green
from mnsflow.models import (
    ModelKind,
    NonSolenoidalError,
    nonlinear_hall,
    nonlinear_mns,
    nonlinear_ns_convective,
    nonlinear_ns_rotational,
    require_solenoidal,
    rhs_nonstiff,
)
from mnsflow.spectral import Grid, dealias, forward_transform, l2_inner, l2_norm

ALL = list(ModelKind)


def product_from_operators(grid, vh):
    """dealias(F[v × curl v]) assembled from the public numpy operators."""
    v = _fft.irfft3(vh, grid.n)
    w = _fft.irfft3(ops.curl_vec(grid, vh), grid.n)
    cross = np.stack([v[1] * w[2] - v[2] * w[1], v[2] * w[0] - v[0] * w[2],
                      v[0] * w[1] - v[1] * w[0]])
    return dealias(grid, forward_transform(grid, cross))


class TestModelKind:
    def test_codes_stable(self):
        assert [m.code for m in ModelKind] == [0, 1, 2, 3]
        assert ModelKind.from_code(0) is ModelKind.MNS
        assert ModelKind.from_code(3) is ModelKind.HALL

    def test_parse(self):
        assert ModelKind.parse(" MNS ") is ModelKind.MNS
        assert ModelKind.parse(ModelKind.HALL) is ModelKind.HALL

    def test_unknown(self):
        with pytest.raises(ValueError, match="unknown model"):
            ModelKind.parse("euler")
        with pytest.raises(ValueError):
            ModelKind.from_code(7)
        with pytest.raises(ValueError, match="unknown model"):
            rhs_nonstiff("euler", Grid(8), np.zeros((3,) + Grid(8).spectral_shape))


class TestVanishing:
    @pytest.mark.parametrize("model", ALL)
    def test_abc_gives_zero(self, model, grid16):
        n = rhs_nonstiff(model, grid16, abc_flow(grid16, 1.0, 0.7, -0.4))
        assert np.abs(n).max() <= 1e-14

    @pytest.mark.parametrize("model", ALL)
    def test_zero_gives_zero(self, model, grid16):
        zero = np.zeros((3,) + grid16.spectral_shape, dtype=complex)
        assert np.all(rhs_nonstiff(model, grid16, zero) == 0)

    @pytest.mark.parametrize("model", ALL)
    def test_shear_flow_gradient_product(self, model, grid16):
        # v = (f(y), 0, 0) has v × ω = ∇(f²/2): annihilated by P, R× and curl alike
        vh = dealias(grid16, sample(grid16, lambda x, y, z: (np.sin(y) + 0.3 * np.cos(2 * y),
                                                             0 * x, 0 * x)))
        prod = product_from_operators(grid16, vh)
        assert l2_norm(grid16, prod) > 0.1
        n = rhs_nonstiff(model, grid16, vh)
        assert l2_norm(grid16, n) <= 1e-14 * l2_norm(grid16, prod)


class TestCancellation:
    @pytest.mark.parametrize("model", ALL)
    def test_taylor_green(self, model, grid32):
        v = taylor_green(grid32)
        nh = rhs_nonstiff(model, grid32, v)
        w = ops.lambda_pow(grid32, v, 1.0) if model is ModelKind.MNS else v
        inner = l2_inner(grid32, nh, w)
        assert abs(inner) <= 1e-12 * l2_norm(grid32, nh) * l2_norm(grid32, w)
        assert cancellation_check(model, grid32, v, nh) <= 1e-12

    @pytest.mark.parametrize("model", ALL)
    @pytest.mark.parametrize("sign", [1, -1])
    def test_random(self, model, sign, grid32, rng):
        v = random_solenoidal_field(grid32, rng)
        assert cancellation_check(model, grid32, v, sign=sign) <= 1e-12

    def test_mns_l2_pairing_not_zero(self, grid16, rng):
        # only the Λ-weighted pairing cancels for mNS
        v = random_solenoidal_field(grid16, rng)
        nh = nonlinear_mns(grid16, v)
        assert abs(l2_inner(grid16, nh, v)) > 1e-6 * l2_norm(grid16, nh) * l2_norm(grid16, v)


class TestStructure:
    @pytest.mark.parametrize("model", ALL)
    def test_solenoidal_dealiased_mean_free(self, model, grid16, rng):
        v = random_solenoidal_field(grid16, rng)
        nh = rhs_nonstiff(model, grid16, v)
        assert l2_norm(grid16, ops.divergence(grid16, nh)) <= 1e-13 * l2_norm(grid16, nh)
        assert np.all(nh[:, 0, 0, 0] == 0)
        assert np.all(nh[:, ~grid16.dealias_mask] == 0)

    def test_rotational_equals_convective(self, grid32, rng):
        for _ in range(5):
            v = random_solenoidal_field(grid32, rng)
            conv = nonlinear_ns_convective(grid32, v)
            assert rel(conv, nonlinear_ns_rotational(grid32, v)) <= 1e-12

    @pytest.mark.parametrize("sign", [1, -1])
    def test_mns_matches_operator_composition(self, sign, grid16, rng):
        v = random_solenoidal_field(grid16, rng)
        expected = -ops.riesz_cross(grid16, product_from_operators(grid16, v), sign)
        assert rel(nonlinear_mns(grid16, v, sign=sign), expected) <= 1e-13

    def test_ns_rotational_matches_operator_composition(self, grid16, rng):
        v = random_solenoidal_field(grid16, rng)
        expected = ops.leray_project(grid16, product_from_operators(grid16, v))
        assert rel(nonlinear_ns_rotational(grid16, v), expected) <= 1e-13

    def test_hall_matches_operator_composition(self, grid16, rng):
        b = random_solenoidal_field(grid16, rng)
        expected = -ops.curl_vec(grid16, product_from_operators(grid16, b))
        assert rel(nonlinear_hall(grid16, b), expected) <= 1e-13

    def test_convective_matches_advection(self, grid16, rng):
        v = random_solenoidal_field(grid16, rng)
        u = _fft.irfft3(v, grid16.n)
        grad = [_fft.irfft3(ops.partial(grid16, v, j), grid16.n) for j in range(3)]
        adv = sum(u[j] * grad[j] for j in range(3))
        expected = -ops.leray_project(grid16, dealias(grid16, forward_transform(grid16, adv)))
        assert rel(nonlinear_ns_convective(grid16, v), expected) <= 1e-13

    def test_sign_flips_mns(self, grid16, rng):
        v = random_solenoidal_field(grid16, rng)
        np.testing.assert_allclose(nonlinear_mns(grid16, v, sign=-1),
                                   -nonlinear_mns(grid16, v, sign=1), rtol=0, atol=1e-15)


class TestRequireSolenoidal:
    def test_rejects_divergent(self, grid16, rng):
        v = random_coefficients(grid16, rng) * grid16.dealias_mask
        with pytest.raises(NonSolenoidalError, match="relative divergence"):
            rhs_nonstiff(ModelKind.MNS, grid16, v)

    def test_rejects_undealiased(self, grid16, rng):
        v = random_solenoidal_field(grid16, rng, dealiased=False)
        with pytest.raises(ValueError, match="dealiased band"):
            require_solenoidal(grid16, v)

    def test_accepts_taylor_green(self, grid16):
        require_solenoidal(grid16, taylor_green(grid16))

    def test_check_can_be_skipped(self, grid16, rng):
        v = random_coefficients(grid16, rng) * grid16.dealias_mask
        rhs_nonstiff(ModelKind.HALL, grid16, v, check=False)
