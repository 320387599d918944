"""Heat-semigroup quadrature checks: Gaussian moments, characteristic-function
oracles, finite-difference cross-checks, and the regression identity."""

import math

import numpy as np
import pytest

from rlforward import HurstConfig, sigma2_cond, theta_var
from rlforward.gauss import (
    QuadratureRule,
    converged_order,
    default_rule,
    heat_apply,
    heat_d2x,
    heat_dx,
    regression_mean_phi1,
)

CFG = HurstConfig(H=0.75, T=1.0)
RULE = default_rule()

g_lin = lambda t, x: np.asarray(x, dtype=float)  # noqa: E731
g_sq = lambda t, x: np.asarray(x, dtype=float) ** 2  # noqa: E731
g_cube = lambda t, x: np.asarray(x, dtype=float) ** 3  # noqa: E731
g_cos = lambda t, x: np.cos(x)  # noqa: E731


class TestRule:
    @pytest.mark.parametrize("order", [8, 16, 64, 128])
    def test_normal_moments(self, order):
        rule = default_rule(order)
        assert abs(np.sum(rule.weights) - 1.0) < 1e-12
        assert abs(np.sum(rule.weights * rule.nodes)) < 1e-10
        assert abs(np.sum(rule.weights * rule.nodes**2) - 1.0) < 1e-10

    def test_bad_weights_rejected(self):
        with pytest.raises(ValueError):
            QuadratureRule(nodes=np.zeros(4), weights=np.ones(4), order=4)


class TestHeatApply:
    def test_linear_exact(self):
        for s in (0.01, 0.3, 1.0):
            assert heat_apply(g_lin, 0.0, 1.7, s, RULE) == pytest.approx(1.7, abs=1e-13)

    def test_square_adds_variance(self):
        assert heat_apply(g_sq, 0.0, 2.0, 0.7, RULE) == pytest.approx(4.7, rel=1e-13)

    def test_cosine_characteristic_function(self):
        rule = default_rule(20)
        for s in (0.1, 0.5, 1.0):
            for x in (-1.2, 0.0, 0.8):
                expected = math.cos(x) * math.exp(-s / 2.0)
                assert heat_apply(g_cos, 0.0, x, s, rule) == pytest.approx(
                    expected, abs=1e-8
                )

    def test_rejects_nonpositive_s(self):
        with pytest.raises(ValueError):
            heat_apply(g_lin, 0.0, 0.0, 0.0, RULE)
        with pytest.raises(ValueError):
            heat_apply(g_lin, 0.0, 0.0, -1.0, RULE)

    def test_tiny_s_is_identity(self):
        assert heat_apply(g_sq, 0.0, 3.0, 1e-13, RULE) == 9.0


class TestHeatDerivatives:
    def test_dx_linear(self):
        for s in (0.05, 1.0):
            assert heat_dx(g_lin, 0.0, -0.3, s, RULE) == pytest.approx(1.0, abs=1e-12)

    def test_dx_square(self):
        assert heat_dx(g_sq, 0.0, 1.3, 0.4, RULE) == pytest.approx(2.6, rel=1e-12)

    def test_dx_cosine(self):
        for s in (0.2, 0.9):
            for x in (0.4, -1.1):
                assert heat_dx(g_cos, 0.0, x, s, RULE) == pytest.approx(
                    -math.sin(x) * math.exp(-s / 2.0), abs=1e-10
                )

    def test_d2x_square(self):
        assert heat_d2x(g_sq, 0.0, 5.0, 0.3, RULE) == pytest.approx(2.0, rel=1e-10)

    def test_d2x_linear_vanishes(self):
        assert heat_d2x(g_lin, 0.0, 5.0, 0.3, RULE) == pytest.approx(0.0, abs=1e-10)

    def test_d2x_cosine(self):
        assert heat_d2x(g_cos, 0.0, 0.7, 0.5, RULE) == pytest.approx(
            -math.cos(0.7) * math.exp(-0.25), abs=1e-9
        )

    def test_derivatives_reject_tiny_s(self):
        with pytest.raises(ValueError):
            heat_dx(g_lin, 0.0, 0.0, 1e-13, RULE)
        with pytest.raises(ValueError):
            heat_d2x(g_lin, 0.0, 0.0, 0.0, RULE)

    def test_dx_matches_finite_difference(self):
        h = 1e-5
        for g in (g_sq, g_cos, g_cube):
            for (x, s) in [(0.3, 0.4), (-0.9, 0.15)]:
                fd = (
                    heat_apply(g, 0.0, x + h, s, RULE)
                    - heat_apply(g, 0.0, x - h, s, RULE)
                ) / (2 * h)
                assert heat_dx(g, 0.0, x, s, RULE) == pytest.approx(fd, abs=1e-5)

    def test_d2x_matches_finite_difference_of_dx(self):
        h = 1e-5
        for g in (g_sq, g_cos):
            for (x, s) in [(0.2, 0.5), (-0.4, 0.8)]:
                fd = (
                    heat_dx(g, 0.0, x + h, s, RULE) - heat_dx(g, 0.0, x - h, s, RULE)
                ) / (2 * h)
                assert heat_d2x(g, 0.0, x, s, RULE) == pytest.approx(fd, abs=1e-4)

    def test_heat_equation(self):
        # d/ds P_s g = (1/2) d_xx P_s g
        h = 1e-6
        for g in (g_cos, g_cube):
            for (x, s) in [(0.5, 0.3), (-0.2, 0.7)]:
                fd = (
                    heat_apply(g, 0.0, x, s + h, RULE)
                    - heat_apply(g, 0.0, x, s - h, RULE)
                ) / (2 * h)
                assert fd == pytest.approx(
                    0.5 * heat_d2x(g, 0.0, x, s, RULE), abs=1e-4
                )


class TestSemigroupProperty:
    @pytest.mark.parametrize("g", [g_sq, g_cube, g_cos], ids=["x2", "x3", "cos"])
    def test_composition(self, g):
        # P_r (P_s g) = P_{s+r} g
        s, r = 0.35, 0.6
        for x in (-0.8, 0.0, 1.1):
            inner = lambda t, y: np.asarray(  # noqa: E731
                [heat_apply(g, t, yv, s, RULE) for yv in np.atleast_1d(y)]
            )
            composed = heat_apply(inner, 0.0, x, r, RULE)
            direct = heat_apply(g, 0.0, x, s + r, RULE)
            assert composed == pytest.approx(direct, rel=1e-6, abs=1e-6)


class TestRegressionIdentity:
    def test_linear_gives_one(self):
        for (u, t) in [(0.2, 0.5), (0.5, 1.0), (0.05, 0.95)]:
            assert regression_mean_phi1(g_lin, t, u, CFG, RULE) == pytest.approx(
                1.0, rel=1e-12
            )

    def test_cubic_gives_three_variances(self):
        for (u, t) in [(0.3, 0.8), (0.6, 1.0)]:
            v = sigma2_cond(CFG, u, t) + theta_var(CFG, u, t)
            assert regression_mean_phi1(g_cube, t, u, CFG, RULE) == pytest.approx(
                3.0 * v, rel=1e-12
            )

    def test_cosine_vanishes_by_symmetry(self):
        assert regression_mean_phi1(g_cos, 0.9, 0.4, CFG, RULE) == pytest.approx(
            0.0, abs=1e-13
        )

    def test_domain(self):
        with pytest.raises(ValueError):
            regression_mean_phi1(g_lin, 0.5, 0.5, CFG, RULE)
        with pytest.raises(ValueError):
            regression_mean_phi1(g_lin, 0.5, 0.0, CFG, RULE)

    def test_monte_carlo_oracle(self):
        # E over draws of E^u[B_t] ~ N(0, sigma^2) of the score-form derivative
        rng = np.random.default_rng(515)
        m = 120_000
        for g, name in [(g_cube, "x3"), (g_cos, "cos")]:
            u, t = 0.4, 0.9
            s2 = sigma2_cond(CFG, u, t)
            th = theta_var(CFG, u, t)
            x = rng.standard_normal(m) * math.sqrt(s2)
            z, w = RULE.nodes, RULE.weights
            acc = np.zeros(m)
            for k in range(z.size):
                acc += (w[k] * z[k]) * np.asarray(g(t, x + math.sqrt(th) * z[k]))
            mc = acc / math.sqrt(th)
            se = mc.std(ddof=1) / math.sqrt(m)
            quad_val = regression_mean_phi1(g, t, u, CFG, RULE)
            assert abs(quad_val - mc.mean()) <= 3 * se + 1e-10, name


class TestConvergedOrder:
    def test_polynomials_converge_immediately(self):
        assert converged_order(g_sq, 0.0, 0.5, 0.7, start=16) == 16

    def test_oscillatory_needs_more_nodes(self):
        g_hard = lambda t, x: np.cos(12.0 * x)  # noqa: E731
        order = converged_order(g_hard, 0.0, 0.0, 1.0, start=8)
        assert order > 8
