import math

import numpy as np
import pytest

from bergmanlab.errors import ConvergenceError, DomainError
from bergmanlab.quadrature import (
    CumulativeTables,
    RadialGrid,
    fit_tail,
    gauss_rule,
    integrate,
)


def invlog_density(s):
    # 1 / ((1-s) * (1 - log(1-s))^2); integrates to exactly 1 on [0, 1)
    t = 1.0 - np.log1p(-s)
    return 1.0 / ((1.0 - s) * t * t)


class TestGaussRule:
    def test_weights_sum_to_two(self):
        for n in (2, 8, 16):
            _, w = gauss_rule(n)
            assert math.fsum(w) == pytest.approx(2.0, rel=1e-15)

    def test_polynomial_exactness(self):
        # n nodes integrate degree 2n-1 exactly
        x, w = gauss_rule(6)
        for k in range(12):
            exact = (1.0 - (-1.0) ** (k + 1)) / (k + 1)
            assert np.dot(w, x**k) == pytest.approx(exact, abs=5e-15)

    def test_rejects_bad_count(self):
        with pytest.raises(DomainError):
            gauss_rule(0)


class TestFitTail:
    def test_power_model_exact(self):
        # suffix of (1-s)^(-1/2) beyond 1-u0 is 2*sqrt(u0)
        fit = fit_tail(lambda s: (1.0 - s) ** -0.5, 2.0**-10)
        assert fit.model == "power"
        assert fit.value == pytest.approx(2.0 * 2.0**-5, rel=1e-12)

    def test_log_power_model_exact(self):
        # suffix of the inverse-log density beyond 1-u0 is 1/(1 - log u0)
        u0 = 2.0**-12
        fit = fit_tail(invlog_density, u0)
        assert fit.model == "log-power"
        assert fit.value == pytest.approx(1.0 / (1.0 - math.log(u0)), rel=1e-12)

    def test_log_divergence_detected(self):
        fit = fit_tail(lambda s: 1.0 / ((1.0 - s) * (1.0 - np.log1p(-s))), 2.0**-10)
        assert fit.model == "divergent"
        assert math.isinf(fit.value)

    def test_zero_integrand(self):
        fit = fit_tail(lambda s: np.zeros_like(s), 2.0**-10)
        assert fit.value == 0.0 and fit.model == "zero"

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            fit_tail(lambda s: -np.ones_like(s), 2.0**-10)

    def test_bad_cut_rejected(self):
        with pytest.raises(DomainError):
            fit_tail(lambda s: np.ones_like(s), 0.7)


class TestIntegrate:
    def test_linear(self):
        assert integrate(lambda s: s, 0.0, 1.0) == pytest.approx(0.5, rel=1e-13)

    def test_quintic(self):
        assert integrate(lambda s: s**5, 0.0, 1.0) == pytest.approx(1.0 / 6.0, rel=1e-13)

    def test_interior_interval(self):
        got = integrate(lambda s: 1.0 / (1.0 - s), 0.0, 0.5, tol=1e-12)
        assert got == pytest.approx(math.log(2.0), rel=1e-12)

    def test_endpoint_singularity(self):
        got = integrate(lambda s: (1.0 - s) ** -0.5, 0.0, 1.0, tol=1e-9)
        assert got == pytest.approx(2.0, rel=1e-9)

    def test_log_tail_mass_not_dropped(self):
        # total mass 1, about 5% of it beyond dyadic level 46
        got = integrate(invlog_density, 0.0, 1.0, tol=1e-10)
        assert got == pytest.approx(1.0, rel=1e-9)

    def test_divergent_returns_inf(self):
        got = integrate(
            lambda s: 1.0 / ((1.0 - s) * (1.0 - np.log1p(-s))), 0.0, 1.0
        )
        assert math.isinf(got)

    def test_deterministic_bits(self):
        a = integrate(invlog_density, 0.0, 1.0, tol=1e-10)
        b = integrate(invlog_density, 0.0, 1.0, tol=1e-10)
        assert a == b

    def test_budget_exhaustion_carries_best(self):
        with pytest.raises(ConvergenceError) as exc:
            integrate(lambda s: 1.0 + np.cos(2000.0 * s), 0.0, 1.0, tol=1e-14)
        assert exc.value.best is not None and math.isfinite(exc.value.best)
        assert exc.value.achieved > 1e-14

    def test_bad_interval(self):
        with pytest.raises(DomainError):
            integrate(lambda s: s, 0.5, 0.5)
        with pytest.raises(DomainError):
            integrate(lambda s: s, -0.1, 1.0)


class TestRadialGrid:
    def test_boundaries(self, grid16):
        assert grid16.boundaries[0] == 0.0
        assert grid16.cut == 1.0 - 2.0**-16
        assert np.all(np.diff(grid16.boundaries) > 0)
        assert len(grid16.boundaries) == grid16.levels + 1

    def test_nodes_sorted_inside_panels(self, grid16):
        assert np.all(np.diff(grid16.nodes) > 0)
        assert grid16.nodes[0] > 0.0 and grid16.nodes[-1] < grid16.cut
        assert np.all(grid16.weights > 0)

    def test_weights_sum_to_cut(self, grid16):
        assert math.fsum(grid16.weights) == pytest.approx(grid16.cut, rel=1e-14)

    def test_extra_panel(self, grid16):
        lo, hi = grid16.cut, 1.0 - 2.0 ** -(grid16.levels + 1)
        assert np.all((grid16.extra_nodes > lo) & (grid16.extra_nodes < hi))
        assert math.fsum(grid16.extra_weights) == pytest.approx(hi - lo, rel=1e-14)

    def test_panel_of(self, grid16):
        assert grid16.panel_of(0.0) == 0
        assert grid16.panel_of(0.25) == 0
        assert grid16.panel_of(0.5) == 1
        assert grid16.panel_of(grid16.cut) == grid16.levels - 1
        with pytest.raises(DomainError):
            grid16.panel_of(grid16.cut + 1e-9)

    def test_build_validation(self):
        with pytest.raises(DomainError):
            RadialGrid.build(levels=1)
        with pytest.raises(DomainError):
            RadialGrid.build(levels=64)
        with pytest.raises(DomainError):
            RadialGrid.build(nodes_per_panel=1)


class TestCumulativeTables:
    def test_constant_total_is_one(self, grid16):
        tab = CumulativeTables(lambda s: np.ones_like(s), grid16)
        assert tab.total == pytest.approx(1.0, rel=1e-12)
        assert tab.extra_panel == pytest.approx(2.0 ** -(grid16.levels + 1), rel=1e-12)

    def test_prefix_at_boundaries_and_interior(self, grid16):
        tab = CumulativeTables(lambda s: np.ones_like(s), grid16)
        assert tab.prefix(0.0) == 0.0
        assert tab.prefix(0.5) == pytest.approx(0.5, rel=1e-13)
        assert tab.prefix(0.25) == pytest.approx(0.25, rel=1e-13)
        assert tab.suffix(0.75) == pytest.approx(0.25, rel=1e-12)

    def test_prefix_plus_suffix_constant(self, grid16):
        tab = CumulativeTables(invlog_density, grid16)
        for r in (0.0, 0.3, 0.75, grid16.cut):
            assert tab.prefix(r) + tab.suffix(r) == pytest.approx(tab.total, rel=1e-10)

    def test_invlog_total_and_deep_suffix(self, grid24):
        # suffix at 1-2^-10 equals 1/(1 + 10 log 2); nearly half the
        # remaining mass lies beyond the grid cut and comes from the model
        tab = CumulativeTables(invlog_density, grid24)
        assert tab.tail_model == "log-power"
        assert tab.total == pytest.approx(1.0, rel=1e-9)
        b10 = 1.0 - 2.0**-10
        assert tab.suffix(b10) == pytest.approx(1.0 / (1.0 + 10.0 * math.log(2.0)), rel=1e-9)

    def test_node_prefix_mid_tracks_integral(self, grid16):
        tab = CumulativeTables(lambda s: np.ones_like(s), grid16)
        assert np.max(np.abs(tab.node_prefix_mid - grid16.nodes)) < 0.02

    def test_rejects_negative_and_scalar(self, grid16):
        with pytest.raises(DomainError):
            CumulativeTables(lambda s: -np.ones_like(s), grid16)
        with pytest.raises(DomainError):
            CumulativeTables(lambda s: 1.0, grid16)
