"""Kernel series, circle means, mean tables, norms, and ratio sweeps.

Standard weights have everything in closed form: coefficients are the
binomial sequence with a_0 = 1, the kernel is (1 - conj(z) zeta)^-(2+alpha),
phi_1(x) = 1/(1-x^2) and phi_2(x)^2 = (1+x^2)/(1-x^2)^3 at alpha = 0, and
phi_1(x) at alpha = 1 is a Gauss hypergeometric value.  Inverse-log
coefficients and means are frozen from 40-digit quadrature through the
substitution t = 1 - log u (series of exact incomplete-gamma terms, tail
ratio 2.4e-24).  Deep inverse-log moments are frozen from the same
substitution with an exact 1/t^2 tail beyond the split.
"""

import math

import numpy as np
import pytest

from bergmanlab import (
    ConvergenceError,
    DomainError,
    KernelEvaluator,
    MeanTable,
    kernel_norm,
    parse_weight,
    theoremA_ratio_sweep,
)
from bergmanlab.kernel import SERIES_CAP, _odd_moment_batch

# 2F1(3/2, 3/2; 1; 1/4): phi_1(1/2) for the alpha = 1 kernel
STD1_PHI1_HALF = 1.8907456177304266

# inverse-log kernel, 40-digit oracles
INVLOG_A0 = 0.83843751408935043
INVLOG_A1 = 1.2275312483702966
INVLOG_PHI1_HALF = 0.9742912525400889
INVLOG_PHI2_HALF = 1.1269703215820169

# inverse-log odd moments of deep order, same substitution oracle
INVLOG_MOMENT_DEEP = {65535: 0.07548713737152, 1048576: 0.06235053746055}


@pytest.fixture(scope="module")
def k_std0():
    return KernelEvaluator(parse_weight("std:alpha=0"), in_doubling=True)


@pytest.fixture(scope="module")
def k_std1():
    return KernelEvaluator(parse_weight("std:alpha=1"), in_doubling=True)


@pytest.fixture(scope="module")
def k_invlog():
    return KernelEvaluator(parse_weight("invlog:"), in_doubling=True)


@pytest.fixture(scope="module")
def k_exp():
    return KernelEvaluator(parse_weight("exp:c=1,kappa=1"), in_doubling=False)


@pytest.fixture(scope="module")
def tab_std0_p1(k_std0):
    return MeanTable.build(k_std0, 1, cap_level=12)


@pytest.fixture(scope="module")
def tab_std0_p2(k_std0):
    return MeanTable.build(k_std0, 2, cap_level=12)


def std_phi1(x):
    return 1.0 / (1.0 - x * x)


def std_phi2(x):
    return math.sqrt((1.0 + x * x) / (1.0 - x * x) ** 3)


class TestCoefficients:
    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0, 3.0])
    def test_leading_coefficient_is_one(self, alpha):
        # omega_1 = 1/2 for every normalized standard weight
        k = KernelEvaluator(parse_weight(f"std:alpha={alpha}"), in_doubling=True)
        assert k.coefficients(1)[0] == pytest.approx(1.0, rel=1e-14)

    def test_standard_binomial_sequences(self, k_std0, k_std1):
        np.testing.assert_allclose(
            k_std0.coefficients(6), np.arange(1.0, 7.0), rtol=1e-14)
        np.testing.assert_allclose(
            k_std1.coefficients(6), [1, 3, 6, 10, 15, 21], rtol=1e-14)

    def test_invlog_leading_coefficients(self, k_invlog):
        c = k_invlog.coefficients(2)
        assert c[0] == pytest.approx(INVLOG_A0, rel=1e-13)
        assert c[1] == pytest.approx(INVLOG_A1, rel=1e-13)

    @pytest.mark.parametrize("spec,orders", [
        ("invlog:", (0, 3, 47, 1000, 16383)),
        ("cex-nu:base=std:alpha=0,p=2", (0, 3, 47, 400)),
    ])
    def test_batch_matches_adaptive_moments(self, spec, orders):
        # dual route: the fixed deep grid against per-order refinement
        w = parse_weight(spec)
        for n in orders:
            got = _odd_moment_batch(w, n, n + 1)[0]
            want = w.moment(2 * n + 1)
            assert got == pytest.approx(want, rel=1e-11), f"order {2 * n + 1}"

    @pytest.mark.parametrize("n", sorted(INVLOG_MOMENT_DEEP))
    def test_batch_deep_orders_against_oracle(self, n):
        w = parse_weight("invlog:")
        got = _odd_moment_batch(w, n, n + 1)[0]
        assert got == pytest.approx(INVLOG_MOMENT_DEEP[n], rel=2e-11)

    def test_coefficients_track_tail_scale(self, k_std0, k_invlog):
        # a_n against 1/(2 omegahat(1 - 1/n)): bounded both ways for
        # weights with bounded halving ratios
        for k in (k_std0, k_invlog):
            w = k.weight
            for n in (64, 1024, 16384):
                a_n = k.coefficients(n + 1)[n]
                ratio = 2.0 * a_n * w.tail(1.0 - 1.0 / n)
                assert 0.3 <= ratio <= 3.0

    def test_coeffs_view_is_read_only(self, k_std0):
        k_std0.coefficients(8)
        with pytest.raises(ValueError):
            k_std0.coeffs[0] = 5.0

    def test_budget_cap_is_enforced(self, k_exp):
        assert k_exp.n_cap == 2 ** 16
        with pytest.raises(ConvergenceError):
            k_exp.coefficients(2 ** 16 + 1)

    def test_doubling_budget_is_larger(self, k_std0):
        assert k_std0.n_cap == 2 ** 22


class TestEvaluatorSetup:
    def test_probe_detects_doubling(self):
        assert KernelEvaluator(parse_weight("std:alpha=0")).in_doubling
        assert KernelEvaluator(parse_weight("invlog:")).in_doubling

    def test_probe_flags_exponential(self):
        k = KernelEvaluator(parse_weight("exp:c=1,kappa=1"))
        assert k.flagged
        assert k.n_cap == 2 ** 16

    def test_rejects_non_weight(self):
        with pytest.raises(DomainError):
            KernelEvaluator(3.14)

    def test_rejects_bad_tolerance(self):
        w = parse_weight("std:alpha=0")
        with pytest.raises(DomainError):
            KernelEvaluator(w, tail_tolerance=0.0)
        with pytest.raises(DomainError):
            KernelEvaluator(w, tail_tolerance=0.1)


class TestKernelEval:
    @pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
    def test_reproducing_lattice(self, alpha):
        # B(z, zeta) = (1 - conj(z) zeta)^-(2+alpha) on a modulus/angle grid
        k = KernelEvaluator(parse_weight(f"std:alpha={alpha}"), in_doubling=True)
        moduli = [0.0, 0.3, 0.5, 0.7, 0.9]
        angles = 2.0 * np.pi * np.arange(8) / 8.0
        for rz in moduli:
            for rzeta in moduli:
                for theta in angles:
                    z = rz
                    zeta = rzeta * np.exp(1j * theta)
                    got = k.kernel_eval(z, zeta)
                    want = (1.0 - np.conj(z) * zeta) ** -(2.0 + alpha)
                    assert abs(got - want) <= 1e-8 * abs(want)

    def test_diagonal_norm_identity(self, k_std0):
        # squared 2-norm of the kernel at a equals its diagonal value
        a = 0.9
        diag = k_std0.kernel_eval(a, a).real
        assert diag == pytest.approx(27.700831024930748, rel=1e-12)

    def test_origin_value(self, k_std0, k_invlog):
        assert k_std0.kernel_eval(0.0, 0.7) == pytest.approx(1.0, rel=1e-14)
        got = k_invlog.kernel_eval(0.3j, 0.0)
        assert got.real == pytest.approx(INVLOG_A0, rel=1e-13)
        assert got.imag == 0.0

    def test_beyond_cap_rejected(self, k_std0):
        deep = math.sqrt(1.0 - 2.0 ** -31)
        with pytest.raises(DomainError):
            k_std0.kernel_eval(deep, deep)


class TestCircleMean:
    def test_std0_closed_forms(self, k_std0):
        assert k_std0.circle_mean(1, 0.5) == pytest.approx(std_phi1(0.5), rel=1e-11)
        assert k_std0.circle_mean(2, 0.5) == pytest.approx(std_phi2(0.5), rel=1e-11)

    def test_std1_hypergeometric_value(self, k_std1):
        assert k_std1.circle_mean(1, 0.5) == pytest.approx(
            STD1_PHI1_HALF, rel=1e-11)

    def test_invlog_frozen_values(self, k_invlog):
        assert k_invlog.circle_mean(1, 0.5) == pytest.approx(
            INVLOG_PHI1_HALF, rel=1e-12)
        assert k_invlog.circle_mean(2, 0.5) == pytest.approx(
            INVLOG_PHI2_HALF, rel=1e-12)

    @pytest.mark.parametrize("kname", ["k_std0", "k_std1", "k_invlog"])
    def test_quadratic_mean_routes_agree(self, kname, request):
        # angle route vs coefficient-sum route at seeded arguments
        k = request.getfixturevalue(kname)
        rng = np.random.default_rng(20240817)
        for x in rng.uniform(0.0, 0.97, size=20):
            fft_route = k.circle_mean(2, float(x))
            sum_route = k.mean_p2_exact(float(x))
            assert fft_route == pytest.approx(sum_route, rel=1e-9)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
    @pytest.mark.parametrize("kname", ["k_std0", "k_invlog"])
    def test_monotone_in_argument(self, p, kname, request):
        k = request.getfixturevalue(kname)
        xs = np.linspace(0.0, 0.98, 15)
        vals = np.array([k.circle_mean(p, float(x)) for x in xs])
        assert np.all(np.diff(vals) >= -1e-12 * vals[1:])

    def test_monotone_in_exponent(self, k_std0):
        # power means increase with the exponent
        vals = [k_std0.circle_mean(p, 0.7) for p in (1.0, 1.5, 2.0, 3.0)]
        assert np.all(np.diff(vals) > 0.0)

    def test_center_value_is_a0(self, k_invlog):
        assert k_invlog.circle_mean(1.5, 0.0) == pytest.approx(
            INVLOG_A0, rel=1e-13)

    def test_bad_arguments_rejected(self, k_std0):
        with pytest.raises(DomainError):
            k_std0.circle_mean(0.0, 0.5)
        with pytest.raises(DomainError):
            k_std0.circle_mean(2.0, -0.1)
        with pytest.raises(DomainError):
            k_std0.circle_mean(2.0, 1.0 - 2.0 ** -31)

    def test_flagged_budget_raises_deep(self, k_exp):
        assert k_exp.circle_mean(2, 0.5) > 0.0
        with pytest.raises(ConvergenceError) as exc:
            k_exp.circle_mean(2, 1.0 - 2.0 ** -12)
        assert "x=" in str(exc.value)


class TestMeanTable:
    def test_interior_matches_closed_form(self, tab_std0_p1, tab_std0_p2):
        xs = np.array([0.0, 0.1, 0.37, 0.5, 0.75, 0.9, 0.999,
                       1.0 - 2.0 ** -11, 1.0 - 2.0 ** -12])
        np.testing.assert_allclose(tab_std0_p1.evaluate(xs), std_phi1(xs),
                                   rtol=1e-10)
        got2 = tab_std0_p2.evaluate(xs)
        want2 = np.array([std_phi2(float(x)) for x in xs])
        np.testing.assert_allclose(got2, want2, rtol=1e-10)

    @pytest.mark.parametrize("level", [13, 15, 18, 24])
    def test_extrapolation_matches_closed_form(self, tab_std0_p1,
                                               tab_std0_p2, level):
        # beyond the cap the ratio to G_p is extrapolated affinely in 1-x
        x = 1.0 - 2.0 ** -level
        assert tab_std0_p1.evaluate(x) == pytest.approx(std_phi1(x), rel=1e-6)
        assert tab_std0_p2.evaluate(x) == pytest.approx(std_phi2(x), rel=1e-6)

    def test_matches_direct_means(self, k_invlog):
        tab = MeanTable.build(k_invlog, 1, cap_level=8)
        rng = np.random.default_rng(42)
        for x in rng.uniform(0.0, float(tab.cap_x), size=12):
            assert tab.evaluate(float(x)) == pytest.approx(
                k_invlog.circle_mean(1, float(x)), rel=5e-9)

    def test_monotone_through_extrapolation(self, tab_std0_p2):
        xs = np.concatenate([np.linspace(0.0, float(tab_std0_p2.cap_x), 200),
                             1.0 - 2.0 ** -np.linspace(12.1, 29.9, 40)])
        vals = tab_std0_p2.evaluate(np.sort(xs))
        assert np.all(np.diff(vals) >= -1e-9 * vals[1:])

    def test_node_fields_are_frozen_and_sorted(self, tab_std0_p1):
        assert np.all(np.diff(tab_std0_p1.x) > 0.0)
        assert len(tab_std0_p1.x) == len(tab_std0_p1.values)
        with pytest.raises(ValueError):
            tab_std0_p1.x[0] = 0.5

    def test_scalar_and_array_shapes(self, tab_std0_p1):
        scalar = tab_std0_p1.evaluate(0.25)
        assert isinstance(scalar, float)
        arr = tab_std0_p1.evaluate(np.array([0.25, 0.5]))
        assert arr.shape == (2,)
        assert arr[0] == scalar

    def test_rejects_bad_arguments(self, tab_std0_p1, k_std0):
        with pytest.raises(DomainError):
            tab_std0_p1.evaluate(-0.1)
        with pytest.raises(DomainError):
            tab_std0_p1.evaluate(1.0 - 2.0 ** -31)
        with pytest.raises(DomainError):
            MeanTable.build(k_std0, 0.0)
        with pytest.raises(DomainError):
            MeanTable.build(k_std0, 2, cap_level=1)

    def test_exponential_has_no_extrapolation(self, k_exp):
        # its comparison integral overflows, so the cap is a hard edge
        tab = MeanTable.build(k_exp, 2, cap_level=5)
        assert tab.evaluate(0.9) > 0.0
        with pytest.raises(DomainError):
            tab.evaluate(0.99)


class TestKernelNorm:
    @pytest.mark.parametrize("alpha,a", [(0.0, 0.5), (0.0, 0.9), (0.0, 0.99),
                                         (1.0, 0.9)])
    def test_two_norm_closes_the_diagonal(self, alpha, a):
        # ||B_a||_2^2 = B(a, a) = (1 - a^2)^-(2+alpha)
        w = parse_weight(f"std:alpha={alpha}")
        k = KernelEvaluator(w, in_doubling=True)
        got = kernel_norm(k, w, 2, a) ** 2
        assert got == pytest.approx((1.0 - a * a) ** -(2.0 + alpha), rel=1e-7)

    def test_reuses_supplied_table(self, k_std0, tab_std0_p2):
        got = kernel_norm(k_std0, k_std0.weight, 2, 0.9, table=tab_std0_p2) ** 2
        assert got == pytest.approx(27.700831024930748, rel=1e-9)

    def test_grows_with_the_point(self, k_invlog):
        w = parse_weight("std:alpha=0")
        tab = MeanTable.build(k_invlog, 1, cap_level=8)
        norms = [kernel_norm(k_invlog, w, 1, a, table=tab)
                 for a in (0.5, 0.9, 0.99)]
        assert np.all(np.diff(norms) > 0.0)

    def test_rejects_bad_arguments(self, k_std0):
        w = k_std0.weight
        with pytest.raises(DomainError):
            kernel_norm(k_std0, w, 2, 1.0 - 2.0 ** -26)
        with pytest.raises(DomainError):
            kernel_norm(k_std0, w, -1.0, 0.5)
        with pytest.raises(DomainError):
            kernel_norm(k_std0, object(), 2, 0.5)


class TestRatioSweep:
    def test_std0_p2_spreads_are_tight(self, k_std0, tab_std0_p2):
        sweep = theoremA_ratio_sweep(k_std0, k_std0.weight, 2,
                                     [0.9, 0.99, 0.999], table=tab_std0_p2)
        assert sweep.mean_spread <= 10.0
        assert sweep.norm_spread <= 10.0
        assert np.all((sweep.mean_ratios > 0.1) & (sweep.mean_ratios < 10.0))
        assert np.all((sweep.norm_ratios > 0.1) & (sweep.norm_ratios < 10.0))

    def test_std1_p1_spreads_are_tight(self, k_std1):
        sweep = theoremA_ratio_sweep(k_std1, k_std1.weight, 1, [0.9, 0.99])
        assert sweep.mean_spread <= 10.0
        assert sweep.norm_spread <= 10.0

    def test_invlog_p2_spreads_are_tight(self, k_invlog):
        nu = parse_weight("std:alpha=0")
        sweep = theoremA_ratio_sweep(k_invlog, nu, 2, [0.9, 0.99])
        assert sweep.mean_spread <= 10.0
        assert sweep.norm_spread <= 10.0

    def test_fields_align_with_radii(self, k_std0, tab_std0_p2):
        radii = [0.9, 0.95]
        sweep = theoremA_ratio_sweep(k_std0, k_std0.weight, 2, radii,
                                     table=tab_std0_p2)
        np.testing.assert_allclose(sweep.radii, radii)
        assert sweep.mean_ratios.shape == (2,)
        assert sweep.norm_ratios.shape == (2,)

    def test_rejects_bad_radii(self, k_std0, tab_std0_p2):
        with pytest.raises(DomainError):
            theoremA_ratio_sweep(k_std0, k_std0.weight, 2, [0.4],
                                 table=tab_std0_p2)
        with pytest.raises(DomainError):
            theoremA_ratio_sweep(k_std0, k_std0.weight, 2, [],
                                 table=tab_std0_p2)


class TestSeriesCap:
    def test_cap_matches_float_resolution_guard(self):
        assert SERIES_CAP == 1.0 - 2.0 ** -30
