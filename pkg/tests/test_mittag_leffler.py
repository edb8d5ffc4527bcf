import math

import mpmath as mp
import numpy as np
import pytest
from scipy.special import erfcx

from fracsource.mittag_leffler import MlDomainError, ml, ml_array, ml_batch


def series_oracle_kahan(alpha, beta, z, terms=500):
    """Compensated-summation Taylor oracle, independent of the module code."""
    total = 0.0
    comp = 0.0
    power = 1.0
    for n in range(terms):
        arg = alpha * n + beta
        if arg > 170.0:  # 1/Gamma is sub-denormal past the overflow threshold
            break
        term = power / math.gamma(arg)
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        power *= z
    return total


def mp_oracle(alpha, beta, z, extra_dps=40):
    """Arbitrary-precision series oracle; handles the cancellation regime."""
    w = abs(z) ** (1.0 / alpha)
    with mp.workdps(int(extra_dps + 0.45 * w)):
        s = mp.mpf(0)
        p = mp.mpf(1)
        zm = mp.mpf(z)
        n = 0
        floor = mp.mpf(10) ** (-extra_dps - 10)
        while True:
            s += p * mp.rgamma(mp.mpf(alpha) * n + mp.mpf(beta))
            n += 1
            p *= zm
            if n > 30 and all(
                abs(p * zm ** j) * abs(mp.rgamma(mp.mpf(alpha) * (n + j) + mp.mpf(beta)))
                < floor * max(abs(s), mp.mpf(1e-30)) for j in range(8)
            ):
                return float(s)


class TestClosedForms:
    def test_exponential_case(self):
        assert ml(1.0, 1.0, -1.0) == pytest.approx(math.exp(-1.0), abs=1e-12)
        for z in (-0.1, -3.0, -25.0, -500.0):
            assert ml(1.0, 1.0, z) == pytest.approx(math.exp(z), rel=1e-13)

    def test_value_at_zero_is_reciprocal_gamma(self):
        for alpha, beta in [(0.5, 1.0), (0.3, 0.3), (0.9, 2.1), (0.25, 0.5)]:
            assert ml(alpha, beta, 0.0) == pytest.approx(1.0 / math.gamma(beta), rel=1e-14)

    def test_half_order_equals_scaled_erfc(self):
        # E_{1/2,1}(-x) = exp(x^2) erfc(x), cross-checked by a 500-term
        # compensated-summation series at the quoted point
        val = ml(0.5, 1.0, -1.0)
        assert val == pytest.approx(math.e * math.erfc(1.0), abs=1e-9)
        assert val == pytest.approx(series_oracle_kahan(0.5, 1.0, -1.0), abs=1e-12)
        assert val == pytest.approx(0.4275835761558070, abs=1e-9)
        for x in (0.01, 0.8, 3.0, 5.7, 6.0, 12.0, 200.0, 1000.0):
            assert ml(0.5, 1.0, -x) == pytest.approx(float(erfcx(x)), rel=5e-13)

    def test_half_order_kernel_closed_form(self):
        # E_{1/2,1/2}(-x) = 1/sqrt(pi) - x exp(x^2) erfc(x)
        for x in (0.2, 2.0, 5.5, 5.9, 6.5, 40.0):
            ref = 1.0 / math.sqrt(math.pi) - x * float(erfcx(x))
            assert ml(0.5, 0.5, -x) == pytest.approx(ref, rel=1e-11)


class TestAccuracySweep:
    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 0.9])
    @pytest.mark.parametrize("beta_kind", ["one", "alpha", "alpha_plus_one"])
    def test_against_high_precision_series(self, alpha, beta_kind):
        beta = {"one": 1.0, "alpha": alpha, "alpha_plus_one": alpha + 1.0}[beta_kind]
        for w in (0.05, 1.0, 8.0, 20.0, 29.0, 31.0, 35.0, 37.0, 50.0):
            z = -(w ** alpha)
            got = ml(alpha, beta, z)
            ref = mp_oracle(alpha, beta, z)
            tol = 1e-8 if 30.0 <= w <= 36.0 else 1e-10
            assert got == pytest.approx(ref, rel=tol, abs=1e-300), (alpha, beta, w)

    def test_large_arguments(self):
        # far range is the algebraic branch; compare to its leading behavior
        for alpha in (0.3, 0.6, 0.85):
            x = 1e3
            lead = 1.0 / (x * math.gamma(1.0 - alpha))
            assert ml(alpha, 1.0, -x) == pytest.approx(lead, rel=0.05)


class TestBoundsAndMonotonicity:
    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    def test_relaxation_bounds_and_monotonicity(self, alpha):
        t = np.logspace(-2, 2, 80)
        vals = ml_array(alpha, 1.0, -t)
        assert np.all(vals > 0.0) and np.all(vals < 1.0)
        assert np.all(np.diff(vals) <= 0.0)
        # complete monotonicity to second order: slopes are nondecreasing
        slopes = np.diff(vals) / np.diff(t)
        assert np.all(np.diff(slopes) >= -1e-13)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    def test_kernel_bounds_and_monotonicity(self, alpha):
        eta = np.logspace(-2, 2, 80)
        vals = ml_array(alpha, alpha, -eta)
        assert np.all(vals >= 0.0)
        assert np.all(vals <= 1.0 / math.gamma(alpha) + 1e-14)
        assert np.all(np.diff(vals) <= 1e-15)

    def test_decay_shape(self):
        # |E| <= C/(1+|z|) with an empirically fitted constant: fit C on a
        # coarse grid, then check a fine grid stays within 1.5 C
        for alpha, beta in [(0.25, 1.0), (0.5, 1.0), (0.75, 0.75)]:
            coarse = np.logspace(-1, 3, 9)
            c_fit = float(np.max(np.abs(ml_array(alpha, beta, -coarse)) * (1 + coarse)))
            fine = np.logspace(-1, 3, 120)
            vals = np.abs(ml_array(alpha, beta, -fine))
            assert np.all(vals <= 1.5 * c_fit / (1 + fine))

    def test_decay_at_large_rate(self):
        lam = 1e4
        entry = ml_batch(0.5, 1.0, [lam], np.array([1.0]))[0, 0]
        assert entry <= 10.0 / (1.0 + lam)


class TestIdentities:
    def test_shift_identity(self):
        # E_{a,a+1}(z) = (E_{a,1}(z) - 1)/z for z < 0
        for alpha in (0.3, 0.5, 0.8):
            for z in (-0.5, -2.0, -7.0, -40.0):
                lhs = ml(alpha, alpha + 1.0, z)
                rhs = (ml(alpha, 1.0, z) - 1.0) / z
                assert lhs == pytest.approx(rhs, rel=1e-9)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
    def test_derivative_identity(self, alpha):
        # d/dt E_{a,1}(-lam t^a) = -lam t^(a-1) E_{a,a}(-lam t^a), the single
        # analytic step behind the closed-form panel weights; verified by
        # central differences away from t=0
        lam = 2.0
        for t in (0.3, 1.0, 2.5):
            dt = 1e-6 * t
            num = (ml(alpha, 1.0, -lam * (t + dt) ** alpha)
                   - ml(alpha, 1.0, -lam * (t - dt) ** alpha)) / (2 * dt)
            ana = -lam * t ** (alpha - 1.0) * ml(alpha, alpha, -lam * t ** alpha)
            assert num == pytest.approx(ana, rel=1e-5)


class TestBatch:
    def test_matches_scalar_path(self):
        lam = np.array([1.0, 15.3, 240.0])
        t = np.linspace(0.0, 2.0, 9)
        for alpha, beta in [(0.5, 1.0), (0.5, 0.5), (0.75, 1.0)]:
            mat = ml_batch(alpha, beta, lam, t)
            assert mat.shape == (3, 9)
            for i, ln in enumerate(lam):
                for k, tk in enumerate(t):
                    assert abs(mat[i, k] - ml(alpha, beta, -ln * tk ** alpha)) <= 1e-12

    def test_unit_at_time_zero(self):
        assert ml_batch(0.7, 1.0, [1.0], np.array([0.0]))[0, 0] == 1.0

    def test_rows_nonincreasing(self):
        t = np.linspace(0.0, 3.0, 50)
        for beta_is_alpha in (False, True):
            alpha = 0.6
            beta = alpha if beta_is_alpha else 1.0
            mat = ml_batch(alpha, beta, [0.5, 7.0, 300.0], t)
            assert np.all(np.diff(mat, axis=1) <= 1e-15)


class TestDomain:
    def test_rejects_bad_parameters(self):
        with pytest.raises(MlDomainError):
            ml(0.0, 1.0, -1.0)
        with pytest.raises(MlDomainError):
            ml(1.2, 1.0, -1.0)
        with pytest.raises(MlDomainError):
            ml(0.5, 1.0, 0.5)
        with pytest.raises(MlDomainError):
            ml(0.5, math.nan, -1.0)
        with pytest.raises(MlDomainError):
            ml_batch(0.5, 1.0, [-1.0], np.array([0.5]))
        with pytest.raises(MlDomainError):
            ml_batch(0.5, 1.0, [1.0], np.array([-0.5]))
