import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from kmhos import specfun
from kmhos.errors import DomainError


def test_ln_gamma_values():
    assert specfun.ln_gamma(1) == 0
    assert specfun.ln_gamma(5) == pytest.approx(math.log(24), rel=1e-14)
    assert specfun.ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-14)
    with pytest.raises(DomainError):
        specfun.ln_gamma(0)


def test_accuracy_spec_invariants():
    with pytest.raises(DomainError):
        specfun.AccuracySpec(rel_tol=0)
    with pytest.raises(DomainError):
        specfun.AccuracySpec(max_iterations=0)


def test_upper_inc_gamma():
    for b in (0.1, 1.0, 7.5):
        assert specfun.upper_inc_gamma(1, b) == pytest.approx(math.exp(-b), rel=1e-13)
    assert specfun.upper_inc_gamma(2, 1e-12) == pytest.approx(1.0, rel=1e-10)
    ref = integrate.quad(lambda t: t**0.5 * math.exp(-t), 2.0, np.inf, epsrel=1e-13)[0]
    assert specfun.upper_inc_gamma(1.5, 2.0) == pytest.approx(ref, rel=1e-10)
    with pytest.raises(DomainError):
        specfun.upper_inc_gamma(0, 1)


@pytest.mark.parametrize("a", [0.3, 1.0, 2.5, 12.0])
@pytest.mark.parametrize("b", [0.05, 1.0, 9.0])
def test_upper_plus_lower_is_gamma(a, b):
    lower = math.gamma(a) * special.gammainc(a, b)
    assert specfun.upper_inc_gamma(a, b) + lower == pytest.approx(math.gamma(a), rel=1e-10)


def test_upper_inc_gamma_deep_tail():
    v = specfun.upper_inc_gamma(2.0, 800.0)
    assert v == pytest.approx(float(mpmath.gammainc(2, 800)), rel=1e-10)


def test_log_power_upper_gamma_n0_and_derivative():
    assert specfun.log_power_upper_gamma(2.3, 0.7, 0) == pytest.approx(specfun.upper_inc_gamma(2.3, 0.7), rel=1e-12)
    h = 1e-5
    fd = (specfun.upper_inc_gamma(1 + h, 1) - specfun.upper_inc_gamma(1 - h, 1)) / (2 * h)
    assert specfun.log_power_upper_gamma(1, 1, 1) == pytest.approx(fd, rel=1e-7)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_log_power_upper_gamma_matches_mp_derivative(n):
    a, b = 2.0, 0.5
    ref = mpmath.diff(lambda s: mpmath.gammainc(s, b), a, n)
    assert specfun.log_power_upper_gamma(a, b, n) == pytest.approx(float(ref), rel=1e-8)


def test_log_power_upper_gamma_mp_path():
    v = specfun.log_power_upper_gamma(3.0, 2.0, 2, dps=30)
    assert float(v) == pytest.approx(specfun.log_power_upper_gamma(3.0, 2.0, 2), rel=1e-11)


def test_log_power_gamma():
    assert specfun.log_power_gamma(1, 1) == pytest.approx(-0.5772156649015329, rel=1e-12)
    assert specfun.log_power_gamma(3.7, 0) == pytest.approx(math.gamma(3.7), rel=1e-14)
    h = 1e-4
    fd = (math.gamma(3 + h) - 2 * math.gamma(3) + math.gamma(3 - h)) / h**2
    assert specfun.log_power_gamma(3, 2) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("alpha", [0.4, 1.0, 3.0, 17.5])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_log_power_gamma_paths_agree(alpha, n):
    a = specfun.log_power_gamma(alpha, n, method="polygamma")
    b = specfun.log_power_gamma(alpha, n, method="quad")
    assert a == pytest.approx(b, rel=1e-8, abs=1e-12 * math.gamma(alpha))


def test_bessel_i():
    assert specfun.bessel_i(0, 0) == 1
    assert specfun.bessel_i(1, 0) == 0
    assert specfun.bessel_i(0.5, 2.0) == pytest.approx(math.sqrt(2 / (math.pi * 2)) * math.sinh(2), rel=1e-13)
    assert specfun.bessel_i_scaled(3.2, 50.0) == pytest.approx(float(special.ive(3.2, 50.0)), rel=1e-11)


@pytest.mark.parametrize("nu", [0.5, 1.0, 2.7])
@pytest.mark.parametrize("x", [0.1, 1.0, 7.0, 20.0])
def test_bessel_recurrence(nu, x):
    lhs = specfun.bessel_i(nu - 1, x) - specfun.bessel_i(nu + 1, x)
    assert lhs == pytest.approx(2 * nu / x * specfun.bessel_i(nu, x), rel=1e-9)


def test_pochhammer():
    assert specfun.pochhammer(3.3, 0) == 1
    assert specfun.pochhammer(2, 3) == 24
    assert specfun.pochhammer(-3, 5) == 0
    assert specfun.pochhammer(-3, 2) == 6
    assert specfun.log_pochhammer(200.0, 300) == pytest.approx(math.lgamma(500) - math.lgamma(200), rel=1e-13)


@given(st.floats(0.1, 50), st.integers(0, 30))
def test_pochhammer_gamma_ratio(a, q):
    assert specfun.pochhammer(a, q) == pytest.approx(math.exp(math.lgamma(a + q) - math.lgamma(a)), rel=1e-11)


def test_stirling_first():
    assert specfun.stirling_first_signed(2, 2) == 1
    assert specfun.stirling_first_signed(3, 2) == -3
    assert specfun.stirling_first_signed(4, 2) == 11
    assert specfun.stirling_first_signed(0, 0) == 1
    assert specfun.stirling_first_signed(5, 0) == 0


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("z", [0.01, 0.1])
def test_stirling_series_log_power(n, z):
    s = math.fsum(
        math.factorial(n) * specfun.stirling_first_signed(k, n) * z**k / math.factorial(k) for k in range(n, 31)
    )
    assert s == pytest.approx(math.log1p(z) ** n, rel=1e-10)


def test_laguerre():
    assert specfun.laguerre_generalized(0, 0.3, 5.0) == 1
    assert specfun.laguerre_generalized(1, 0.3, 5.0) == pytest.approx(1.3 - 5.0, rel=1e-14)
    assert specfun.laguerre_generalized(3, 0.5, 2.0) == pytest.approx(float(special.eval_genlaguerre(3, 0.5, 2.0)), rel=1e-12)


def test_hyp1f1():
    assert specfun.hyp1f1(2.2, 3.1, 0.0) == 1
    assert specfun.hyp1f1(1, 1, 2.5) == pytest.approx(math.exp(2.5), rel=1e-13)
    with mpmath.workdps(40):
        ref = mpmath.nsum(lambda q: mpmath.rf(2, q) * mpmath.mpf(1.5) ** q / (mpmath.rf(3, q) * mpmath.factorial(q)), [0, 200])
    assert specfun.hyp1f1(2, 3, 1.5) == pytest.approx(float(ref), rel=1e-12)


@pytest.mark.parametrize("a,b,x", [(0.5, 1.5, 3.0), (4.0, 2.0, 10.0), (7.0, 3.0, 25.0), (2.5, 6.0, -4.0)])
def test_hyp1f1_kummer_paths_agree(a, b, x):
    v1 = specfun.hyp1f1(a, b, x, kummer=False)
    v2 = specfun.hyp1f1(a, b, x, kummer=True)
    assert v1 == pytest.approx(v2, rel=1e-9)
    assert v1 == pytest.approx(float(mpmath.hyp1f1(a, b, x)), rel=1e-9)


def test_hyp2f1():
    assert specfun.hyp2f1(1.2, 2.3, 3.4, 0.0) == 1
    assert specfun.hyp2f1(1.7, 2.0, 2.0, 0.6) == pytest.approx(0.4**-1.7, rel=1e-12)
    ref = 2 * integrate.quad(lambda t: t * (1 - t) ** 0 * (1 - 0.5 * t) ** -1, 0, 1, epsrel=1e-13)[0]
    assert specfun.hyp2f1(1, 2, 3, 0.5) == pytest.approx(ref, rel=1e-11)
    with pytest.raises(DomainError):
        specfun.hyp2f1(1, 2, 3, 1.0)


@pytest.mark.parametrize("x", [0.2, 0.75, 0.95])
def test_hyp2f1_euler_paths_agree(x):
    v1 = specfun.hyp2f1(1.5, 2.5, 4.0, x, euler=False)
    v2 = specfun.hyp2f1(1.5, 2.5, 4.0, x, euler=True)
    assert v1 == pytest.approx(v2, rel=1e-9)


def test_log_hyp2f1_positive_large_index():
    a, b, c, x = 40.0, 120.0, 3.0, 0.9
    ref = float(mpmath.log(mpmath.hyp2f1(a, b, c, x)))
    assert specfun.log_hyp2f1_positive(a, b, c, x) == pytest.approx(ref, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.5, 6), st.floats(0, 0.9))
def test_hyp2f1_matches_mpmath(a, b, c, x):
    assert specfun.hyp2f1(a, b, c, x) == pytest.approx(float(mpmath.hyp2f1(a, b, c, x)), rel=1e-9)
