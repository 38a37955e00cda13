import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isaccov.specfun import (
    DEFAULT_QUADRATURE,
    QuadratureError,
    QuadratureSpec,
    bessel_i0,
    erfc,
    erfcx,
    gauss_2f1,
    integrate_finite,
    integrate_semi_infinite,
)
from oracles import erfc_oracle, gauss_legendre, hyp2f1_euler, i0_series


def test_quadrature_spec_rejects_bad_fields():
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0)
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=-1)
    with pytest.raises(ValueError):
        QuadratureSpec(max_subdivisions=4)
    with pytest.raises(ValueError):
        QuadratureSpec(truncation_mass=1e-2)
    spec = QuadratureSpec()
    assert (spec.rel_tol, spec.abs_tol, spec.max_subdivisions, spec.truncation_mass) == (1e-8, 1e-12, 2048, 1e-9)
    assert spec.tighter(10).rel_tol == pytest.approx(1e-9)


def test_erfc_examples():
    assert erfc(0.0) == 1.0
    assert erfc(1.0) == pytest.approx(0.1572992, abs=5e-8)
    assert erfc(1.0) == pytest.approx(erfc_oracle(1.0), rel=1e-12)


@pytest.mark.parametrize("x", [-10.0, -4.0, -1.5, -0.3, 0.2, 0.9, 2.5, 5.0, 7.5, 10.0])
def test_erfc_matches_quadrature_oracle(x):
    assert erfc(x) == pytest.approx(erfc_oracle(x), rel=1e-12)


def test_erfc_reflection_and_monotone():
    xs = np.random.default_rng(11).uniform(-5, 5, 1000)
    for x in xs:
        assert erfc(x) + erfc(-x) == pytest.approx(2.0, abs=1e-14)
    grid = np.linspace(-5, 6, 2001)
    vals = [erfc(x) for x in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_erfcx_survives_where_factors_overflow():
    x = 30.0
    assert erfc(x) == 0.0  # underflows; exp(x^2) alone would overflow
    # asymptotic 1/(x sqrt(pi)) (1 - 1/(2x^2) + 3/(4x^4))
    approx = 1 / (x * math.sqrt(math.pi)) * (1 - 1 / (2 * x * x) + 3 / (4 * x**4))
    assert erfcx(x) == pytest.approx(approx, rel=1e-7)
    assert erfcx(0.0) == 1.0


def test_bessel_i0_examples():
    assert bessel_i0(0.0) == 1.0
    assert bessel_i0(1.0) == pytest.approx(1.2660658, abs=1e-7)
    assert bessel_i0(10.0) == pytest.approx(i0_series(10.0), rel=1e-10)


@pytest.mark.parametrize("x", [0.5, 3.0, 17.0, 33.3, 50.0])
def test_bessel_i0_ten_digits(x):
    assert bessel_i0(x) == pytest.approx(i0_series(x), rel=1e-10)


def test_bessel_i0_errors():
    with pytest.raises(OverflowError):
        bessel_i0(1000.0)
    with pytest.raises(ValueError):
        bessel_i0(-1.0)


def test_gauss_2f1_examples():
    assert gauss_2f1(1.0, 0.5, 1.5, 0.0) == 1.0
    assert gauss_2f1(1.0, 0.5, 1.5, -1.0) == pytest.approx(math.pi / 4, rel=1e-10)
    ref = hyp2f1_euler(1.0, 1 / 3, 5 / 3, -8.0)
    assert gauss_2f1(1.0, 1 / 3, 5 / 3, -8.0) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("alpha", [2.2, 2.4, 3.2, 4.0, 4.8, 6.0])
@pytest.mark.parametrize("t", [-1e-3, -0.7, -25.0, -3e4, -1e9])
def test_gauss_2f1_theorem_parameters(alpha, t):
    a, b, c = 1.0, (alpha - 2) / alpha, 2 - 2 / alpha
    assert gauss_2f1(a, b, c, t) == pytest.approx(hyp2f1_euler(a, b, c, t), rel=1e-8)


def test_gauss_2f1_arctan_identity():
    # 2F1(1, 1/2; 3/2; -z^2) = arctan(z) / z
    for z in (1e-3, 0.3, 1.0, 7.0, 1e4):
        assert gauss_2f1(1.0, 0.5, 1.5, -z * z) == pytest.approx(math.atan(z) / z, rel=1e-9)


def test_gauss_2f1_domain_errors():
    with pytest.raises(ValueError):
        gauss_2f1(1.0, 0.5, 0.5, -1.0)
    with pytest.raises(ValueError):
        gauss_2f1(1.0, 0.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        gauss_2f1(1.0, 0.5, 1.5, 0.5)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 1e4), st.floats(1e-2, 1e2))
def test_hypergeometric_kernel_reduces_to_arctan_form(eps, h):
    # unit-weight kernel at alpha = 4: hypergeometric form vs arctan form
    hyp = h**-2 * gauss_2f1(1.0, 0.5, 1.5, -(h**-4) / eps) / (2 * eps)
    arctan = (math.pi - 2 * math.atan(h * h * math.sqrt(eps))) / (4 * math.sqrt(eps))
    assert hyp == pytest.approx(arctan, rel=1e-7)


def test_semi_infinite_examples():
    assert integrate_semi_infinite(lambda x: math.exp(-x)) == pytest.approx(1.0, rel=1e-10)
    assert integrate_semi_infinite(lambda x: x * math.exp(-x * x)) == pytest.approx(0.5, rel=1e-10)
    val = integrate_semi_infinite(lambda x: x / (x**4 + 1), 1.0)
    assert val == pytest.approx(math.pi / 8, rel=1e-9)
    # dense trapezoid on the substitution x = 1/u, integrand u/(1+u^4) on (0, 1]
    u = np.linspace(0.0, 1.0, 200001)
    assert val == pytest.approx(np.trapezoid(u / (1 + u**4), u), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.3, 6.0), st.floats(0.0, 50.0))
def test_semi_infinite_rational_family(k, h):
    exact = (1 + h) ** (1 - k) / (k - 1)
    got = integrate_semi_infinite(lambda x: (1 + x) ** -k, h)
    assert got == pytest.approx(exact, rel=10 * DEFAULT_QUADRATURE.rel_tol)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 10.0), st.floats(0.0, 20.0))
def test_semi_infinite_exponential_family(rate, h):
    exact = math.exp(-rate * h) / rate
    got = integrate_semi_infinite(lambda x: math.exp(-rate * x), h)
    assert got == pytest.approx(exact, rel=10 * DEFAULT_QUADRATURE.rel_tol)


def test_result_stable_under_doubled_subdivisions():
    f = lambda x: x * math.exp(-0.008 * x) / (1e-4 * x**2.4 + 1)  # noqa: E731
    base = integrate_semi_infinite(f, 30.0)
    doubled = integrate_semi_infinite(f, 30.0, QuadratureSpec(max_subdivisions=4096))
    assert doubled == pytest.approx(base, rel=10 * DEFAULT_QUADRATURE.rel_tol)


def test_finite_integral_matches_gauss_legendre():
    f = lambda x: np.sin(x) ** 2 * np.exp(-x)  # noqa: E731
    assert integrate_finite(f, 0.0, 7.0) == pytest.approx(gauss_legendre(f, 0.0, 7.0), rel=1e-12)


def test_nonconvergence_carries_estimate_and_bound():
    tight = QuadratureSpec(max_subdivisions=8)
    with pytest.raises(QuadratureError) as info:
        integrate_semi_infinite(lambda x: math.cos(200 * x) * math.exp(-x / 50), 0.0, tight)
    assert math.isfinite(info.value.estimate)
    assert info.value.error > 0
