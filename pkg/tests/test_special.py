import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirkde.special import (
    DegenerateSampleError,
    DomainError,
    bessel_ratio,
    log_bessel_i,
    log_cq,
    log_sphere_area,
    solve_concentration,
    sphere_area,
    vm_kernel_constants,
)

mp.mp.dps = 40


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.5])
@pytest.mark.parametrize("z", [1e-8, 1e-3, 0.1, 1.0, 10.0, 100.0, 1e3, 1e5, 1e6])
def test_log_bessel_matches_mpmath(nu, z):
    ref = float(mp.log(mp.besseli(nu, z)))
    assert log_bessel_i(nu, z) == pytest.approx(ref, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("nu", [1.5, 2.0])
@pytest.mark.parametrize("z", [1e12, 1e15, 1e100])
def test_log_bessel_huge_argument(nu, z):
    ref = float(mp.log(mp.besseli(nu, z)))
    assert log_bessel_i(nu, z) == pytest.approx(ref, rel=1e-14)


def test_log_bessel_half_integer_closed_forms():
    z = np.geomspace(1e-3, 500, 50)
    assert np.allclose(np.exp(log_bessel_i(0.5, z) - z), np.sqrt(2 / (np.pi * z)) * np.sinh(z) * np.exp(-z), rtol=1e-12)
    assert np.allclose(np.exp(log_bessel_i(-0.5, z) - z), np.sqrt(2 / (np.pi * z)) * np.cosh(z) * np.exp(-z), rtol=1e-12)


@pytest.mark.parametrize("nu", [0.5, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("z", [0.1, 1.0, 10.0, 100.0, 1000.0])
def test_bessel_recurrence(nu, z):
    # I_{nu-1} - I_{nu+1} = (2 nu / z) I_nu, all scaled by e^{-z}
    lhs = math.exp(log_bessel_i(nu - 1, z) - z) - math.exp(log_bessel_i(nu + 1, z) - z)
    rhs = 2 * nu / z * math.exp(log_bessel_i(nu, z) - z)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_log_bessel_zero_and_errors():
    assert log_bessel_i(0, 0.0) == 0.0
    assert log_bessel_i(1, 0.0) == -math.inf
    with pytest.raises(DomainError):
        log_bessel_i(-1, 1.0)
    with pytest.raises(DomainError):
        log_bessel_i(0, -1.0)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert sphere_area(3) == pytest.approx(2 * math.pi**2)
    assert math.exp(log_sphere_area(4)) == pytest.approx(sphere_area(4))


@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_log_cq_general_formula(q):
    for k in [1e-6, 0.3, 2.0, 50.0, 1e4]:
        nu = (q - 1) / 2
        ref = nu * mp.log(k) - (q + 1) / 2 * mp.log(2 * mp.pi) - mp.log(mp.besseli(nu, k))
        assert log_cq(q, k) == pytest.approx(float(ref), rel=1e-11, abs=1e-11)
    assert log_cq(q, 0.0) == pytest.approx(-log_sphere_area(q))


@pytest.mark.parametrize("q", [1, 2, 3])
def test_log_cq_plus_kappa_bounded(q):
    k = np.geomspace(10, 1e8, 20)
    v = log_cq(q, k) + k
    # grows only like (q/2) log k
    assert np.all(np.isfinite(v))
    assert np.all(np.abs(v - q / 2 * np.log(k)) < 5)


@pytest.mark.parametrize("q", [1, 2, 3, 5])
def test_bessel_ratio_mpmath(q):
    for k in [1e-4, 0.5, 3.0, 40.0, 5e3]:
        ref = mp.besseli((q + 1) / 2, k) / mp.besseli((q - 1) / 2, k)
        assert bessel_ratio(q, k) == pytest.approx(float(ref), rel=1e-11)


def test_kernel_constants():
    lam, b, d = vm_kernel_constants(1)
    assert (lam, b, d) == pytest.approx((math.sqrt(2 * math.pi), 0.5, 2**-0.5))
    assert vm_kernel_constants(2) == pytest.approx((2 * math.pi, 1.0, 0.5))


@pytest.mark.parametrize("q", [1, 2, 3])
def test_kernel_constants_integrals(q):
    # b = int L r^{q/2} / int L r^{q/2-1}, d = int L^2 r^{q/2-1} / int L r^{q/2-1},
    # lambda = 2^{q/2-1} omega_{q-1} int L r^{q/2-1}, with L(r) = e^{-r}
    f = lambda g: float(mp.quad(g, [0, mp.inf]))
    base = f(lambda r: mp.e**-r * r ** (q / 2 - 1))
    b = f(lambda r: mp.e**-r * r ** (q / 2)) / base
    d = f(lambda r: mp.e ** (-2 * r) * r ** (q / 2 - 1)) / base
    lam = 2 ** (q / 2 - 1) * sphere_area(q - 1) * base
    assert vm_kernel_constants(q) == pytest.approx((lam, b, d), rel=1e-12)


def test_solve_concentration_examples():
    assert solve_concentration(1, 0.0) == 0.0
    k = solve_concentration(1, 0.5)
    assert float(mp.besseli(1, k) / mp.besseli(0, k)) == pytest.approx(0.5, abs=1e-12)
    k = solve_concentration(2, 0.9)
    assert 1 / math.tanh(k) - 1 / k == pytest.approx(0.9, abs=1e-12)
    with pytest.raises(DegenerateSampleError):
        solve_concentration(1, 1.0)
    assert solve_concentration(1, 1.0, kappa_max=1e4) == 1e4


@pytest.mark.parametrize("q", [1, 2, 3])
def test_solve_concentration_inverts_ratio(q):
    k = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 80)])
    back = solve_concentration(q, bessel_ratio(q, k))
    assert np.allclose(back, k, rtol=1e-8, atol=1e-8)


@given(st.integers(1, 4), st.floats(0.0, 0.999), st.floats(0.0, 0.999))
def test_solve_concentration_monotone(q, r1, r2):
    lo, hi = sorted([r1, r2])
    k_lo, k_hi = solve_concentration(q, lo), solve_concentration(q, hi)
    assert k_lo <= k_hi * (1 + 1e-12) + 1e-12
    assert abs(bessel_ratio(q, k_hi) - hi) < 1e-10
