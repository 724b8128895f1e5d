"""Log-scaled Bessel functions, von Mises constants and concentration solving.

Everything here works on the log scale: the kernel concentration ``1/h**2``
reaches 1e6 during bandwidth searches, where ``I_nu`` overflows and ``C_q``
underflows in linear scale.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special as sc

LOG_2PI = math.log(2.0 * math.pi)

# cap used by the selectors for ML concentrations of near-degenerate samples
KAPPA_CAP = 1e4


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class DegenerateSampleError(ValueError):
    """Raised when a sample has unit mean resultant length."""


def _log_series(nu: float, z: np.ndarray) -> np.ndarray:
    # log I_nu(z) from the ascending series; only used where ive underflows
    x = 0.25 * z * z
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 40):
        term = term * x / (k * (nu + k))
        total = total + term
    return nu * np.log(0.5 * z) - sc.gammaln(nu + 1.0) + np.log(total)


def _log_asymptotic(nu: float, z: np.ndarray) -> np.ndarray:
    # large-z expansion; ive returns nan beyond ~1e12
    m = 4.0 * nu * nu
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 6):
        term = -term * (m - (2 * k - 1) ** 2) / (k * 8.0 * z)
        total = total + term
    return z - 0.5 * np.log(2.0 * math.pi * z) + np.log(total)


def log_bessel_i(nu: float, z) -> np.ndarray | float:
    """Natural log of the modified Bessel function of the first kind.

    Parameters
    ----------
    nu : float
        Order, ``nu >= -1/2``.
    z : float or array_like
        Non-negative argument. Finite for ``z`` up to ~1e300.

    Returns
    -------
    float or ndarray
        ``log I_nu(z)``. Returns ``-inf`` at ``z = 0`` for ``nu > 0`` and
        ``+inf`` for ``nu < 0``.
    """
    nu = float(nu)
    if not np.isfinite(nu) or nu < -0.5:
        raise DomainError(f"Bessel order must be >= -1/2, got {nu}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0) or np.any(np.isnan(z_arr)):
        raise DomainError("Bessel argument must be non-negative")
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    out = np.empty_like(z_arr)

    zero = z_arr == 0.0
    pos = ~zero
    if nu == 0.0:
        out[zero] = 0.0
    elif nu > 0.0:
        out[zero] = -np.inf
    else:
        out[zero] = np.inf

    zp = z_arr[pos]
    with np.errstate(divide="ignore"):
        if nu == 0.0:
            vals = np.log(sc.i0e(zp)) + zp
        elif nu == 1.0:
            vals = np.log(sc.i1e(zp)) + zp
        elif nu == 0.5:
            # I_{1/2}(z) = sqrt(2/(pi z)) sinh z
            vals = 0.5 * np.log(2.0 / (math.pi * zp)) + zp + np.log(-np.expm1(-2.0 * zp)) - math.log(2.0)
        elif nu == -0.5:
            vals = 0.5 * np.log(2.0 / (math.pi * zp)) + zp + np.log1p(np.exp(-2.0 * zp)) - math.log(2.0)
        else:
            vals = np.log(sc.ive(nu, zp)) + zp
    bad = ~np.isfinite(vals)
    if np.any(bad):
        zb = zp[bad]
        vals[bad] = np.where(zb > 1e3, _log_asymptotic(nu, np.maximum(zb, 1e3)), _log_series(nu, np.minimum(zb, 1e3)))
    out[pos] = vals
    return float(out[0]) if scalar else out


def sphere_area(q: int) -> float:
    """Surface area of the unit q-sphere embedded in R^(q+1)."""
    return 2.0 * math.pi ** ((q + 1) / 2.0) / math.gamma((q + 1) / 2.0)


def log_sphere_area(q: int) -> float:
    return math.log(2.0) + 0.5 * (q + 1) * math.log(math.pi) - math.lgamma((q + 1) / 2.0)


def log_cq(q: int, kappa) -> np.ndarray | float:
    """Log normalizing constant of the von Mises-Fisher density on the q-sphere.

    ``C_q(kappa) = kappa^((q-1)/2) / ((2 pi)^((q+1)/2) I_{(q-1)/2}(kappa))``,
    with the uniform limit ``1/omega_q`` at ``kappa = 0``.
    """
    if q < 1:
        raise DomainError(f"dimension q must be >= 1, got {q}")
    k = np.asarray(kappa, dtype=float)
    if np.any(k < 0) or np.any(np.isnan(k)):
        raise DomainError("concentration must be non-negative")
    scalar = k.ndim == 0
    k = np.atleast_1d(k)
    out = np.full_like(k, -log_sphere_area(q))
    pos = k > 0
    kp = k[pos]
    if q == 1:
        out[pos] = -LOG_2PI - (np.log(sc.i0e(kp)) + kp)
    elif q == 2:
        # C_2(k) = k / (4 pi sinh k)
        out[pos] = np.log(kp) - LOG_2PI - kp - np.log(-np.expm1(-2.0 * kp))
    else:
        nu = 0.5 * (q - 1)
        out[pos] = nu * np.log(kp) - 0.5 * (q + 1) * LOG_2PI - log_bessel_i(nu, kp)
    return float(out[0]) if scalar else out


def bessel_ratio(q: int, kappa) -> np.ndarray | float:
    """Mean resultant length of vM(kappa) on the q-sphere.

    ``A_{q+1}(kappa) = I_{(q+1)/2}(kappa) / I_{(q-1)/2}(kappa)``.
    """
    k = np.asarray(kappa, dtype=float)
    scalar = k.ndim == 0
    k = np.atleast_1d(k)
    out = np.zeros_like(k)
    pos = k > 0
    kp = k[pos]
    if q == 1:
        out[pos] = sc.i1e(kp) / sc.i0e(kp)
    elif q == 2:
        # coth k - 1/k, with a series near 0 to dodge cancellation
        small = kp < 1e-3
        big = ~small
        vals = np.empty_like(kp)
        ks = kp[small]
        vals[small] = ks / 3.0 - ks**3 / 45.0
        kb = kp[big]
        vals[big] = (1.0 + np.exp(-2.0 * kb)) / (-np.expm1(-2.0 * kb)) - 1.0 / kb
        out[pos] = vals
    else:
        nu = 0.5 * (q - 1)
        out[pos] = np.exp(log_bessel_i(nu + 1.0, kp) - log_bessel_i(nu, kp))
    return float(out[0]) if scalar else out


def _ratio_derivative(q: int, kappa: np.ndarray, a: np.ndarray) -> np.ndarray:
    # A'(k) = 1 - A^2 - (q/k) A
    return 1.0 - a * a - q * a / kappa


def solve_concentration(q: int, rbar, kappa_max: float | None = None, tol: float = 1e-13):
    """Maximum likelihood concentration for a given mean resultant length.

    Solves ``A_{q+1}(kappa) = rbar`` by safeguarded Newton iteration started at
    ``rbar (q + 1 - rbar^2) / (1 - rbar^2)``; any element that leaves its bracket
    falls back to bisection.

    Parameters
    ----------
    q : int
        Sphere dimension.
    rbar : float or array_like
        Mean resultant length(s) in ``[0, 1)``.
    kappa_max : float, optional
        Upper cap on the solution. With a cap, ``rbar >= 1`` returns the cap
        instead of raising.
    """
    r = np.asarray(rbar, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r).copy()
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise DomainError("mean resultant length must be in [0, 1)")
    if kappa_max is None and np.any(r >= 1.0):
        raise DegenerateSampleError("mean resultant length is 1: all points coincide")

    out = np.zeros_like(r)
    capped = np.zeros(r.shape, dtype=bool)
    if kappa_max is not None:
        capped = r >= bessel_ratio(q, kappa_max)
        out[capped] = kappa_max
    todo = (r > 0) & ~capped
    if not np.any(todo):
        return float(out[0]) if scalar else out

    rt = r[todo]
    k = rt * (q + 1 - rt * rt) / (1.0 - rt * rt)
    lo = np.zeros_like(rt)
    # bracket [0, hi] grown until A(hi) >= rbar
    hi = 2.0 * k + 1.0
    while True:
        above = bessel_ratio(q, hi) < rt
        if not np.any(above):
            break
        hi[above] *= 2.0
    for _ in range(100):
        a = bessel_ratio(q, k)
        g = a - rt
        lo = np.where(g < 0, np.maximum(lo, k), lo)
        hi = np.where(g > 0, np.minimum(hi, k), hi)
        step = g / _ratio_derivative(q, k, a)
        k_new = k - step
        outside = ~np.isfinite(k_new) | (k_new <= lo) | (k_new >= hi)
        k_new = np.where(outside, 0.5 * (lo + hi), k_new)
        done = np.abs(k_new - k) <= tol * np.maximum(k_new, 1e-300)
        k = k_new
        if np.all(done):
            break
    if kappa_max is not None:
        k = np.minimum(k, kappa_max)
    out[todo] = k
    return float(out[0]) if scalar else out


def vm_kernel_constants(q: int) -> tuple[float, float, float]:
    """Kernel constants ``(lambda_q, b_q, d_q)`` for ``L(r) = exp(-r)``."""
    return (2.0 * math.pi) ** (q / 2.0), q / 2.0, 2.0 ** (-q / 2.0)
