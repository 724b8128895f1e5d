"""Error functionals: the Psi operator, curvature terms, AMISE bandwidths,
exact MISE for von Mises mixtures and the circular AMISE used by h_OLI."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy import special as sc

from .models import VonMisesMixture
from .quadrature import QuadratureRule, build_rule
from .special import log_bessel_i, log_cq, vm_kernel_constants

H_WINDOW = (1e-2, 10.0)
GRID_POINTS = 60
H_RTOL = 1e-4


class RiskError(ValueError):
    pass


# ---------------------------------------------------------------------------
# curvature


def psi(mixture: VonMisesMixture, x) -> np.ndarray:
    """Psi functional of a von Mises mixture at the points `x`.

    For one component, ``kappa C_q(kappa) e^{kappa t} (-t + kappa (1 - t^2) / q)``
    with ``t = x^T mu``; mixtures add componentwise.
    """
    x = np.asarray(x, dtype=float)
    q = mixture.q
    t = x @ mixture.means.T
    k = mixture.kappas
    # kappa = 0 components contribute nothing; their log factor is -inf
    with np.errstate(divide="ignore"):
        lead = np.log(mixture.weights) + np.log(k) + mixture.log_cqs
    val = np.exp(lead + k * t) * (-t + k * (1.0 - t * t) / q)
    return np.where(k > 0, val, 0.0).sum(axis=1)


def log_curvature_vm(q: int, kappa: float) -> float:
    """Log of the closed-form curvature ``R(Psi(f, .))`` of ``vM(mu, kappa)``."""
    if kappa < 0:
        raise RiskError("kappa must be >= 0")
    if kappa == 0:
        return -math.inf
    a = math.log(2.0 * q) + log_bessel_i((q + 1) / 2.0, 2.0 * kappa)
    b = math.log((2.0 + q) * kappa) + log_bessel_i((q + 3) / 2.0, 2.0 * kappa)
    return (0.5 * (q + 1) * math.log(kappa) - (q + 2) * math.log(2.0) - 0.5 * (q + 1) * math.log(math.pi)
            - 2.0 * log_bessel_i((q - 1) / 2.0, kappa) - math.log(q) + np.logaddexp(a, b))


def curvature_vm(q: int, kappa: float) -> float:
    """Curvature term of a von Mises density.

    ``kappa^((q+1)/2) [2q I_{(q+1)/2}(2k) + (2+q) k I_{(q+3)/2}(2k)]
    / (2^(q+2) pi^((q+1)/2) I_{(q-1)/2}(k)^2 q)``, zero at ``kappa = 0``.
    """
    return float(math.exp(log_curvature_vm(q, kappa)))


def curvature_vm_q2(kappa: float) -> float:
    """Spherical curvature through hyperbolic functions (independent check)."""
    k = kappa
    if k == 0:
        return 0.0
    # k [(1 + 4k^2) sinh 2k - 2k cosh 2k] / (64 pi sinh^2 k), with numerator and
    # denominator both scaled by e^{-2k}
    num = (1.0 + 4.0 * k * k) * (-math.expm1(-4.0 * k)) / 2.0 - 2.0 * k * (1.0 + math.exp(-4.0 * k)) / 2.0
    den = (-math.expm1(-2.0 * k)) ** 2 / 4.0
    return k * num / (64.0 * math.pi * den)


@dataclass(frozen=True)
class CurvatureReport:
    value: float
    method: str
    error: float = 0.0


def curvature_mixture(mixture: VonMisesMixture, rule: QuadratureRule | None = None) -> CurvatureReport:
    """``int Psi(f, x)^2`` for a mixture, by the supplied integration rule.

    A single component uses the closed form.
    """
    if mixture.n_components == 1:
        return CurvatureReport(curvature_vm(mixture.q, float(mixture.kappas[0])), "closed-form")
    rule = build_rule(mixture.q) if rule is None else rule
    if rule.dim != mixture.q:
        raise RiskError("rule dimension does not match the mixture")
    vals = psi(mixture, rule.nodes) ** 2
    value = float(rule.weights @ vals)
    err = 0.0
    if rule.kind == "monte-carlo":
        err = float(rule.weights.sum() * vals.std(ddof=1) / math.sqrt(rule.size))
    return CurvatureReport(value, "monte-carlo" if rule.kind == "monte-carlo" else "quadrature", err)


def h_amise(q: int, n: int, curvature: float) -> float:
    """AMISE-optimal bandwidth for the von Mises kernel."""
    if not curvature > 0:
        raise RiskError("curvature must be positive")
    lam, b, d = vm_kernel_constants(q)
    return (q * d / (4.0 * b * b * lam * curvature * n)) ** (1.0 / (4 + q))


def h_amise_vm_form(q: int, n: int, curvature: float) -> float:
    """Same bandwidth written as ``[q 2^q pi^(q/2) R n]^(-1/(4+q))``."""
    if not curvature > 0:
        raise RiskError("curvature must be positive")
    return (q * 2.0**q * math.pi ** (q / 2.0) * curvature * n) ** (-1.0 / (4 + q))


# ---------------------------------------------------------------------------
# exact MISE


def log_variance_term(q: int, h) -> np.ndarray:
    """``log V(h)`` with ``V(h) = C_q(1/h^2)^2 / C_q(2/h^2)``."""
    k = 1.0 / np.square(h)
    return 2.0 * log_cq(q, k) - log_cq(q, 2.0 * k)


def log_expected_kde(mixture: VonMisesMixture, x, h: float) -> np.ndarray:
    """``log E[f_h(x)]`` when sampling from `mixture`."""
    x = np.asarray(x, dtype=float)
    q = mixture.q
    k = 1.0 / (h * h)
    t = x @ mixture.means.T
    kap = mixture.kappas
    norm = np.sqrt(np.maximum(k * k + kap * kap + 2.0 * k * kap * t, 0.0))
    with np.errstate(divide="ignore"):
        lw = np.log(mixture.weights)
    terms = lw + mixture.log_cqs + log_cq(q, k) - log_cq(q, norm.ravel()).reshape(norm.shape)
    return sc.logsumexp(terms, axis=1)


def exact_mise(mixture: VonMisesMixture, n: int, h: float, rule: QuadratureRule | None = None,
               f_values: np.ndarray | None = None) -> float:
    """Exact MISE of the von Mises kernel estimator under a vM mixture.

    ``V(h)/n + int (E f_h - f)^2 - (1/n) int (E f_h)^2``.

    Parameters
    ----------
    mixture : VonMisesMixture
        Sampling density.
    n : int
        Sample size.
    h : float
        Bandwidth.
    rule : QuadratureRule, optional
        Integration rule; the default rule for the dimension if omitted.
    f_values : ndarray, optional
        Precomputed mixture density at the rule nodes.
    """
    if n < 1 or not h > 0:
        raise RiskError("need n >= 1 and h > 0")
    rule = build_rule(mixture.q) if rule is None else rule
    f = mixture.density(rule.nodes) if f_values is None else f_values
    ef = np.exp(log_expected_kde(mixture, rule.nodes, h))
    integral = rule.weights @ ((ef - f) ** 2 - ef * ef / n)
    return float(np.exp(log_variance_term(mixture.q, h)) / n + integral)


def exact_mise_matrix(mixture: VonMisesMixture, n: int, h: float, rule: QuadratureRule | None = None) -> float:
    """Exact MISE through the ``p^T [(1 - 1/n) P2 - 2 P1 + P0] p`` form.

    Slower than :func:`exact_mise`; kept as an independent cross-check. The
    ``P1`` and ``P2`` entries are integrated with the rule, ``P0`` is closed.
    """
    q = mixture.q
    rule = build_rule(q) if rule is None else rule
    x = rule.nodes
    k = 1.0 / (h * h)
    mu, kap, lc = mixture.means, mixture.kappas, mixture.log_cqs
    t = x @ mu.T
    lconv = lc + log_cq(q, k) - log_cq(q, np.sqrt(np.maximum(k * k + kap**2 + 2 * k * kap * t, 0.0)).ravel()).reshape(t.shape)
    lvm = lc + kap * t
    m = mixture.n_components
    p0 = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            r = np.linalg.norm(kap[i] * mu[i] + kap[j] * mu[j])
            p0[i, j] = math.exp(lc[i] + lc[j] - float(log_cq(q, r)))
    p1 = np.einsum("k,ki,kj->ij", rule.weights, np.exp(lconv), np.exp(lvm))
    p2 = np.einsum("k,ki,kj->ij", rule.weights, np.exp(lconv), np.exp(lconv))
    p = mixture.weights
    quad = p @ ((1.0 - 1.0 / n) * p2 - 2.0 * p1 + p0) @ p
    return float(np.exp(log_variance_term(q, h)) / n + quad)


# ---------------------------------------------------------------------------
# circular AMISE


def second_derivative_circular(mixture: VonMisesMixture, theta) -> np.ndarray:
    """``f''(theta)`` of a circular von Mises mixture."""
    if mixture.q != 1:
        raise RiskError("circular mixtures only")
    theta = np.asarray(theta, dtype=float)
    m = np.arctan2(mixture.means[:, 1], mixture.means[:, 0])
    d = theta[:, None] - m[None, :]
    k = mixture.kappas
    c = np.cos(d)
    dens = mixture.weights * np.exp(mixture.log_cqs + k * c)
    return (dens * (k * k * np.sin(d) ** 2 - k * c)).sum(axis=1)


def roughness_second_derivative(mixture: VonMisesMixture, rule: QuadratureRule | None = None) -> float:
    """``int f''(theta)^2 dtheta`` by periodic Simpson."""
    rule = build_rule(1) if rule is None else rule
    theta = np.arctan2(rule.nodes[:, 1], rule.nodes[:, 0])
    return float(rule.weights @ second_derivative_circular(mixture, theta) ** 2)


def circular_amise_oli(mixture: VonMisesMixture, n: int, h, roughness: float | None = None):
    """Circular AMISE of the von Mises kernel estimator.

    The kernel concentration is ``nu = 1/h^2``::

        (1/16) [1 - I_2(nu)/I_0(nu)]^2 int f''^2 + I_0(2 nu) / (2 n pi I_0(nu)^2)
    """
    if mixture.q != 1:
        raise RiskError("the circular AMISE needs q = 1")
    r = roughness_second_derivative(mixture) if roughness is None else roughness
    nu = 1.0 / np.square(np.asarray(h, dtype=float))
    ratio = sc.ive(2, nu) / sc.i0e(nu)
    bias = (1.0 - ratio) ** 2 * r / 16.0
    var = np.exp(np.log(sc.i0e(2.0 * nu)) - 2.0 * np.log(sc.i0e(nu))) / (2.0 * n * math.pi)
    out = bias + var
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# 1-D bandwidth search


@dataclass(frozen=True)
class RiskMinimum:
    """Result of a grid plus golden-section bandwidth search."""

    h: float
    value: float
    at_boundary: bool
    window: tuple
    grid_h: np.ndarray = field(repr=False, compare=False)
    grid_values: np.ndarray = field(repr=False, compare=False)
    evaluations: int = 0


def minimize_risk(objective, h_lo: float = H_WINDOW[0], h_hi: float = H_WINDOW[1],
                  grid: int = GRID_POINTS, rtol: float = H_RTOL, widen: int = 2) -> RiskMinimum:
    """Minimize ``objective(h)`` over ``[h_lo, h_hi]``.

    A log-spaced grid locates the best point, then golden-section search
    refines it inside the neighbouring grid cells. If the best grid point is
    an endpoint the window grows tenfold on that side, at most `widen`
    times; a minimum still on the edge is returned with ``at_boundary``.
    """
    if not 0 < h_lo < h_hi:
        raise RiskError("need 0 < h_lo < h_hi")
    evals = 0
    for attempt in range(widen + 1):
        hs = np.geomspace(h_lo, h_hi, grid)
        vals = np.array([objective(h) for h in hs], dtype=float)
        evals += grid
        finite = np.isfinite(vals)
        if not np.any(finite):
            raise RiskError("objective is not finite anywhere on the grid")
        vals_f = np.where(finite, vals, np.inf)
        i = int(np.argmin(vals_f))
        lo_edge, hi_edge = i == 0, i == grid - 1
        if not (lo_edge or hi_edge) or attempt == widen:
            break
        if lo_edge:
            h_lo /= 10.0
        if hi_edge:
            h_hi *= 10.0
    if lo_edge or hi_edge:
        return RiskMinimum(float(hs[i]), float(vals_f[i]), True, (h_lo, h_hi), hs, vals, evals)

    counter = [0]

    def f(h):
        counter[0] += 1
        v = objective(h)
        return v if np.isfinite(v) else np.inf

    res = optimize.minimize_scalar(f, bracket=(hs[i - 1], hs[i], hs[i + 1]), method="golden",
                                   options={"xtol": rtol})
    h_best, v_best = float(res.x), float(res.fun)
    if not v_best <= vals_f[i]:
        h_best, v_best = float(hs[i]), float(vals_f[i])
    return RiskMinimum(h_best, v_best, False, (h_lo, h_hi), hs, vals, evals + counter[0])


@dataclass(frozen=True)
class MiseCurve:
    h: np.ndarray
    values: np.ndarray
    h_min: float
    value_min: float
    n: int
    q: int
    source: str


def mise_curve(mixture: VonMisesMixture, n: int, h_grid=None, rule: QuadratureRule | None = None) -> MiseCurve:
    """Exact MISE on a bandwidth grid together with its refined minimizer."""
    rule = build_rule(mixture.q) if rule is None else rule
    f = mixture.density(rule.nodes)
    h_grid = np.geomspace(*H_WINDOW, 100) if h_grid is None else np.asarray(h_grid, dtype=float)
    vals = np.array([exact_mise(mixture, n, h, rule, f) for h in h_grid])
    best = minimize_risk(lambda h: exact_mise(mixture, n, h, rule, f))
    return MiseCurve(h_grid, vals, best.h, best.value, n, mixture.q, "exact")
