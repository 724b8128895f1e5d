"""Bandwidth selectors for the von Mises kernel estimator.

Seven selectors share one calling convention ``selector(data, ctx=None)`` and
return a :class:`BandwidthReport`:

========  ==========================================================
``rot``   plug-in with a single von Mises reference density
``tay``   circular plug-in without the ``2 I_1(2k)`` curvature term
``ami``   plug-in with a BIC-selected mixture, asymptotic MISE
``emi``   plug-in with a BIC-selected mixture, exact MISE
``lscv``  least squares cross-validation
``lcv``   likelihood cross-validation
``oli``   circular AMISE with an AIC-selected mixture
========  ==========================================================

A :class:`SelectionContext` carries per-sample caches (mixture fits and
pairwise inner products) so several selectors on the same sample reuse them.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .geometry import as_unit
from .kde import H_MAX, H_MIN
from .mixture import FitCache, FitResult, OrderSearchTrace, select_mixture
from .models import VonMisesMixture
from .quadrature import QuadratureRule, build_rule
from .risk import (
    RiskError,
    RiskMinimum,
    circular_amise_oli,
    curvature_mixture,
    curvature_vm,
    exact_mise,
    h_amise,
    minimize_risk,
    roughness_second_derivative,
)
from .special import KAPPA_CAP, log_bessel_i, log_cq, solve_concentration

SELECTORS = ("rot", "tay", "ami", "emi", "lscv", "lcv", "oli")
CIRCULAR_ONLY = ("tay", "oli")


class SelectorError(ValueError):
    pass


@dataclass(frozen=True)
class BandwidthReport:
    """Selected bandwidth with what is needed to replay the choice."""

    selector: str
    h: float
    n: int
    q: int
    kappa_hat: float | None = None
    mixture: VonMisesMixture | None = None
    order_trace: OrderSearchTrace | None = None
    search: RiskMinimum | None = field(default=None, repr=False)
    at_boundary: bool = False
    fallback: bool = False
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        out = {
            "selector": self.selector,
            "h": self.h,
            "n": self.n,
            "q": self.q,
            "kappa_hat": self.kappa_hat,
            "at_boundary": self.at_boundary,
            "fallback": self.fallback,
            "wall_time": self.wall_time,
        }
        if self.mixture is not None:
            out["mixture"] = self.mixture.to_dict()
        if self.order_trace is not None:
            out["order_search"] = {
                "criterion": self.order_trace.criterion,
                "explored": {str(k): v for k, v in self.order_trace.explored.items()},
                "chosen": self.order_trace.chosen,
                "pruned": list(self.order_trace.pruned),
            }
        if self.search is not None:
            out["search"] = {
                "window": list(self.search.window),
                "value": self.search.value,
                "evaluations": self.search.evaluations,
                "grid_h": self.search.grid_h.tolist(),
                "grid_values": self.search.grid_values.tolist(),
            }
        return out


class SelectionContext:
    """Per-sample caches shared between selectors.

    Parameters
    ----------
    data : array_like
        Sample ``(n, q+1)`` of unit vectors.
    seed : int
        Seed for the mixture-fit restarts.
    restarts : int
        EM restarts per order.
    rule : QuadratureRule, optional
        Rule used by the exact MISE in ``emi``; default rule for the dimension.
    """

    def __init__(self, data, seed: int = 0, restarts: int = 10, rule: QuadratureRule | None = None):
        x = as_unit(np.atleast_2d(np.asarray(data, dtype=float)))
        if x.shape[0] < 2:
            raise SelectorError("bandwidth selection needs at least two observations")
        self.data = x
        self.seed = seed
        self.restarts = restarts
        self._rule = rule
        self.fits = FitCache(x, seed, restarts)
        self._orders: dict[str, tuple[FitResult, OrderSearchTrace]] = {}
        self._gram = None
        self._pairs = None

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def q(self) -> int:
        return self.data.shape[1] - 1

    @property
    def rule(self) -> QuadratureRule:
        if self._rule is None:
            self._rule = build_rule(self.q, seed=0)
        return self._rule

    def mixture_fit(self, criterion: str = "bic") -> tuple[FitResult, OrderSearchTrace]:
        if criterion not in self._orders:
            self._orders[criterion] = select_mixture(self.data, seed=self.seed, criterion=criterion,
                                                     restarts=self.restarts, cache=self.fits)
        return self._orders[criterion]

    @property
    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = np.clip(self.data @ self.data.T, -1.0, 1.0)
        return self._gram

    @property
    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Inner products and ``||X_i + X_j||`` over pairs ``i < j``."""
        if self._pairs is None:
            iu = np.triu_indices(self.n, 1)
            t = self.gram[iu]
            self._pairs = (t, np.sqrt(np.maximum(2.0 + 2.0 * t, 0.0)))
        return self._pairs


def _context(data, ctx: SelectionContext | None, seed: int = 0) -> SelectionContext:
    return SelectionContext(data, seed) if ctx is None else ctx


def _clip_h(h: float) -> tuple[float, bool]:
    if not np.isfinite(h) or h >= H_MAX:
        return H_MAX, True
    if h <= H_MIN:
        return H_MIN, True
    return float(h), False


def ml_concentration(data) -> float:
    """ML concentration of a single von Mises fit, capped at 1e4."""
    x = np.asarray(data, dtype=float)
    rbar = float(np.linalg.norm(x.mean(axis=0)))
    return float(solve_concentration(x.shape[1] - 1, min(rbar, 1.0), kappa_max=KAPPA_CAP))


# ---------------------------------------------------------------------------
# closed-form plug-in rules


def rot_bandwidth(q: int, kappa: float, n: int) -> float:
    """Rule-of-thumb bandwidth for a vM(kappa) reference; ``inf`` at kappa = 0."""
    r = curvature_vm(q, kappa)
    if not r > 0:
        return math.inf
    return h_amise(q, n, r)


def tay_bandwidth(kappa: float, n: int) -> float:
    """``[4 sqrt(pi) I_0(k)^2 / (3 k^2 I_2(2k) n)]^(1/5)``, computed in logs."""
    if not kappa > 0:
        return math.inf
    lg = (math.log(4.0) + 0.5 * math.log(math.pi) + 2.0 * log_bessel_i(0, kappa)
          - math.log(3.0) - 2.0 * math.log(kappa) - log_bessel_i(2, 2.0 * kappa) - math.log(n))
    return math.exp(lg / 5.0)


def rot_bandwidth_circular_terms(kappa: float, n: int, with_i1: bool = True) -> float:
    """Circular rule of thumb written out term by term.

    ``[4 sqrt(pi) I_0(k)^2 / (k (2 I_1(2k) + 3k I_2(2k)) n)]^(1/5)``; dropping the
    ``2 I_1(2k)`` term gives the ``tay`` rule.
    """
    # I_0(k)^2 and I_nu(2k) carry the same e^{2k}, so scaled values cancel it
    i0 = sc.i0e(kappa)
    den = kappa * ((2.0 * sc.i1e(2 * kappa) if with_i1 else 0.0) + 3.0 * kappa * sc.ive(2, 2 * kappa))
    return (4.0 * math.sqrt(math.pi) * i0 * i0 / (den * n)) ** 0.2


def h_rot(data, ctx: SelectionContext | None = None) -> BandwidthReport:
    """Rule of thumb: ML von Mises fit, then its AMISE-optimal bandwidth."""
    t0 = time.perf_counter()
    ctx = _context(data, ctx)
    kap = ml_concentration(ctx.data)
    h, edge = _clip_h(rot_bandwidth(ctx.q, kap, ctx.n))
    return BandwidthReport("rot", h, ctx.n, ctx.q, kappa_hat=kap, at_boundary=edge,
                           wall_time=time.perf_counter() - t0)


def h_tay(data, ctx: SelectionContext | None = None) -> BandwidthReport:
    """Circular plug-in rule with the reduced curvature denominator."""
    t0 = time.perf_counter()
    ctx = _context(data, ctx)
    if ctx.q != 1:
        raise SelectorError("the tay selector is defined for circular data only")
    kap = ml_concentration(ctx.data)
    h, edge = _clip_h(tay_bandwidth(kap, ctx.n))
    return BandwidthReport("tay", h, ctx.n, ctx.q, kappa_hat=kap, at_boundary=edge,
                           wall_time=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# mixture plug-ins


def h_ami_from_mixture(mixture: VonMisesMixture, n: int, rule: QuadratureRule | None = None) -> tuple[float, bool]:
    """AMISE bandwidth for a fixed reference mixture."""
    rep = curvature_mixture(mixture, rule)
    if not rep.value > 0:
        return H_MAX, True
    return _clip_h(h_amise(mixture.q, n, rep.value))


def h_emi_from_mixture(mixture: VonMisesMixture, n: int, rule: QuadratureRule | None = None) -> RiskMinimum:
    """Minimizer of the exact MISE for a fixed reference mixture."""
    rule = build_rule(mixture.q, seed=0) if rule is None else rule
    f = mixture.density(rule.nodes)
    return minimize_risk(lambda h: exact_mise(mixture, n, h, rule, f))


def h_ami(data, ctx: SelectionContext | None = None) -> BandwidthReport:
    """Asymptotic plug-in with a BIC-selected von Mises mixture."""
    t0 = time.perf_counter()
    ctx = _context(data, ctx)
    fit, trace = ctx.mixture_fit("bic")
    h, edge = h_ami_from_mixture(fit.mixture, ctx.n, ctx.rule)
    return BandwidthReport("ami", h, ctx.n, ctx.q, mixture=fit.mixture, order_trace=trace, at_boundary=edge,
                           fallback=trace.fallback, wall_time=time.perf_counter() - t0)


def h_emi(data, ctx: SelectionContext | None = None) -> BandwidthReport:
    """Exact-MISE plug-in with a BIC-selected von Mises mixture."""
    t0 = time.perf_counter()
    ctx = _context(data, ctx)
    fit, trace = ctx.mixture_fit("bic")
    res = h_emi_from_mixture(fit.mixture, ctx.n, ctx.rule)
    h, edge = _clip_h(res.h)
    return BandwidthReport("emi", h, ctx.n, ctx.q, mixture=fit.mixture, order_trace=trace, search=res,
                           at_boundary=edge or res.at_boundary, fallback=trace.fallback,
                           wall_time=time.perf_counter() - t0)


def h_oli(data, ctx: SelectionContext | None = None) -> BandwidthReport:
    """Circular AMISE minimizer with an AIC-selected mixture as reference."""
    t0 = time.perf_counter()
    ctx = _context(data, ctx)
    if ctx.q != 1:
        raise SelectorError("the oli selector is defined for circular data only")
    fit, trace = ctx.mixture_fit("aic")
    rough = roughness_second_derivative(fit.mixture, ctx.rule)
    res = minimize_risk(lambda h: circular_amise_oli(fit.mixture, ctx.n, h, rough))
    h, edge = _clip_h(res.h)
    return BandwidthReport("oli", h, ctx.n, ctx.q, mixture=fit.mixture, order_trace=trace, search=res,
                           at_boundary=edge or res.at_boundary, fallback=trace.fallback,
                           wall_time=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# cross-validation


def _log_sum_exp_shifted(v: np.ndarray, top: float) -> float:
    # log sum exp(v) for v <= top; the plain sum is enough unless it underflows
    tot = float(np.exp(v - top).sum())
    if tot > 1e-250:
        return top + math.log(tot)
    return float(sc.logsumexp(v))


def _log_sum_inv_cq(q: int, z: np.ndarray, top: float) -> float:
    """``log sum_i 1 / C_q(z_i)`` for ``0 <= z_i <= top``."""
    if q == 1:
        # 1 / C_1(z) = 2 pi I_0(z)
        tot = float((sc.i0e(z) * np.exp(z - top)).sum())
        if tot > 1e-250:
            return math.log(2.0 * math.pi) + top + math.log(tot)
    return float(sc.logsumexp(-log_cq(q, z)))


def cv2(data, h: float, ctx: SelectionContext | None = None) -> float:
    """Least squares cross-validation score (to be maximized).

    ``2/n sum_i f^{-i}(X_i) - int f^2`` written with pairwise sums only::

        4/(n(n-1)) sum_{i<j} C e^{t_ij/h^2}
          - 2/n^2 sum_{i<j} C^2 / C_q(||X_i + X_j|| / h^2)
          - C^2 / (n C_q(2/h^2))

    with ``C = C_q(1/h^2)`` and ``t_ij = X_i^T X_j``.
    """
    ctx = _context(data, ctx)
    n, q = ctx.n, ctx.q
    t, s = ctx.pairs
    k = 1.0 / (h * h)
    lc = float(log_cq(q, k))
    a = math.log(4.0 / (n * (n - 1))) + lc + _log_sum_exp_shifted(k * t, k)
    b = math.log(2.0 / (n * n)) + 2.0 * lc + _log_sum_inv_cq(q, k * s, 2.0 * k)
    c = 2.0 * lc - math.log(n) - float(log_cq(q, 2.0 * k))
    return math.exp(a) - math.exp(b) - math.exp(c)


def cv_kl(data, h: float, ctx: SelectionContext | None = None) -> float:
    """Likelihood cross-validation score ``sum_i log f^{-i}(X_i)``."""
    ctx = _context(data, ctx)
    n = ctx.n
    k = 1.0 / (h * h)
    # row sums of exp(k (t_ij - 1)) without the diagonal; rows that
    # underflow are redone with log-sum-exp
    e = np.exp(k * (ctx.gram - 1.0))
    np.fill_diagonal(e, 0.0)
    rows = e.sum(axis=1)
    small = rows < 1e-250
    with np.errstate(divide="ignore"):
        lrows = np.log(rows) + k
    if np.any(small):
        g = k * ctx.gram[small]
        g[np.arange(g.shape[0]), np.flatnonzero(small)] = -np.inf
        lrows[small] = sc.logsumexp(g, axis=1)
    return float(np.sum(lrows) + n * (float(log_cq(ctx.q, k)) - math.log(n - 1)))


def h_lscv(data, ctx: SelectionContext | None = None) -> BandwidthReport:
    """Bandwidth maximizing the least squares cross-validation score."""
    t0 = time.perf_counter()
    ctx = _context(data, ctx)
    try:
        res = minimize_risk(lambda h: -cv2(ctx.data, h, ctx))
    except RiskError as exc:
        raise SelectorError(f"least squares CV failed: {exc}") from exc
    h, edge = _clip_h(res.h)
    return BandwidthReport("lscv", h, ctx.n, ctx.q, search=res, at_boundary=edge or res.at_boundary,
                           wall_time=time.perf_counter() - t0)


def h_lcv(data, ctx: SelectionContext | None = None) -> BandwidthReport:
    """Bandwidth maximizing the likelihood cross-validation score."""
    t0 = time.perf_counter()
    ctx = _context(data, ctx)
    try:
        res = minimize_risk(lambda h: -cv_kl(ctx.data, h, ctx))
    except RiskError as exc:
        raise SelectorError(f"likelihood CV is -inf on the whole window; try lscv ({exc})") from exc
    h, edge = _clip_h(res.h)
    return BandwidthReport("lcv", h, ctx.n, ctx.q, search=res, at_boundary=edge or res.at_boundary,
                           wall_time=time.perf_counter() - t0)


REGISTRY = {
    "rot": h_rot,
    "tay": h_tay,
    "ami": h_ami,
    "emi": h_emi,
    "lscv": h_lscv,
    "lcv": h_lcv,
    "oli": h_oli,
}


def select(data, method: str, seed: int = 0, ctx: SelectionContext | None = None) -> BandwidthReport:
    """Run selector `method` on `data`."""
    try:
        fn = REGISTRY[method]
    except KeyError:
        raise SelectorError(f"unknown selector {method!r}; choose from {', '.join(SELECTORS)}") from None
    return fn(data, _context(data, ctx, seed))
