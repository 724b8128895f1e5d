"""Directional density catalog, tangent-normal sampling and the M1-M20 scenarios.

Rotationally symmetric families share one sampler: the radial coordinate
``t = mu^T x`` is drawn by inverting a tabulated quantile function and the
tangent direction uniformly on the (q-1)-sphere.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats
from scipy.interpolate import PchipInterpolator
from scipy.special import erfcx, gammaln, logsumexp, pbdv

from .geometry import as_unit, complete_basis, rho1, rho2
from .quadrature import uniform_sphere_sample
from .special import log_cq, log_sphere_area

log = logging.getLogger(__name__)

N_QUANTILES = 2000
_THETA_GRID = 20001


class ModelError(ValueError):
    pass


def _check_finite(**kw):
    for k, v in kw.items():
        if not np.all(np.isfinite(np.asarray(v, dtype=float))):
            raise ModelError(f"parameter {k} must be finite")


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise ModelError(f"points have dimension {x.shape[-1]}, expected {d}")
    return x


class DensityModel:
    """Common interface: vectorized log-density and sampling on the q-sphere."""

    q: int
    rotationally_symmetric = False

    @property
    def dim(self) -> int:
        return self.q + 1

    def log_density(self, x) -> np.ndarray:
        raise NotImplementedError

    def density(self, x) -> np.ndarray:
        return np.exp(self.log_density(x))

    def sample(self, n: int, rng) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# radial quantile tables


@dataclass(frozen=True)
class RadialQuantileTable:
    """Quantile function of the radial coordinate ``t`` on (-1, 1).

    Stored as ``theta(p)`` with ``t = cos(theta)``; working on the angle keeps
    the tabulated density bounded at both poles. Since ``t`` decreases in
    ``theta``, the ``p``-quantile of ``t`` is ``cos(theta(1 - p))``.
    """

    probs: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)

    @functools.cached_property
    def _spline(self):
        return PchipInterpolator(self.probs, self.theta)

    @property
    def quantiles(self) -> np.ndarray:
        # t-quantiles at ``probs``, nondecreasing
        return np.cos(self.theta[::-1])

    def __call__(self, p) -> np.ndarray:
        th = self._spline(1.0 - np.clip(p, 0.0, 1.0))
        return np.cos(np.clip(th, 0.0, math.pi))


def _theta_cdf(log_g, q: int, grid: int = _THETA_GRID):
    theta = np.linspace(0.0, math.pi, grid)
    lg = log_g(np.cos(theta))
    if q > 1:
        with np.errstate(divide="ignore"):
            lg = lg + (q - 1) * np.log(np.sin(theta))
    dens = np.exp(lg - np.max(lg))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]))])
    return theta, cdf / cdf[-1]


def build_quantile_table(log_g, q: int, size: int = N_QUANTILES) -> RadialQuantileTable:
    """Tabulate the radial quantile function of ``g(t) (1 - t^2)^(q/2 - 1)``."""
    theta, cdf = _theta_cdf(log_g, q)
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    probs = np.linspace(0.0, 1.0, size)
    th = np.interp(probs, cdf[keep], theta[keep])
    th[0], th[-1] = theta[keep][0], theta[keep][-1]
    th = np.maximum.accumulate(th)
    # pchip needs strictly increasing abscissae only; flat theta is fine
    return RadialQuantileTable(probs, th)


class RotationallySymmetric(DensityModel):
    """Density ``c * g(mu^T x)`` with ``c`` fixed by a 1-D integral."""

    rotationally_symmetric = True
    mu: np.ndarray

    def log_g(self, t) -> np.ndarray:
        raise NotImplementedError

    def _radial_integral_log(self) -> float:
        # log of omega_{q-1} * int_0^pi g(cos th) sin^{q-1} th dth
        q = self.q
        theta = np.linspace(0.0, math.pi, 4001)
        lg = self.log_g(np.cos(theta))
        shift = float(np.max(lg))
        peak = float(theta[int(np.argmax(lg))])

        def f(th):
            v = math.exp(float(self.log_g(np.array([math.cos(th)]))[0]) - shift)
            return v * math.sin(th) ** (q - 1) if q > 1 else v

        pts = [p for p in (peak,) if 0.0 < p < math.pi]
        val, _ = integrate.quad(f, 0.0, math.pi, points=pts or None, limit=500, epsabs=0.0, epsrel=1e-12)
        log_omega = math.log(2.0) if q == 1 else log_sphere_area(q - 1)
        return log_omega + math.log(val) + shift

    @functools.cached_property
    def log_norm(self) -> float:
        return -self._radial_integral_log()

    def log_density(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        return self.log_norm + self.log_g(x @ self.mu)

    @functools.cached_property
    def basis(self) -> np.ndarray:
        return complete_basis(self.mu)

    @functools.cached_property
    def quantile_table(self) -> RadialQuantileTable:
        return build_quantile_table(self.log_g, self.q)

    def radial_density(self, t) -> np.ndarray:
        """Density of ``t = mu^T X`` on (-1, 1)."""
        t = np.asarray(t, dtype=float)
        q = self.q
        log_omega = math.log(2.0) if q == 1 else log_sphere_area(q - 1)
        lv = log_omega + self.log_norm + self.log_g(t)
        if q != 2:
            with np.errstate(divide="ignore"):
                lv = lv + (0.5 * q - 1.0) * np.log1p(-t * t)
        return np.exp(lv)

    def sample(self, n: int, rng) -> np.ndarray:
        t = self.quantile_table(rng.random(n))
        if self.q == 1:
            xi = np.where(rng.random(n) < 0.5, -1.0, 1.0)[:, None]
        else:
            xi = uniform_sphere_sample(self.q - 1, n, rng)
        s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
        x = t[:, None] * self.mu[None, :] + s[:, None] * (xi @ self.basis.T)
        return x / np.linalg.norm(x, axis=1, keepdims=True)


def radial_quantile_table(model: RotationallySymmetric) -> RadialQuantileTable:
    if not getattr(model, "rotationally_symmetric", False):
        raise ModelError("radial tables need a rotationally symmetric model")
    return model.quantile_table


def _pole(q: int) -> np.ndarray:
    e = np.zeros(q + 1)
    e[-1] = 1.0
    return e


# ---------------------------------------------------------------------------
# families


class Uniform(RotationallySymmetric):
    def __init__(self, q: int):
        if q < 1:
            raise ModelError("q must be >= 1")
        self.q = int(q)
        self.mu = _pole(q)

    def __repr__(self):
        return f"Uniform(q={self.q})"

    def __eq__(self, other):
        return isinstance(other, Uniform) and other.q == self.q

    __hash__ = None

    def log_g(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    @functools.cached_property
    def log_norm(self) -> float:
        return -log_sphere_area(self.q)

    def sample(self, n: int, rng) -> np.ndarray:
        return uniform_sphere_sample(self.q, n, rng)


class VonMises(RotationallySymmetric):
    """von Mises-Fisher density ``C_q(kappa) exp(kappa mu^T x)``."""

    def __init__(self, mu, kappa: float):
        _check_finite(mu=mu, kappa=kappa)
        if kappa < 0:
            raise ModelError("kappa must be >= 0")
        self.mu = as_unit(mu)
        self.q = self.mu.shape[0] - 1
        self.kappa = float(kappa)

    def __repr__(self):
        return f"VonMises(mu={np.round(self.mu, 4).tolist()}, kappa={self.kappa:g})"

    def log_g(self, t):
        return self.kappa * np.asarray(t, dtype=float)

    @functools.cached_property
    def log_norm(self) -> float:
        return float(log_cq(self.q, self.kappa))


class Watson(RotationallySymmetric):
    def __init__(self, mu, kappa: float):
        _check_finite(mu=mu, kappa=kappa)
        self.mu = as_unit(mu)
        self.q = self.mu.shape[0] - 1
        self.kappa = float(kappa)

    def __repr__(self):
        return f"Watson(mu={np.round(self.mu, 4).tolist()}, kappa={self.kappa:g})"

    def log_g(self, t):
        t = np.asarray(t, dtype=float)
        return self.kappa * t * t

    def log_density(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        # squared before scaling so f(x) == f(-x) bit for bit
        return self.log_norm + self.kappa * np.square(x @ self.mu)


class SmallCircle(RotationallySymmetric):
    def __init__(self, mu, tau: float, nu: float = 0.0):
        _check_finite(mu=mu, tau=tau, nu=nu)
        if not -1.0 < nu < 1.0:
            raise ModelError("nu must lie in (-1, 1)")
        self.mu = as_unit(mu)
        self.q = self.mu.shape[0] - 1
        self.tau = float(tau)
        self.nu = float(nu)

    def __repr__(self):
        return f"SmallCircle(mu={np.round(self.mu, 4).tolist()}, tau={self.tau:g}, nu={self.nu:g})"

    def log_g(self, t):
        t = np.asarray(t, dtype=float)
        return -self.tau * (t - self.nu) ** 2


class DirectionalCauchy(RotationallySymmetric):
    def __init__(self, mu, kappa: float):
        _check_finite(mu=mu, kappa=kappa)
        if kappa < 0:
            raise ModelError("kappa must be >= 0")
        self.mu = as_unit(mu)
        self.q = self.mu.shape[0] - 1
        self.kappa = float(kappa)

    def __repr__(self):
        return f"DirectionalCauchy(mu={np.round(self.mu, 4).tolist()}, kappa={self.kappa:g})"

    def log_g(self, t):
        t = np.asarray(t, dtype=float)
        return -np.log1p(2.0 * self.kappa * (1.0 - t))

    @functools.cached_property
    def log_norm(self) -> float:
        k = self.kappa
        if k == 0.0:
            return -log_sphere_area(self.q)
        if self.q == 1:
            return -(math.log(2.0 * math.pi) - 0.5 * math.log1p(4.0 * k))
        if self.q == 2:
            return -(math.log(math.pi) + math.log(math.log1p(4.0 * k)) - math.log(k))
        return -self._radial_integral_log()


class SkewNormalDirectional(RotationallySymmetric):
    def __init__(self, mu, m: float, sigma: float, lam: float):
        _check_finite(mu=mu, m=m, sigma=sigma, lam=lam)
        if sigma <= 0:
            raise ModelError("sigma must be > 0")
        self.mu = as_unit(mu)
        self.q = self.mu.shape[0] - 1
        self.m, self.sigma, self.lam = float(m), float(sigma), float(lam)

    def __repr__(self):
        return (f"SkewNormalDirectional(mu={np.round(self.mu, 4).tolist()}, m={self.m:g}, "
                f"sigma={self.sigma:g}, lambda={self.lam:g})")

    def log_g(self, t):
        z = (np.asarray(t, dtype=float) - self.m) / self.sigma
        return math.log(2.0 / self.sigma) + stats.norm.logpdf(z) + stats.norm.logcdf(self.lam * z)


def log_pn_integral(p: int, alpha) -> np.ndarray:
    """``log int_0^inf t^(p-1) exp(-(t - alpha)^2 / 2) dt``.

    Exact: the recurrence ``I_{k+1} = alpha I_k + (k-1) I_{k-1}`` for
    ``alpha >= 0`` (all terms positive) and the parabolic cylinder form
    ``Gamma(p) exp(-alpha^2/4) D_{-p}(-alpha)`` for negative ``alpha``.
    """
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    out = np.empty_like(a)
    pos = a >= 0
    ap = a[pos]
    # K_k = I_k exp(alpha^2/2) keeps the recurrence in range
    k_prev = np.sqrt(2.0 * math.pi) * 0.5 * erfcx(-ap / math.sqrt(2.0))
    if p == 1:
        k_cur = k_prev
    else:
        k_cur = ap * k_prev + 1.0
        for k in range(2, p):
            k_prev, k_cur = k_cur, ap * k_cur + (k - 1) * k_prev
    out[pos] = np.log(k_cur) - 0.5 * ap * ap
    an = a[~pos]
    if an.size:
        d, _ = pbdv(-float(p), -an)
        out[~pos] = gammaln(p) - 0.25 * an * an + np.log(d)
    return out


class ProjectedNormal(DensityModel):
    """Direction of a Gaussian vector ``N(mu, Sigma)`` in ``R^(q+1)``."""

    def __init__(self, mu, sigma):
        mu = np.asarray(mu, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        _check_finite(mu=mu, sigma=sigma)
        if sigma.shape != (mu.shape[0], mu.shape[0]):
            raise ModelError("Sigma must be (q+1) x (q+1)")
        self.mu = mu
        self.sigma = sigma
        self.q = mu.shape[0] - 1
        self._chol = np.linalg.cholesky(sigma)
        self._prec = np.linalg.inv(sigma)
        _, self._logdet = np.linalg.slogdet(sigma)

    def __repr__(self):
        return f"ProjectedNormal(mu={np.round(self.mu, 4).tolist()}, diag={np.round(np.diag(self.sigma), 4).tolist()})"

    def log_density(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        p = self.dim
        a = np.einsum("ij,jk,ik->i", x, self._prec, x)
        b = x @ (self._prec @ self.mu)
        c = float(self.mu @ self._prec @ self.mu)
        alpha = b / np.sqrt(a)
        return (-0.5 * p * math.log(2.0 * math.pi) - 0.5 * self._logdet - 0.5 * p * np.log(a)
                + log_pn_integral(p, alpha) - 0.5 * (c - b * b / a))

    def sample(self, n: int, rng) -> np.ndarray:
        z = self.mu[None, :] + rng.standard_normal((n, self.dim)) @ self._chol.T
        return z / np.linalg.norm(z, axis=1, keepdims=True)


def _normalize_weights(w, label: str = "mixture") -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ModelError("weights must be finite and nonnegative")
    s = w.sum()
    if abs(s - 1.0) > 1e-12:
        log.info("%s weights sum to %.6g; renormalizing", label, s)
        w = w / s
    return w


def _sample_mixture(weights, components, n: int, rng, q: int) -> np.ndarray:
    labels = rng.choice(len(weights), size=n, p=weights)
    out = np.empty((n, q + 1))
    for j, comp in enumerate(components):
        idx = np.flatnonzero(labels == j)
        if idx.size:
            out[idx] = comp.sample(idx.size, rng)
    return out


class VonMisesMixture(DensityModel):
    """Finite mixture of von Mises-Fisher densities.

    Parameters
    ----------
    weights : array_like, shape (M,)
    means : array_like, shape (M, q+1)
    kappas : array_like, shape (M,)
    """

    def __init__(self, weights, means, kappas, label: str = "mixture"):
        means = np.atleast_2d(np.asarray(means, dtype=float))
        kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
        _check_finite(weights=weights, means=means, kappas=kappas)
        if np.any(kappas < 0):
            raise ModelError("concentrations must be >= 0")
        w = _normalize_weights(weights, label)
        if not (w.shape[0] == means.shape[0] == kappas.shape[0]):
            raise ModelError("weights, means and kappas must have equal length")
        self.weights = w
        self.means = as_unit(means)
        self.kappas = kappas
        self.q = means.shape[1] - 1

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    def __repr__(self):
        return f"VonMisesMixture(M={self.n_components}, q={self.q})"

    def __eq__(self, other):
        return (isinstance(other, VonMisesMixture) and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.means, other.means) and np.array_equal(self.kappas, other.kappas))

    __hash__ = None

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "means": self.means.tolist(), "kappas": self.kappas.tolist()}

    @functools.cached_property
    def log_cqs(self) -> np.ndarray:
        return log_cq(self.q, self.kappas)

    def component_log_densities(self, x) -> np.ndarray:
        """``(N, M)`` array of ``log p_j + log vM_j(x)``."""
        x = _as_points(x, self.dim)
        with np.errstate(divide="ignore"):
            lw = np.log(self.weights)
        return lw + self.log_cqs + (x @ self.means.T) * self.kappas

    def log_density(self, x) -> np.ndarray:
        return logsumexp(self.component_log_densities(x), axis=1)

    @functools.cached_property
    def components(self) -> list:
        return [VonMises(m, k) for m, k in zip(self.means, self.kappas)]

    def sample(self, n: int, rng) -> np.ndarray:
        return _sample_mixture(self.weights, self.components, n, rng, self.q)


class Mixture(DensityModel):
    """General finite mixture of catalog densities."""

    def __init__(self, weights, components, label: str = "mixture"):
        self.weights = _normalize_weights(weights, label)
        self.components = list(components)
        qs = {c.q for c in self.components}
        if len(qs) != 1 or len(self.components) != self.weights.shape[0]:
            raise ModelError("components must share a dimension and match the weights")
        self.q = qs.pop()

    def __repr__(self):
        inner = ", ".join(f"{w:.3g}*{c!r}" for w, c in zip(self.weights, self.components))
        return f"Mixture({inner})"

    def log_density(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        with np.errstate(divide="ignore"):
            terms = np.stack([np.log(w) + c.log_density(x) for w, c in zip(self.weights, self.components)], axis=1)
        return logsumexp(terms, axis=1)

    def sample(self, n: int, rng) -> np.ndarray:
        return _sample_mixture(self.weights, self.components, n, rng, self.q)


def as_vm_mixture(model: DensityModel) -> VonMisesMixture | None:
    """View a model as a von Mises mixture when it is one, else None."""
    if isinstance(model, VonMisesMixture):
        return model
    if isinstance(model, VonMises):
        return VonMisesMixture([1.0], [model.mu], [model.kappa])
    if isinstance(model, Uniform):
        return VonMisesMixture([1.0], [model.mu], [0.0])
    return None


# ---------------------------------------------------------------------------
# scenarios


def _e(q: int, i: int) -> np.ndarray:
    v = np.zeros(q + 1)
    v[i] = 1.0
    return v


def _tail(q: int, v) -> np.ndarray:
    # (0_{q+1-len(v)}, v)
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(q + 1 - v.shape[0]), v])


def _head(q: int, v) -> np.ndarray:
    # (v, 0_{q+1-len(v)})
    v = np.asarray(v, dtype=float)
    return np.concatenate([v, np.zeros(q + 1 - v.shape[0])])


def sigma_matrices(q: int) -> tuple[np.ndarray, np.ndarray]:
    d = np.ones(q + 1)
    lead = np.array([0.5, 0.25, 0.125])[: q + 1]
    d[: lead.shape[0]] = lead
    return np.diag(d), np.diag(d[::-1])


def _vmm(q, weights, means, kappas, label):
    return VonMisesMixture(weights, np.array(means), kappas, label=label)


def _m9(q):
    idx = [1, 2, 3, 4, 6, 8, 9]
    if q == 1:
        means = [[0.0, 1.0]] + [rho1(i * math.pi / 20) for i in idx]
    else:
        means = [_pole(q)] + [_tail(q, rho2(0.0, (10 - i) * math.pi / 20)) for i in idx]
    kappas = [(5 / 3) ** 8] + [(5 / 3) ** (pos + 1) for pos in range(len(idx))]
    return _vmm(q, np.full(8, 1 / 8), means, kappas, "M9")


def _m11(q):
    if q == 1:
        means = [rho1(0.0)] + [rho1(i * math.pi / 6) for i in (-1, 1)]
        w = [2 / 10, 2 / 10, 2 / 10]
        kap = [20.0, 10.0, 10.0]
        for i in (-1, 1):
            means += [rho1(i * math.pi / 4), rho1(i * math.pi / 2)]
            w += [1 / 10, 1 / 10]
            kap += [5.0, 1.0]
    else:
        means = [_head(q, rho2(0.0, math.pi / 2))]
        means += [_head(q, rho2(i * math.pi / 6, (4 + i) * math.pi / 8)) for i in (-1, 1)]
        w = [2 / 10, 2 / 10, 2 / 10]
        kap = [20.0, 10.0, 10.0]
        for i in (-1, 1):
            means += [_head(q, rho2(i * math.pi / 4, i * math.pi / 3)), _head(q, rho2(i * math.pi / 2, i * math.pi / 3))]
            # 1/10 as in the circular branch; 2/10 would total 1.4
            w += [1 / 10, 1 / 10]
            kap += [5.0, 1.0]
    return _vmm(q, w, means, kap, "M11")


def _spiral_means(q, sign=1.0):
    out = []
    for i in range(10):
        if q == 1:
            out.append(rho1(sign * 3 * math.pi * i / 18))
        else:
            out.append(_head(q, rho2(3 * math.pi * i / 18, sign * 3 * math.pi * i / 36)))
    return out


def _m17(q):
    return _vmm(q, np.full(10, 0.1), _spiral_means(q), [1.5 ** (10 - i) for i in range(10)], "M17")


def _m19(q):
    means = _spiral_means(q) + _spiral_means(q, -1.0)
    kap = [1.5 ** (10 - i) for i in range(10)] + [10.0] * 10
    return _vmm(q, np.full(20, 1 / 20), means, kap, "M19")


def _m18(q):
    angles = [math.pi / 4, 3 * math.pi / 4, 2 * math.pi / 5, 3 * math.pi / 5]
    return _vmm(q, np.full(4, 0.25), [_tail(q, rho1(a)) for a in angles], [50.0] * 4, "M18")


def _m20(q):
    if q == 1:
        means = [[0.0, 1.0]] + [rho1(2 * i * math.pi / 3) for i in (1, 2, 3)]
        # each circular mean stands for the three colatitudes of the
        # spherical version, hence 3/11 (the weights then sum to one)
        w = [2 / 11] + [3 / 11] * 3
        kap = [20.0] + [15.0] * 3
    else:
        means = [_pole(q)]
        for i in (1, 2, 3):
            for j in (3, 5, 6):
                means.append(_head(q, rho2(2 * i * math.pi / 3, math.pi / j)))
        w = [2 / 11] + [1 / 11] * 9
        kap = [20.0] + [15.0] * 9
    return _vmm(q, w, means, kap, "M20")


def _scenario_builders():
    s = math.sqrt(2) / 2
    return {
        "M1": ("Uniform", lambda q: Uniform(q)),
        "M2": ("von Mises", lambda q: VonMisesMixture([1.0], [_pole(q)], [2.0])),
        "M3": ("Projected normal, rotationally symmetric",
               lambda q: ProjectedNormal(_pole(q), 0.5 * np.eye(q + 1))),
        "M4": ("Projected normal, not rotationally symmetric",
               lambda q: ProjectedNormal(_e(q, 0), 2.0 * sigma_matrices(q)[0])),
        "M5": ("Directional Cauchy", lambda q: DirectionalCauchy(_pole(q), 10.0)),
        "M6": ("Skew normal directional", lambda q: SkewNormalDirectional(_pole(q), 0.5, 0.5, 5.0)),
        "M7": ("Watson", lambda q: Watson(_e(q, 0), 2.0)),
        "M8": ("Two von Mises at 90 degrees",
               lambda q: VonMisesMixture([0.5, 0.5], [_pole(q), _e(q, 0)], [3.0, 3.0])),
        "M9": ("Skewed mixture of 8 von Mises", _m9),
        "M10": ("Two projected normals",
                lambda q: Mixture([0.5, 0.5], [ProjectedNormal(_e(q, 0), sigma_matrices(q)[0]),
                                               ProjectedNormal(_head(q, [s, s]), sigma_matrices(q)[1])])),
        "M11": ("Bandage, 5 von Mises", _m11),
        "M12": ("Projected normal and directional Cauchy",
                lambda q: Mixture([0.75, 0.25], [ProjectedNormal(_e(q, 0), sigma_matrices(q)[0]),
                                                 DirectionalCauchy(_head(q, [0.5, math.sqrt(3) / 2]), 50.0)])),
        "M13": ("Uniform and directional Cauchy",
                lambda q: Mixture([0.8, 0.2], [Uniform(q), DirectionalCauchy(_head(q, [0.5, math.sqrt(3) / 2]), 100.0)])),
        "M14": ("Trimodal, 3 von Mises",
                lambda q: VonMisesMixture(np.full(3, 1 / 3), [_pole(q), _tail(q, rho1(5 * math.pi / 4)),
                                                              _tail(q, rho1(7 * math.pi / 4))], [10.0] * 3)),
        "M15": ("Small circle", lambda q: SmallCircle(_pole(q), 10.0, 0.0)),
        "M16": ("Double small circle",
                lambda q: Mixture([0.5, 0.5], [SmallCircle(_pole(q), 10.0, 0.0), SmallCircle(_e(q, 0), 10.0, 0.0)])),
        "M17": ("Spiral, 10 von Mises", _m17),
        "M18": ("Claw, 4 von Mises", _m18),
        "M19": ("Double spiral, 20 von Mises", _m19),
        "M20": ("Windmill, 4 von Mises", _m20),
    }


SCENARIO_IDS = tuple(f"M{i}" for i in range(1, 21))


def scenario_description(model_id: str) -> str:
    return _scenario_builders()[_check_id(model_id)][0]


def _check_id(model_id: str) -> str:
    mid = str(model_id).upper()
    if mid not in SCENARIO_IDS:
        raise ModelError(f"unknown scenario {model_id!r}; expected M1..M20")
    return mid


@functools.lru_cache(maxsize=None)
def scenario(model_id: str, q: int) -> DensityModel:
    """Simulation scenario `model_id` (M1..M20) on the q-sphere.

    Models are cached, so repeated calls share normalizers and quantile tables.
    """
    if q < 1:
        raise ModelError("q must be >= 1")
    return _scenario_builders()[_check_id(model_id)][1](int(q))
