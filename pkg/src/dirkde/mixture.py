"""EM fitting of von Mises-Fisher mixtures and BIC-driven order search.

The restarts of one order are run as a single batched EM: every array carries
a leading restart axis, and each restart freezes once it converges. The
iterations performed by restart ``r`` are the same as for a lone run with the
same initial state.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .models import VonMisesMixture
from .seeding import derive_rng
from .special import KAPPA_CAP, bessel_ratio, log_cq, solve_concentration

log = logging.getLogger(__name__)

KAPPA_PRUNE = 250.0
MAX_ITER = 200
TOL = 1e-8
MAX_REINIT = 5
EMPTY_WEIGHT = 1e-8


@dataclass(frozen=True)
class FitResult:
    """One fitted mixture with its information criteria."""

    mixture: VonMisesMixture
    log_likelihood: float
    n_params: int
    n: int
    converged: bool
    iterations: int
    failed: bool = False
    trace: tuple = field(default=(), repr=False, compare=False)

    @property
    def M(self) -> int:
        return self.mixture.n_components

    @property
    def bic(self) -> float:
        return -2.0 * self.log_likelihood + self.n_params * math.log(self.n)

    @property
    def aic(self) -> float:
        return -2.0 * self.log_likelihood + 2.0 * self.n_params

    @property
    def aicc(self) -> float:
        k, n = self.n_params, self.n
        if n - k - 1 <= 0:
            return math.inf
        return self.aic + 2.0 * k * (k + 1) / (n - k - 1)

    def criterion(self, name: str) -> float:
        return {"bic": self.bic, "aic": self.aic, "aicc": self.aicc}[name]

    @property
    def max_kappa(self) -> float:
        return float(np.max(self.mixture.kappas))


def n_parameters(M: int, q: int) -> int:
    """Free parameters of an M-mixture on the q-sphere: ``M (q + 2) - 1``."""
    return M * (q + 2) - 1


def _posterior(joint: np.ndarray):
    # responsibilities and per-point log-likelihood from one exp pass;
    # components sit on axis 1 so the reductions run over contiguous rows
    m = joint.max(axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(joint - m)
    s = e.sum(axis=1, keepdims=True)
    e /= s
    return e, (np.log(s) + m)[:, 0, :]


def _m_step(x: np.ndarray, resp: np.ndarray, q: int):
    """Weights, means and concentrations from responsibilities ``(R, M, n)``."""
    nk = resp.sum(axis=2)  # (R, M)
    res = np.matmul(resp, x)
    norm = np.sqrt(np.einsum("rmd,rmd->rm", res, res))
    safe = np.maximum(norm, 1e-300)
    means = res / safe[..., None]
    # a zero resultant leaves the direction arbitrary; keep the pole
    zero = norm <= 1e-300
    if np.any(zero):
        means[zero] = 0.0
        means[zero, -1] = 1.0
    rbar = np.clip(norm / np.maximum(nk, 1e-300), 0.0, 1.0)
    kappas = _kappa_update(q, rbar)
    weights = nk / x.shape[0]
    return weights, means, kappas


def _kappa_update(q: int, rbar: np.ndarray) -> np.ndarray:
    """Concentration M-step: a few Newton steps from the closed approximation.

    Four steps reach machine precision from this seed; anything that
    misbehaves (tiny or near-unit resultants) goes through the safeguarded
    solver instead.
    """
    r = np.minimum(rbar, 1.0 - 1e-15)
    k = r * (q + 1 - r * r) / (1.0 - r * r)
    ok = (r > 1e-6) & (k < KAPPA_CAP)
    k = np.clip(k, 1e-300, KAPPA_CAP)
    with np.errstate(all="ignore"):
        for _ in range(4):
            a = bessel_ratio(q, k)
            k = np.clip(k - (a - r) / (1.0 - a * a - q * a / k), 1e-300, 10 * KAPPA_CAP)
    ok &= np.isfinite(k) & (k > 0)
    if not np.all(ok):
        k = np.where(ok, k, 0.0)
        bad = ~ok
        k[bad] = solve_concentration(q, rbar[bad], kappa_max=KAPPA_CAP)
    return np.minimum(k, KAPPA_CAP)


def _joint_log(x, weights, means, kappas, q):
    # (R, M, n) array of log p_j + log vM_j(x_i)
    with np.errstate(divide="ignore"):
        lw = np.log(weights)
    lc = log_cq(q, kappas.ravel()).reshape(kappas.shape)
    return (lw + lc)[:, :, None] + np.matmul(means * kappas[..., None], x.T)


def _init_state(x: np.ndarray, M: int, rng) -> np.ndarray:
    """k-means++ seeding on ``1 - x^T c``, then hard assignment."""
    n = x.shape[0]
    centers = [int(rng.integers(n))]
    dist = 1.0 - x @ x[centers[0]]
    for _ in range(1, M):
        d = np.clip(dist, 0.0, None)
        tot = d.sum()
        if tot <= 0:
            c = int(rng.integers(n))
        else:
            c = int(rng.choice(n, p=d / tot))
        centers.append(c)
        dist = np.minimum(dist, 1.0 - x @ x[c])
    labels = np.argmax(x @ x[centers].T, axis=1)
    resp = np.zeros((M, n))
    resp[labels, np.arange(n)] = 1.0
    return resp


def em_batch(x: np.ndarray, M: int, rngs: list, max_iter: int = MAX_ITER, tol: float = TOL) -> list[FitResult]:
    """Run EM from one initialization per generator in `rngs`.

    Returns one :class:`FitResult` per restart. A restart whose component
    weight drops below 1e-8 is re-seeded from its own generator, at most five
    times, after which it is flagged as failed.
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    q = d - 1
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= n, got M={M}, n={n}")
    R = len(rngs)
    resp0 = np.stack([_init_state(x, M, g) for g in rngs])
    w, mu, k = _m_step(x, resp0, q)

    active = np.ones(R, dtype=bool)
    failed = np.zeros(R, dtype=bool)
    converged = np.zeros(R, dtype=bool)
    reinit = np.zeros(R, dtype=int)
    iters = np.zeros(R, dtype=int)
    ll_prev = np.full(R, -np.inf)
    traces: list[list[float]] = [[] for _ in range(R)]

    for _ in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        joint = _joint_log(x, w[idx], mu[idx], k[idx], q)
        post, lse = _posterior(joint)
        ll = lse.sum(axis=1)
        for j, r in enumerate(idx):
            traces[r].append(float(ll[j]))
        change = np.abs(ll - ll_prev[idx]) <= tol * np.abs(ll)
        done = change | (iters[idx] >= max_iter)
        converged[idx[change]] = True
        ll_prev[idx] = ll
        active[idx[done]] = False
        go = ~done
        if not np.any(go):
            break
        gi = idx[go]
        resp = post[go]
        w_new, mu_new, k_new = _m_step(x, resp, q)
        empty = (w_new * n < EMPTY_WEIGHT).any(axis=1)
        w[gi], mu[gi], k[gi] = w_new, mu_new, k_new
        iters[gi] += 1
        for r in gi[empty]:
            reinit[r] += 1
            if reinit[r] > MAX_REINIT:
                failed[r] = True
                active[r] = False
                continue
            wr, mr, kr = _m_step(x, _init_state(x, M, rngs[r])[None], q)
            w[r], mu[r], k[r] = wr[0], mr[0], kr[0]
            ll_prev[r] = -np.inf
            traces[r].clear()
            iters[r] = 0

    out = []
    for r in range(R):
        mix = VonMisesMixture(w[r] / w[r].sum(), mu[r], k[r])
        out.append(FitResult(mix, float(ll_prev[r]), n_parameters(M, q), n, bool(converged[r]),
                             int(iters[r]), bool(failed[r]), tuple(traces[r])))
    return out


def em_fit(data, M: int, rng, max_iter: int = MAX_ITER, tol: float = TOL) -> FitResult:
    """Fit an M-component mixture by EM from a single initialization."""
    return em_batch(np.asarray(data, dtype=float), M, [rng], max_iter, tol)[0]


def best_of_restarts(data, M: int, R: int = 10, seed: int = 0, max_iter: int = MAX_ITER,
                     tol: float = TOL) -> FitResult:
    """Best log-likelihood over `R` EM restarts.

    Restart ``r`` draws from ``derive_rng(seed, M, r)``, so the restarts for a
    given `R` are a prefix of those for any larger `R`.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    # one component has a unique fixed point reached in one step
    R_eff = 1 if M == 1 else R
    fits = em_batch(np.asarray(data, dtype=float), M, [derive_rng(seed, M, r) for r in range(R_eff)], max_iter, tol)
    ok = [f for f in fits if not f.failed]
    if not ok:
        return fits[0]
    return max(ok, key=lambda f: f.log_likelihood)


@dataclass(frozen=True)
class OrderSearchTrace:
    criterion: str
    explored: dict
    chosen: int
    pruned: tuple
    fallback: bool = False


class FitCache:
    """Memo of :func:`best_of_restarts` results keyed by order."""

    def __init__(self, data, seed: int = 0, restarts: int = 10):
        self.data = np.asarray(data, dtype=float)
        self.seed = seed
        self.restarts = restarts
        self._fits: dict[int, FitResult] = {}

    def __call__(self, M: int) -> FitResult:
        if M not in self._fits:
            self._fits[M] = best_of_restarts(self.data, M, self.restarts, self.seed)
        return self._fits[M]


def select_mixture(data, m_neighbors: int = 3, seed: int = 0, criterion: str = "bic", restarts: int = 10,
                   cache: FitCache | None = None, max_components: int | None = None):
    """Order search for a von Mises mixture.

    Fits ``M = 1..M_B`` with ``M_B = floor(log n)``, discards fits with any
    concentration above 250, picks the best criterion value and, while
    ``M_B - M_N < M_hat``, extends ``M_B`` by one and repeats.

    Returns
    -------
    (FitResult, OrderSearchTrace)
    """
    x = np.asarray(data, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    if criterion not in ("bic", "aic", "aicc"):
        raise ValueError(f"unknown criterion {criterion!r}")
    cache = FitCache(x, seed, restarts) if cache is None else cache
    limit = n if max_components is None else min(n, max_components)
    m_b = max(1, min(int(math.floor(math.log(n))), limit))
    explored: dict[int, float] = {}
    pruned = []
    while True:
        for M in range(1, m_b + 1):
            if M in explored or M in pruned:
                continue
            fit = cache(M)
            if fit.failed or fit.max_kappa > KAPPA_PRUNE:
                pruned.append(M)
            else:
                explored[M] = fit.criterion(criterion)
        if not explored:
            log.warning("all candidate mixtures pruned; falling back to M = 1")
            return cache(1), OrderSearchTrace(criterion, {}, 1, tuple(pruned), True)
        m_hat = min(explored, key=lambda m: (explored[m], m))
        if m_b - m_neighbors < m_hat and m_b < limit:
            m_b += 1
            continue
        return cache(m_hat), OrderSearchTrace(criterion, dict(sorted(explored.items())), m_hat, tuple(pruned))
