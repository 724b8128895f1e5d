"""Von Mises kernel density estimator on the q-sphere.

``f_h(x) = c_{h,q} / n * sum_i exp(-(1 - x^T X_i) / h^2)``, which is the
equal-weight mixture of ``vM(X_i, 1/h^2)`` densities. All evaluation is done
with log-sum-exp.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .special import log_cq

log = logging.getLogger(__name__)

H_MIN, H_MAX = 1e-3, 1e3
BLOCK = 2048


class KdeError(ValueError):
    pass


def clamp_bandwidth(h: float) -> float:
    """Clamp `h` to the supported range ``[1e-3, 1e3]`` with a log message."""
    if not (np.isfinite(h) and h > 0):
        raise KdeError(f"bandwidth must be positive and finite, got {h}")
    if h < H_MIN or h > H_MAX:
        clamped = min(max(h, H_MIN), H_MAX)
        log.info("bandwidth %.3g outside [%g, %g]; clamped to %.3g", h, H_MIN, H_MAX, clamped)
        return clamped
    return float(h)


def log_normalizing_constant(q: int, h: float) -> float:
    """``log c_{h,q} = log C_q(1/h^2) + 1/h^2`` for the von Mises kernel."""
    if not h > 0:
        raise KdeError(f"bandwidth must be positive, got {h}")
    k = 1.0 / (h * h)
    return float(log_cq(q, k)) + k


@dataclass(frozen=True)
class KdeModel:
    """Kernel density estimate with data ``(n, q+1)`` and bandwidth `h`."""

    data: np.ndarray = field(repr=False)
    h: float
    kernel: str = "von-mises"

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.data, dtype=float))
        if x.shape[0] < 1 or x.shape[1] < 2:
            raise KdeError("need at least one point of dimension >= 2")
        if self.kernel != "von-mises":
            raise KdeError(f"unsupported kernel {self.kernel!r}")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "data", x)
        object.__setattr__(self, "h", clamp_bandwidth(self.h))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def q(self) -> int:
        return self.data.shape[1] - 1

    @property
    def log_const(self) -> float:
        return log_normalizing_constant(self.q, self.h)

    def log_density(self, x) -> np.ndarray:
        return log_kde_eval(self, x)

    def density(self, x) -> np.ndarray:
        return np.exp(log_kde_eval(self, x))


def log_kde_eval(model: KdeModel, x) -> np.ndarray | float:
    """Log of the estimate at one point ``(q+1,)`` or many ``(m, q+1)``."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.data.shape[1]:
        raise KdeError(f"point dimension {x.shape[1]} does not match data dimension {model.data.shape[1]}")
    k = 1.0 / (model.h * model.h)
    # exponent of each kernel relative to its peak: k (x^T X_i - 1)
    base = log_cq(model.q, k) - math.log(model.n)
    out = np.empty(x.shape[0])
    for s in range(0, x.shape[0], BLOCK):
        t = x[s:s + BLOCK] @ model.data.T
        # kernels peak at t = 1, so exp(k (t - 1)) <= 1; only rows whose sum
        # underflows need the full log-sum-exp
        rows = np.exp(k * (t - 1.0)).sum(axis=1)
        small = rows < 1e-250
        with np.errstate(divide="ignore"):
            blk = np.log(rows) + k
        if np.any(small):
            blk[small] = sc.logsumexp(k * t[small], axis=1)
        out[s:s + BLOCK] = blk
    out += base
    return float(out[0]) if scalar else out


def kde_eval(model: KdeModel, x) -> np.ndarray | float:
    """Estimated density at `x`; strictly positive."""
    return np.exp(log_kde_eval(model, x))


def log_kde_loo(model: KdeModel) -> np.ndarray:
    """All leave-one-out log values ``log f_h^{-i}(X_i)``, ``i = 1..n``."""
    n = model.n
    if n < 2:
        raise KdeError("leave-one-out needs n >= 2")
    k = 1.0 / (model.h * model.h)
    t = model.data @ model.data.T
    e = k * t
    np.fill_diagonal(e, -np.inf)
    return sc.logsumexp(e, axis=1) + log_cq(model.q, k) - math.log(n - 1)


def kde_eval_loo(model: KdeModel, i: int) -> float:
    """Estimate built without observation `i`, evaluated at ``X_i``."""
    n = model.n
    if n < 2:
        raise KdeError("leave-one-out needs n >= 2")
    if not -n <= i < n:
        raise IndexError(i)
    k = 1.0 / (model.h * model.h)
    others = np.delete(model.data, i, axis=0)
    lv = sc.logsumexp(k * (others @ model.data[i])) + log_cq(model.q, k) - math.log(n - 1)
    return float(np.exp(lv))
