"""Unit vectors, tangent bases and angular parametrizations."""
from __future__ import annotations

import numpy as np


class DegenerateInputError(ValueError):
    """Vector too close to zero to define a direction."""


NORM_TOL = 1e-8
RENORM_TOL = 1e-4


def normalize(v) -> np.ndarray:
    """Project a vector (or the rows of a matrix) onto the unit sphere.

    Raises
    ------
    DegenerateInputError
        If any row has norm below 1e-12.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DegenerateInputError("non-finite coordinates")
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms <= 1e-12):
        raise DegenerateInputError("cannot normalize a (near) zero vector")
    return v / norms


def as_unit(v, tol: float = RENORM_TOL) -> np.ndarray:
    """Validate unit vectors, silently renormalizing small deviations.

    Rows whose norm is within `tol` of 1 are renormalized; anything further
    away raises ``ValueError``.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite coordinates")
    dev = np.abs(np.linalg.norm(v, axis=-1) - 1.0)
    if np.any(dev > tol):
        bad = int(np.argmax(dev)) if v.ndim > 1 else 0
        raise ValueError(f"row {bad} has norm deviating from 1 by {dev.max():.3g}")
    if np.any(dev > NORM_TOL):
        v = normalize(v)
    return v


def complete_basis(mu) -> np.ndarray:
    """Orthonormal completion of `mu`.

    Returns the ``(q+1, q)`` matrix ``B`` with ``B.T @ B = I_q`` and
    ``B @ B.T = I - mu mu^T``. Built from the Householder reflector that
    swaps the last canonical vector with `mu`, so the result is deterministic.
    """
    mu = as_unit(mu)
    d = mu.shape[0]
    e = np.zeros(d)
    e[-1] = 1.0
    sign = 1.0
    # reflect towards -mu when mu is near the south pole for stability
    if mu[-1] < 0:
        sign = -1.0
    target = sign * mu
    u = e - target
    nu = np.linalg.norm(u)
    if nu < 1e-14:
        H = np.eye(d)
    else:
        u = u / nu
        H = np.eye(d) - 2.0 * np.outer(u, u)
    # H maps e_{d} to target; its first d-1 columns span the complement
    return H[:, :-1].copy()


def tangent_normal(t, xi, mu, basis: np.ndarray | None = None) -> np.ndarray:
    """Map radial coordinates `t` and tangent directions `xi` to the sphere."""
    if basis is None:
        basis = complete_basis(mu)
    t = np.asarray(t, dtype=float)
    xi = np.asarray(xi, dtype=float)
    s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    return t[..., None] * np.asarray(mu)[None, :] + s[..., None] * (xi @ basis.T)


def rho1(theta) -> np.ndarray:
    """Polar parametrization ``(cos theta, sin theta)``."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def rho2(theta, phi) -> np.ndarray:
    """Spherical parametrization with colatitude `phi`.

    Angles are used as given: the formula is periodic, so wrapping is
    unnecessary, and negative colatitudes are meaningful reflections.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack(
        [np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi) + 0.0 * theta],
        axis=-1,
    )


def to_angles(x) -> np.ndarray:
    """Angles in ``[0, 2 pi)`` for points on the circle."""
    x = np.asarray(x, dtype=float)
    return np.mod(np.arctan2(x[..., 1], x[..., 0]), 2.0 * np.pi)


def random_rotation(d: int, rng) -> np.ndarray:
    """Haar-distributed orthogonal matrix with determinant +1."""
    a = rng.standard_normal((d, d))
    qm, r = np.linalg.qr(a)
    qm = qm * np.sign(np.diag(r))
    if np.linalg.det(qm) < 0:
        qm[:, 0] = -qm[:, 0]
    return qm
