"""Integration rules on the sphere: periodic Simpson (circle), Lebedev (sphere)
and Monte Carlo (higher dimensions)."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .special import sphere_area

DEFAULT_SIZE = {"simpson-circle": 2000, "lebedev": 5810, "monte-carlo": 10000}
LEBEDEV_ASSET = "lebedev_5810.txt"


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes on the q-sphere with nonnegative weights summing to its area."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    kind: str
    dim: int

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values) -> float:
        return integrate(self, values)


def uniform_sphere_sample(q: int, n: int, rng) -> np.ndarray:
    """Uniform draws on the q-sphere as normalized Gaussian vectors."""
    z = rng.standard_normal((n, q + 1))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _simpson_circle(size: int) -> QuadratureRule:
    if size % 2:
        raise QuadratureError("periodic Simpson needs an even node count")
    step = 2.0 * math.pi / size
    theta = step * np.arange(size)
    w = np.where(np.arange(size) % 2 == 0, 2.0 * step / 3.0, 4.0 * step / 3.0)
    nodes = np.column_stack([np.cos(theta), np.sin(theta)])
    return QuadratureRule(nodes, w, "simpson-circle", 1)


@functools.lru_cache(maxsize=None)
def load_lebedev(asset: str = LEBEDEV_ASSET) -> tuple[np.ndarray, np.ndarray]:
    """Read and validate the packaged Lebedev table (rows ``x y z w``)."""
    text = resources.files("dirkde.data").joinpath(asset).read_text()
    table = np.loadtxt(text.splitlines())
    if table.ndim != 2 or table.shape[1] != 4:
        raise QuadratureError("Lebedev asset must have four columns")
    if table.shape[0] != 5810:
        raise QuadratureError(f"Lebedev asset has {table.shape[0]} nodes, expected 5810")
    if abs(table[:, 3].sum() - 4.0 * math.pi) > 1e-6:
        raise QuadratureError("Lebedev weights do not sum to 4 pi")
    nodes = table[:, :3].copy()
    weights = table[:, 3].copy()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def build_rule(q: int, kind: str | None = None, size: int | None = None, seed: int | None = None) -> QuadratureRule:
    """Build the integration rule used for dimension `q`.

    Parameters
    ----------
    q : int
        Sphere dimension.
    kind : {"simpson-circle", "lebedev", "monte-carlo"}, optional
        Defaults to Simpson for ``q = 1``, Lebedev for ``q = 2`` and Monte
        Carlo otherwise.
    size : int, optional
        Node count; 2000, 5810 and 10000 by default.
    seed : int, optional
        Seed for Monte Carlo nodes (0 if omitted).
    """
    if kind is None:
        kind = {1: "simpson-circle", 2: "lebedev"}.get(q, "monte-carlo")
    if kind not in DEFAULT_SIZE:
        raise QuadratureError(f"unknown rule kind {kind!r}")
    size = DEFAULT_SIZE[kind] if size is None else int(size)
    if kind == "simpson-circle":
        if q != 1:
            raise QuadratureError("simpson-circle requires q = 1")
        return _simpson_circle(size)
    if kind == "lebedev":
        if q != 2:
            raise QuadratureError("lebedev requires q = 2")
        if size != 5810:
            raise QuadratureError("only the 5810-node Lebedev rule is packaged")
        nodes, weights = load_lebedev()
        return QuadratureRule(nodes, weights, "lebedev", 2)
    rng = np.random.default_rng(0 if seed is None else seed)
    nodes = uniform_sphere_sample(q, size, rng)
    weights = np.full(size, sphere_area(q) / size)
    return QuadratureRule(nodes, weights, "monte-carlo", q)


def integrate(rule: QuadratureRule, f) -> float:
    """Weighted sum of `f` over the rule nodes.

    `f` may be a callable acting on the ``(N, q+1)`` node array or an array
    of precomputed node values.
    """
    vals = f(rule.nodes) if callable(f) else f
    vals = np.asarray(vals, dtype=float)
    if vals.shape[0] != rule.size:
        raise QuadratureError("value count does not match the rule size")
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise QuadratureError(f"non-finite integrand at node {i}: {rule.nodes[i].tolist()}")
    return float(rule.weights @ vals)
