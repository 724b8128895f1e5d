"""Monte Carlo benchmark of the bandwidth selectors.

Every replicate ``r`` of a cell ``(model, q, n)`` draws its sample from the
stream ``derive_rng(seed, "sample", model, q, n, r)``, so all selectors see
the same samples and the whole run is a deterministic function of the
config. The ISE uses one quadrature rule per dimension, built once from the
quadrature seed.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import as_unit, rho1, rho2
from .kde import KdeModel, log_kde_eval
from .models import SCENARIO_IDS, DensityModel, as_vm_mixture, scenario
from .quadrature import QuadratureRule, build_rule
from .risk import RiskMinimum, exact_mise, minimize_risk
from .seeding import derive_rng
from .selectors import CIRCULAR_ONLY, SELECTORS, SelectionContext, select

log = logging.getLogger(__name__)

FAILURE_LIMIT = 0.01


class BenchError(RuntimeError):
    pass


@dataclass(frozen=True)
class BenchConfig:
    """What to simulate.

    ``replicates`` defaults to the desk-scale 200; ``full=True`` switches to
    1000 replicates.
    """

    dims: tuple = (1,)
    sizes: tuple = (500,)
    models: tuple = ("M2",)
    selectors: tuple = SELECTORS
    replicates: int = 200
    seed: int = 0
    quad_seed: int = 0
    restarts: int = 10
    h_mise: bool = False
    full: bool = False
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        for name in ("dims", "sizes", "models", "selectors"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.full:
            object.__setattr__(self, "replicates", 1000)
        if self.replicates < 1:
            raise BenchError("replicates must be >= 1")
        bad = [m for m in self.models if m not in SCENARIO_IDS]
        if bad:
            raise BenchError(f"unknown models: {bad}")
        bad = [s for s in self.selectors if s not in SELECTORS]
        if bad:
            raise BenchError(f"unknown selectors: {bad}")
        if any(q < 1 for q in self.dims) or any(n < 2 for n in self.sizes):
            raise BenchError("need q >= 1 and n >= 2")

    def selectors_for(self, q: int) -> tuple:
        return tuple(s for s in self.selectors if q == 1 or s not in CIRCULAR_ONLY)


@dataclass
class CellResult:
    """ISE values of one selector over the replicates of one cell."""

    ise: np.ndarray
    h: np.ndarray
    failures: int = 0
    errors: list = field(default_factory=list)

    @property
    def ok(self) -> np.ndarray:
        return np.isfinite(self.ise)

    @property
    def mean(self) -> float:
        v = self.ise[self.ok]
        return float(np.mean(v)) if v.size else math.nan

    @property
    def sd(self) -> float:
        v = self.ise[self.ok]
        return float(np.std(v, ddof=1)) if v.size > 1 else math.nan

    @property
    def se(self) -> float:
        return self.sd / math.sqrt(max(int(self.ok.sum()), 1))

    @property
    def failure_rate(self) -> float:
        return self.failures / self.ise.size


@dataclass
class BenchResult:
    config: BenchConfig
    cells: dict = field(default_factory=dict)  # (q, n, model, selector) -> CellResult
    sample_hashes: dict = field(default_factory=dict)  # (q, n, model) -> list of hex digests
    h_mise: dict = field(default_factory=dict)  # (q, n, model) -> RiskMinimum
    exact_min: dict = field(default_factory=dict)  # (q, n, model) -> RiskMinimum
    wall_time: float = 0.0

    def cell(self, model: str, selector: str, q: int = 1, n: int = 500) -> CellResult:
        return self.cells[(q, n, model, selector)]

    @property
    def failed_cells(self) -> list:
        return [k for k, c in self.cells.items() if c.failure_rate > FAILURE_LIMIT]

    @property
    def ok(self) -> bool:
        return not self.failed_cells

    def ranking(self, q: int, n: int, models=None, selectors=None) -> dict:
        models = self.config.models if models is None else models
        selectors = self.config.selectors_for(q) if selectors is None else selectors
        table = {m: {s: self.cells[(q, n, m, s)].mean for s in selectors} for m in models}
        return ranking(table, selectors)

    def ranking_ties(self, q: int, n: int) -> dict:
        sels = self.config.selectors_for(q)
        return ranking_ties({m: {s: self.cells[(q, n, m, s)].mean for s in sels} for m in self.config.models}, sels)

    def digest(self) -> str:
        """Hash of every ISE and bandwidth, for bit-identity checks."""
        h = hashlib.sha256()
        for key in sorted(self.cells):
            c = self.cells[key]
            h.update(repr(key).encode())
            h.update(np.ascontiguousarray(c.ise).tobytes())
            h.update(np.ascontiguousarray(c.h).tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# building blocks


def ise(estimate: KdeModel, truth, rule: QuadratureRule, truth_values: np.ndarray | None = None) -> float:
    """Integrated squared error of `estimate` against `truth` on `rule`."""
    f = truth.density(rule.nodes) if truth_values is None else truth_values
    fh = np.exp(log_kde_eval(estimate, rule.nodes))
    return float(rule.weights @ (fh - f) ** 2)


def sample_hash(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype=float).tobytes()).hexdigest()[:16]


def replicate_sample(model: DensityModel, model_id: str, q: int, n: int, r: int, seed: int) -> np.ndarray:
    return model.sample(n, derive_rng(seed, "sample", model_id, q, n, r))


def _fit_seed(seed: int, model_id: str, q: int, n: int, r: int) -> int:
    return int(derive_rng(seed, "fit", model_id, q, n, r).integers(2**31))


class _Truth:
    """Scenario model and its density on the rule, built once per process."""

    _cache: dict = {}

    @classmethod
    def get(cls, model_id: str, q: int, quad_seed: int):
        key = (model_id, q, quad_seed)
        if key not in cls._cache:
            model = scenario(model_id, q)
            rule = build_rule(q, seed=quad_seed)
            cls._cache[key] = (model, rule, model.density(rule.nodes))
        return cls._cache[key]


def run_replicate(model_id: str, q: int, n: int, r: int, selectors, seed: int = 0, quad_seed: int = 0,
                  restarts: int = 10) -> dict:
    """All selectors on replicate `r`; returns ``{"hash", "h", "ise", "errors"}``."""
    model, rule, f = _Truth.get(model_id, q, quad_seed)
    x = replicate_sample(model, model_id, q, n, r, seed)
    ctx = SelectionContext(x, seed=_fit_seed(seed, model_id, q, n, r), restarts=restarts, rule=rule)
    out = {"hash": sample_hash(x), "h": {}, "ise": {}, "errors": {}}
    for s in selectors:
        try:
            rep = select(x, s, ctx=ctx)
            out["h"][s] = rep.h
            out["ise"][s] = ise(KdeModel(x, rep.h), model, rule, f)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.warning("%s failed on %s q=%d n=%d r=%d: %s", s, model_id, q, n, r, exc)
            out["h"][s] = math.nan
            out["ise"][s] = math.nan
            out["errors"][s] = f"{type(exc).__name__}: {exc}"
    return out


def _replicate_job(args):
    return run_replicate(*args)


def run_cell(model_id: str, q: int, n: int, selectors, replicates: int, seed: int = 0, quad_seed: int = 0,
             restarts: int = 10, workers: int = 1):
    """Replicates of one ``(model, q, n)`` cell.

    Returns
    -------
    (dict selector -> CellResult, list of sample hashes)
    """
    selectors = tuple(selectors)
    jobs = [(model_id, q, n, r, selectors, seed, quad_seed, restarts) for r in range(replicates)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            reps = list(ex.map(_replicate_job, jobs, chunksize=max(1, replicates // (4 * workers))))
    else:
        reps = [_replicate_job(j) for j in jobs]
    cells = {}
    for s in selectors:
        ise_v = np.array([rp["ise"][s] for rp in reps])
        h_v = np.array([rp["h"][s] for rp in reps])
        errs = [(r, rp["errors"][s]) for r, rp in enumerate(reps) if s in rp["errors"]]
        cells[s] = CellResult(ise_v, h_v, len(errs), errs)
    return cells, [rp["hash"] for rp in reps]


def empirical_h_mise(model_id: str, q: int, n: int, replicates: int, seed: int = 0,
                     quad_seed: int = 0) -> RiskMinimum:
    """Minimizer of the replicate-mean ISE over the shared replicate samples."""
    model, rule, f = _Truth.get(model_id, q, quad_seed)
    samples = [replicate_sample(model, model_id, q, n, r, seed) for r in range(replicates)]

    def mean_ise(h):
        return float(np.mean([ise(KdeModel(x, h), model, rule, f) for x in samples]))

    return minimize_risk(mean_ise)


def exact_mise_minimum(model_id: str, q: int, n: int, quad_seed: int = 0) -> RiskMinimum | None:
    """Minimum of the exact MISE when the scenario is a von Mises mixture."""
    model, rule, f = _Truth.get(model_id, q, quad_seed)
    mix = as_vm_mixture(model)
    if mix is None:
        return None
    return minimize_risk(lambda h: exact_mise(mix, n, h, rule, f))


def ranking(table: dict, selectors) -> dict:
    """Rank-and-ratio score per selector.

    For each model the selectors are sorted by MISE; the best gets rank
    ``m``, the worst rank 1, and each scores ``(rank/m) * best/MISE``. Scores
    are summed over models. Ties keep the order of `selectors`.
    """
    selectors = tuple(selectors)
    m = len(selectors)
    score = {s: 0.0 for s in selectors}
    for row in table.values():
        vals = [row[s] for s in selectors]
        order = sorted(range(m), key=lambda i: (vals[i] if np.isfinite(vals[i]) else math.inf, i))
        best = vals[order[0]]
        for pos, i in enumerate(order):
            if not np.isfinite(vals[i]):
                continue
            score[selectors[i]] += (m - pos) / m * best / vals[i]
    return score


def ranking_ties(table: dict, selectors) -> dict:
    """Models whose ranking involved equal MISE values, with the tied selectors."""
    out = {}
    for model, row in table.items():
        vals = {}
        for s in selectors:
            vals.setdefault(row[s], []).append(s)
        tied = [g for v, g in vals.items() if len(g) > 1 and np.isfinite(v)]
        if tied:
            out[model] = tied
    return out


def run_grid(config: BenchConfig) -> BenchResult:
    """Run every cell of `config`; writes outputs when ``out_dir`` is set."""
    t0 = time.perf_counter()
    res = BenchResult(config)
    for q in config.dims:
        sels = config.selectors_for(q)
        for n in config.sizes:
            for m in config.models:
                tc = time.perf_counter()
                cells, hashes = run_cell(m, q, n, sels, config.replicates, config.seed, config.quad_seed,
                                         config.restarts, config.workers)
                for s, c in cells.items():
                    res.cells[(q, n, m, s)] = c
                res.sample_hashes[(q, n, m)] = hashes
                ex = exact_mise_minimum(m, q, n, config.quad_seed)
                if ex is not None:
                    res.exact_min[(q, n, m)] = ex
                if config.h_mise:
                    res.h_mise[(q, n, m)] = empirical_h_mise(m, q, n, config.replicates, config.seed,
                                                             config.quad_seed)
                log.info("cell %s q=%d n=%d done in %.1fs", m, q, n, time.perf_counter() - tc)
    res.wall_time = time.perf_counter() - t0
    if config.out_dir is not None:
        write_outputs(res, config.out_dir)
    return res


# ---------------------------------------------------------------------------
# reporting


def _fmt(v: float) -> str:
    return repr(float(v))


def write_outputs(res: BenchResult, out_dir) -> list[Path]:
    """One CSV per ``(q, n)`` with MISE x 100 and sd x 100, plus a JSON summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = res.config
    paths = []
    summary = {"config": asdict(cfg), "ok": res.ok, "failed_cells": [list(k) for k in res.failed_cells],
               "rankings": {}, "ranking_ties": {}, "digest": res.digest()}
    for q in cfg.dims:
        sels = cfg.selectors_for(q)
        for n in cfg.sizes:
            p = out / f"mise_q{q}_n{n}.csv"
            with p.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                head = ["model", "exact_min_x100", "h_mise_x100"]
                for s in sels:
                    head += [f"{s}_x100", f"{s}_sd_x100", f"{s}_failures"]
                w.writerow(head)
                for m in cfg.models:
                    ex = res.exact_min.get((q, n, m))
                    hm = res.h_mise.get((q, n, m))
                    row = [m, _fmt(100 * ex.value) if ex else "", _fmt(100 * hm.value) if hm else ""]
                    for s in sels:
                        c = res.cells[(q, n, m, s)]
                        row += [_fmt(100 * c.mean), _fmt(100 * c.sd), c.failures]
                    w.writerow(row)
            paths.append(p)
            summary["rankings"][f"q{q}_n{n}"] = res.ranking(q, n)
            summary["ranking_ties"][f"q{q}_n{n}"] = res.ranking_ties(q, n)
    p = out / "summary.json"
    p.write_text(json.dumps(summary, indent=2), encoding="utf-8")
    paths.append(p)
    return paths


def format_table(res: BenchResult, q: int, n: int) -> str:
    """Human-readable MISE x 100 table with sd in parentheses."""
    sels = res.config.selectors_for(q)
    lines = ["model  " + "  ".join(f"{s:>15}" for s in sels)]
    for m in res.config.models:
        cells = [res.cells[(q, n, m, s)] for s in sels]
        lines.append(f"{m:<6} " + "  ".join(f"{100 * c.mean:7.4f} ({100 * c.sd:5.3f})" for c in cells))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# input


def ingest_csv(path, fmt: str = "unit-vectors") -> np.ndarray:
    """Read directional data from a CSV file.

    Parameters
    ----------
    path : path-like
        File with one observation per row; blank lines and ``#`` comments
        are skipped, as is a non-numeric header row.
    fmt : {"unit-vectors", "angles-1d", "angles-2d"}
        Row layout: Cartesian coordinates, one angle, or ``theta, phi``.

    Returns
    -------
    ndarray of shape (n, q+1)
    """
    if fmt not in ("unit-vectors", "angles-1d", "angles-2d"):
        raise ValueError(f"unknown format {fmt!r}")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(v) for v in row if v.strip() != ""]
            except ValueError:
                if not rows and lineno == 1:
                    continue  # header
                raise ValueError(f"{path}: row {lineno}: cannot parse {row!r}") from None
            rows.append((lineno, vals))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    out = []
    for lineno, vals in rows:
        try:
            if fmt == "unit-vectors":
                out.append(as_unit(np.array(vals)))
            elif fmt == "angles-1d":
                if len(vals) != 1:
                    raise ValueError("expected one angle")
                out.append(rho1(vals[0]))
            else:
                if len(vals) != 2:
                    raise ValueError("expected two angles")
                out.append(rho2(vals[0], vals[1]))
        except ValueError as exc:
            raise ValueError(f"{path}: row {lineno}: {exc}") from None
    dims = {len(v) for v in out}
    if len(dims) != 1:
        raise ValueError(f"{path}: rows have differing dimensions {sorted(dims)}")
    return np.array(out)


def write_points(path, x: np.ndarray, values: np.ndarray | None = None, header=None) -> None:
    """Write points (and an optional value column) with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for i, row in enumerate(np.atleast_2d(x)):
            vals = [f"{v:.17g}" for v in row]
            if values is not None:
                vals.append(f"{values[i]:.17g}")
            w.writerow(vals)
