"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (visible without ``-s``) and
then asserts. Criteria 5, 6 and 8 share one Monte Carlo run of 200 replicates
per cell, built on first use.
"""
import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from dirkde import mixture as mixture_mod
from dirkde.bench import (
    BenchConfig,
    exact_mise_minimum,
    ise,
    ranking,
    replicate_sample,
    run_cell,
    run_grid,
)
from dirkde.geometry import complete_basis
from dirkde.kde import KdeModel, kde_eval, kde_eval_loo
from dirkde.models import SCENARIO_IDS, VonMisesMixture, scenario
from dirkde.quadrature import build_rule
from dirkde.risk import curvature_vm, curvature_vm_q2, exact_mise, psi
from dirkde.selectors import cv2, rot_bandwidth, tay_bandwidth
from dirkde.special import sphere_area

pytestmark = pytest.mark.acceptance

REPS = 200
Z95 = 1.959963984540054


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        return ok
    return emit


# ---------------------------------------------------------------------------
# 1. exact-MISE minima

GOLDEN_MIN_MISE = [  # (model, q, n, MISE x 100)
    ("M2", 1, 500, 0.2298),
    ("M8", 1, 500, 0.2408),
    ("M14", 1, 500, 0.5106),
    ("M2", 1, 100, 0.7525),
    ("M2", 1, 250, 0.3760),
    ("M2", 1, 1000, 0.1386),
    ("M2", 2, 500, 0.3058),
    ("M18", 2, 500, 5.0555),
]


def test_criterion_1_exact_mise_golden(report):
    t0 = time.perf_counter()
    rows, ok = [], True
    for m, q, n, ref in GOLDEN_MIN_MISE:
        v = 100 * exact_mise_minimum(m, q, n).value
        good = abs(v - ref) <= 0.05 * ref
        ok &= good
        rows.append(f"{m}/q{q}/n{n} {v:.4f} vs {ref:.4f}{'' if good else ' (off)'}")
    report(1, ok, "; ".join(rows) + f" [{time.perf_counter() - t0:.1f}s]")
    assert ok


# ---------------------------------------------------------------------------
# 2. exact MISE against Monte Carlo


@pytest.mark.slow
def test_criterion_2_exact_mise_vs_monte_carlo(report):
    rows, ok = [], True
    for m, q, n, hs in [("M8", 1, 100, (0.2, 0.5)), ("M2", 2, 250, (0.3, 0.8))]:
        model, rule = scenario(m, q), build_rule(q)
        f = model.density(rule.nodes)
        samples = [replicate_sample(model, m, q, n, r, seed=2024) for r in range(500)]
        for h in hs:
            vals = np.array([ise(KdeModel(x, h), model, rule, f) for x in samples])
            se = vals.std(ddof=1) / math.sqrt(vals.size)
            ex = exact_mise(model, n, h, rule, f)
            z = (vals.mean() - ex) / se
            ok &= abs(z) < 3
            rows.append(f"{m}/q{q}/h{h} z={z:+.2f}")
    report(2, ok, "; ".join(rows))
    assert ok


# ---------------------------------------------------------------------------
# 3. curvature closed form


def _psi_sq_integral(q, kappa):
    mu = np.zeros(q + 1)
    mu[-1] = 1.0
    mix = VonMisesMixture([1.0], [mu], [kappa])
    if q < 3:
        rule = build_rule(q)
        return rule.integrate(psi(mix, rule.nodes) ** 2)
    # rotational symmetry reduces the integral to the polar angle
    def g(th):
        x = np.zeros((1, q + 1))
        x[0, -2], x[0, -1] = math.sin(th), math.cos(th)
        return psi(mix, x)[0] ** 2 * math.sin(th) ** (q - 1)
    return sphere_area(q - 1) * integrate.quad(g, 0, math.pi, epsabs=0, epsrel=1e-13, limit=200)[0]


def test_criterion_3_curvature(report):
    worst = 0.0
    for q in (1, 2, 3):
        for k in (0.5, 2.0, 10.0):
            worst = max(worst, abs(curvature_vm(q, k) / _psi_sq_integral(q, k) - 1))
    q2_gap = max(abs(curvature_vm(2, k) / curvature_vm_q2(k) - 1) for k in (0.5, 2.0, 10.0, 50.0))
    ok = worst < 1e-8 and q2_gap < 1e-10
    report(3, ok, f"max rel. error vs quadrature {worst:.2e}; q=2 specialization {q2_gap:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# 4. pairwise least squares CV against its definition


def test_criterion_4_cv2_identity(report):
    m = 2000
    th = 2 * np.pi * np.arange(m) / m
    grid = np.column_stack([np.cos(th), np.sin(th)])
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        x = scenario(SCENARIO_IDS[int(rng.integers(1, 20))], 1).sample(20, rng)
        h = float(rng.uniform(0.1, 1.0))
        est = KdeModel(x, h)
        # periodic Simpson on the uniform grid is the trapezoid rule
        int_sq = np.sum(kde_eval(est, grid) ** 2) * 2 * np.pi / m
        ref = 2 * np.mean([kde_eval_loo(est, i) for i in range(20)]) - int_sq
        worst = max(worst, abs(cv2(x, h) / ref - 1))
    ok = worst < 1e-6
    report(4, ok, f"max rel. difference over 20 samples {worst:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# shared Monte Carlo runs

C5_CELLS = [  # (model, q, selectors)
    ("M2", 1, ("emi", "lscv")),
    ("M7", 1, ("tay",)),
    ("M15", 1, ("rot",)),
    ("M2", 2, ("emi",)),
    ("M9", 2, ("lcv", "lscv")),
]
C6_MODELS = ("M2", "M7", "M8", "M13", "M14", "M15")
C6_SELECTORS = ("rot", "tay", "ami", "emi", "lscv", "lcv", "oli")
N = 500
SEED = 0


class SharedRuns:
    def __init__(self):
        self.cells = {}
        self.calls = []  # (model, q, selectors) for the prefix re-run
        self.c5_time = None

    def run(self, model, q, selectors):
        todo = tuple(s for s in selectors if (q, model, s) not in self.cells)
        if todo:
            res, _ = run_cell(model, q, N, todo, REPS, seed=SEED)
            for s, c in res.items():
                self.cells[(q, model, s)] = c
            self.calls.append((model, q, todo))

    def c5(self):
        if self.c5_time is None:
            t0 = time.perf_counter()
            for m, q, sels in C5_CELLS:
                self.run(m, q, sels)
            self.c5_time = time.perf_counter() - t0
        return self

    def c6(self):
        self.c5()
        for m in C6_MODELS:
            self.run(m, 1, C6_SELECTORS)
        return self


@pytest.fixture(scope="module")
def shared():
    return SharedRuns()


# ---------------------------------------------------------------------------
# 5. selector MISE at reduced replicates

C5_TARGETS = [  # (model, q, selector, MISE x 100, sd x 100 over 1000 replicates)
    ("M2", 1, "emi", 0.234, 0.15),
    ("M7", 1, "tay", 6.677, 0.07),
    ("M15", 1, "rot", 39.961, 3.66),
    ("M2", 1, "lscv", 0.297, 0.21),
    ("M2", 2, "emi", 0.310, 0.12),
]


def _agrees(mean, sd, n, ref, ref_sd, ref_n=1000):
    if abs(mean - ref) <= 0.15 * ref:
        return True
    lo, hi = mean - Z95 * sd / math.sqrt(n), mean + Z95 * sd / math.sqrt(n)
    rlo, rhi = ref - Z95 * ref_sd / math.sqrt(ref_n), ref + Z95 * ref_sd / math.sqrt(ref_n)
    return lo <= rhi and rlo <= hi


@pytest.mark.slow
def test_criterion_5_selector_mise(report, shared):
    runs = shared.c5()
    rows, ok = [], True
    for m, q, s, ref, ref_sd in C5_TARGETS:
        c = runs.cells[(q, m, s)]
        mean, sd = 100 * c.mean, 100 * c.sd
        good = _agrees(mean, sd, int(c.ok.sum()), ref, ref_sd) and c.failures == 0
        ok &= good
        rows.append(f"{m}/q{q}/{s} {mean:.3f} vs {ref:.3f}{'' if good else ' (off)'}")
    lcv, lscv = runs.cells[(2, "M9", "lcv")].mean, runs.cells[(2, "M9", "lscv")].mean
    order = lcv > lscv
    ok &= order
    rows.append(f"M9/q2 lcv {100 * lcv:.3f} > lscv {100 * lscv:.3f}: {order}")
    fast = runs.c5_time <= 30 * 60
    ok &= fast
    rows.append(f"runtime {runs.c5_time / 60:.1f} min")
    report(5, ok, "; ".join(rows))
    assert ok


# ---------------------------------------------------------------------------
# 6. rankings on the multimodal subset


@pytest.mark.slow
def test_criterion_6_rankings(report, shared):
    runs = shared.c6()
    table = {m: {s: runs.cells[(1, m, s)].mean for s in C6_SELECTORS} for m in C6_MODELS}
    score = ranking(table, C6_SELECTORS)
    best = max(score, key=score.get)
    mixture_based = min(score[s] for s in ("ami", "emi", "oli"))
    ok = best == "emi" and max(score["tay"], score["rot"]) < mixture_based
    ok &= all(c.failure_rate <= 0.01 for k, c in runs.cells.items())
    txt = ", ".join(f"{s}={v:.2f}" for s, v in sorted(score.items(), key=lambda kv: -kv[1]))
    report(6, ok, f"scores {txt}")
    assert ok


# ---------------------------------------------------------------------------
# 7. extra term in the circular rule of thumb


def test_criterion_7_extra_term(report):
    n = 250
    close = max(abs(tay_bandwidth(k, n) / rot_bandwidth(1, k, n) - 1) for k in np.geomspace(10, 100, 25))
    r2 = tay_bandwidth(1e-2, n) / rot_bandwidth(1, 1e-2, n)
    r3 = tay_bandwidth(1e-3, n) / rot_bandwidth(1, 1e-3, n)
    ok = close < 0.02 and r2 > 5 and r3 > 5 and r3 > r2
    report(7, ok, f"max rel. gap on [10, 100] {close:.4f}; ratio at 1e-2 {r2:.2f}, at 1e-3 {r3:.2f}")
    assert ok


# ---------------------------------------------------------------------------
# 8. property suites


def _expected_cells_q1(model, edges, m=20000):
    th = 2 * np.pi * (np.arange(m) + 0.5) / m
    dens = model.density(np.column_stack([np.cos(th), np.sin(th)])) * 2 * np.pi / m
    return np.histogram(th, edges, weights=dens)[0]


def _expected_cells_q2(model, t_edges, phi_edges, mt=1000, mp=720):
    # area element on the sphere is dt dphi about the pole
    t = -1 + 2 * (np.arange(mt) + 0.5) / mt
    ph = 2 * np.pi * (np.arange(mp) + 0.5) / mp
    T, P = np.meshgrid(t, ph, indexing="ij")
    s = np.sqrt(1 - T**2)
    x = np.column_stack([(s * np.cos(P)).ravel(), (s * np.sin(P)).ravel(), T.ravel()])
    w = model.density(x) * (2 / mt) * (2 * np.pi / mp)
    return np.histogram2d(T.ravel(), P.ravel(), [t_edges, phi_edges], weights=w)[0]


def _gof_pvalue(model, q, n=5000, seed=0):
    x = model.sample(n, np.random.default_rng(seed))
    if q == 1:
        edges = np.linspace(0, 2 * np.pi, 41)
        probs = _expected_cells_q1(model, edges)
        obs = np.histogram(np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi), edges)[0]
    else:
        t_edges, phi_edges = np.linspace(-1, 1, 11), np.linspace(0, 2 * np.pi, 5)
        probs = _expected_cells_q2(model, t_edges, phi_edges).ravel()
        obs = np.histogram2d(x[:, 2], np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi),
                             [t_edges, phi_edges])[0].ravel()
    probs = probs / probs.sum()
    # pool sparse cells into one
    keep = probs * n >= 5
    e = np.append(probs[keep] * n, probs[~keep].sum() * n)
    o = np.append(obs[keep], obs[~keep].sum())
    if e[-1] < 5:
        e, o = e[:-1], o[:-1]
        o = o * (e.sum() / max(o.sum(), 1))
    stat = ((o - e) ** 2 / e).sum()
    return stats.chi2.sf(stat, len(e) - 1)


@pytest.mark.slow
def test_criterion_8_properties(report, shared, monkeypatch):
    rows, ok = [], True

    norm = max(abs(build_rule(q).integrate(scenario(m, q).density(build_rule(q).nodes)) - 1)
               for q in (1, 2) for m in SCENARIO_IDS)
    ok &= norm < 1e-4
    rows.append(f"normalization max error {norm:.1e}")

    pvals = {(m, q): _gof_pvalue(scenario(m, q), q) for q in (1, 2) for m in SCENARIO_IDS}
    worst = min(pvals, key=pvals.get)
    ok &= pvals[worst] > 0.001
    rows.append(f"sampler GOF min p {pvals[worst]:.3g} ({worst[0]}, q={worst[1]})")

    # every EM run of the order searches, restarts included, is recorded
    fits = []
    orig = mixture_mod.em_batch

    def recording(*a, **k):
        out = orig(*a, **k)
        fits.extend(out)
        return out

    monkeypatch.setattr(mixture_mod, "em_batch", recording)
    hits = 0
    for s in range(100):
        x = scenario("M8", 1).sample(1000, np.random.default_rng(10_000 + s))
        fit, _ = mixture_mod.select_mixture(x, seed=s)
        hits += fit.M == 2
    monkeypatch.undo()
    mono = all(np.all(np.diff(f.trace) >= -1e-9 * np.abs(np.asarray(f.trace[1:]))) for f in fits)
    ok &= mono and hits >= 80
    rows.append(f"EM monotone on {len(fits)} runs: {mono}; M8 order 2 in {hits}/100")

    # a fresh run of the leading replicates of every shared cell is bit-identical
    runs = shared.c6()
    same = True
    for m, q, sels in runs.calls:
        again, _ = run_cell(m, q, N, sels, 5, seed=SEED)
        for s in sels:
            c = runs.cells[(q, m, s)]
            same &= again[s].ise.tobytes() == c.ise[:5].tobytes() and again[s].h.tobytes() == c.h[:5].tobytes()
    cfg = BenchConfig(dims=(1, 2), sizes=(100,), models=("M2", "M9"), replicates=4, seed=5)
    same &= run_grid(cfg).digest() == run_grid(cfg).digest()
    ok &= same
    rows.append(f"re-run bit-identical: {same}")

    report(8, ok, "; ".join(rows))
    assert ok
