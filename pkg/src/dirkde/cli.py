"""Command line interface: ``dirkde <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import bench
from .kde import KdeModel, kde_eval
from .mixture import OrderSearchTrace, best_of_restarts, select_mixture
from .models import SCENARIO_IDS, as_vm_mixture, scenario, scenario_description
from .quadrature import build_rule
from .risk import mise_curve
from .seeding import derive_rng
from .selectors import SELECTORS, select


def _csv_list(s: str) -> list[str]:
    return [v.strip() for v in s.split(",") if v.strip()]


def _int_list(s: str) -> list[int]:
    return [int(v) for v in _csv_list(s)]


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def cmd_bench(a) -> int:
    cfg = bench.BenchConfig(dims=tuple(a.dim), sizes=tuple(a.n), models=tuple(a.models),
                            selectors=tuple(a.selectors), replicates=a.replicates, seed=a.seed,
                            quad_seed=a.quad_seed, restarts=a.restarts, h_mise=a.h_mise, full=a.full,
                            workers=a.workers, out_dir=a.out)
    res = bench.run_grid(cfg)
    for q in cfg.dims:
        for n in cfg.sizes:
            print(f"q={q} n={n}  MISE x 100 (sd)")
            print(bench.format_table(res, q, n))
            score = res.ranking(q, n)
            print("ranking: " + ", ".join(f"{s}={v:.2f}" for s, v in sorted(score.items(), key=lambda kv: -kv[1])))
            for m, groups in res.ranking_ties(q, n).items():
                print(f"tie in {m}: " + "; ".join("=".join(g) for g in groups) + " (broken by selector order)")
    if not res.ok:
        print(f"cells with more than 1% failed replicates: {res.failed_cells}", file=sys.stderr)
        return 1
    return 0


def cmd_simulate(a) -> int:
    model = scenario(a.model, a.dim)
    x = model.sample(a.n, derive_rng(a.seed, "simulate", a.model, a.dim, a.n))
    if a.out:
        bench.write_points(a.out, x)
    else:
        for row in x:
            print(",".join(f"{v:.17g}" for v in row))
    return 0


def cmd_mise_curve(a) -> int:
    mix = as_vm_mixture(scenario(a.model, a.dim))
    if mix is None:
        print(f"{a.model} is not a von Mises mixture for q={a.dim}; exact MISE unavailable", file=sys.stderr)
        return 2
    grid = np.geomspace(a.h_min, a.h_max, a.points)
    curve = mise_curve(mix, a.n, grid, build_rule(a.dim, seed=a.quad_seed))
    lines = ["h,mise"] + [f"{h:.17g},{v:.17g}" for h, v in zip(curve.h, curve.values)]
    text = "\n".join(lines) + "\n"
    if a.out:
        with open(a.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"# minimum {curve.value_min:.6g} at h = {curve.h_min:.6g}", file=sys.stderr)
    return 0


def cmd_select(a) -> int:
    x = bench.ingest_csv(a.input, a.format)
    rep = select(x, a.method, seed=a.seed)
    print(json.dumps(rep.to_dict(), indent=2, default=_jsonable))
    return 0


def cmd_density(a) -> int:
    x = bench.ingest_csv(a.input, a.format)
    if a.h is not None:
        h = a.h
    else:
        h = select(x, a.method, seed=a.seed).h
    model = KdeModel(x, h)
    nodes = bench.ingest_csv(a.grid, "unit-vectors") if a.grid else build_rule(model.q, seed=a.quad_seed).nodes
    vals = kde_eval(model, nodes)
    head = [f"x{i}" for i in range(nodes.shape[1])] + ["density"]
    if a.out:
        bench.write_points(a.out, nodes, vals, head)
    else:
        print(",".join(head))
        for row, v in zip(nodes, vals):
            print(",".join(f"{c:.17g}" for c in row) + f",{v:.17g}")
    return 0


def cmd_fit(a) -> int:
    x = bench.ingest_csv(a.input, a.format)
    if a.components == "auto":
        fit, trace = select_mixture(x, seed=a.seed, criterion=a.criterion, restarts=a.restarts)
    else:
        fit = best_of_restarts(x, int(a.components), a.restarts, a.seed)
        trace = OrderSearchTrace(a.criterion, {fit.M: fit.criterion(a.criterion)}, fit.M, ())
    out = {"M": fit.M, "log_likelihood": fit.log_likelihood, "bic": fit.bic, "aic": fit.aic,
           "converged": fit.converged, "iterations": fit.iterations, "mixture": fit.mixture.to_dict(),
           "explored": {str(k): v for k, v in trace.explored.items()}, "pruned": list(trace.pruned),
           "fallback": trace.fallback}
    print(json.dumps(out, indent=2, default=_jsonable))
    return 0


def cmd_scenario_list(a) -> int:
    for m in SCENARIO_IDS:
        print(f"{m:<4} {scenario_description(m)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirkde", description="Kernel density estimation on the sphere.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="Monte Carlo comparison of bandwidth selectors")
    b.add_argument("--dim", type=_int_list, default=[1])
    b.add_argument("--n", type=_int_list, default=[500])
    b.add_argument("--models", type=_csv_list, default=["M2"])
    b.add_argument("--selectors", type=_csv_list, default=list(SELECTORS))
    b.add_argument("--replicates", type=int, default=200)
    b.add_argument("--full", action="store_true", help="1000 replicates")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--quad-seed", type=int, default=0)
    b.add_argument("--restarts", type=int, default=10)
    b.add_argument("--h-mise", action="store_true", help="also minimize the replicate-mean ISE")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("simulate", help="draw a sample from a scenario")
    s.add_argument("--model", required=True, choices=SCENARIO_IDS)
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("mise-curve", help="exact MISE over a bandwidth grid")
    m.add_argument("--model", required=True, choices=SCENARIO_IDS)
    m.add_argument("--dim", type=int, default=1)
    m.add_argument("--n", type=int, default=500)
    m.add_argument("--h-min", type=float, default=0.01)
    m.add_argument("--h-max", type=float, default=10.0)
    m.add_argument("--points", type=int, default=100)
    m.add_argument("--quad-seed", type=int, default=0)
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_mise_curve)

    fmt = dict(choices=["unit-vectors", "angles-1d", "angles-2d"], default="unit-vectors")
    c = sub.add_parser("select", help="select a bandwidth for a data file")
    c.add_argument("--input", required=True)
    c.add_argument("--format", **fmt)
    c.add_argument("--method", required=True, choices=SELECTORS)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_select)

    d = sub.add_parser("density", help="evaluate the estimate on a grid")
    d.add_argument("--input", required=True)
    d.add_argument("--format", **fmt)
    d.add_argument("--h", type=float, default=None, help="bandwidth; selected with --method if omitted")
    d.add_argument("--method", choices=SELECTORS, default="emi")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--grid", default=None, help="CSV of unit vectors; default is the quadrature grid")
    d.add_argument("--quad-seed", type=int, default=0)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_density)

    f = sub.add_parser("fit", help="fit a von Mises mixture with order search")
    f.add_argument("--input", required=True)
    f.add_argument("--format", **fmt)
    f.add_argument("--components", default="auto", help="'auto' for the order search or a fixed M")
    f.add_argument("--criterion", choices=["bic", "aic", "aicc"], default="bic")
    f.add_argument("--restarts", type=int, default=10)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_fit)

    sub.add_parser("scenario-list", help="list the simulation scenarios").set_defaults(func=cmd_scenario_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, bench.BenchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
