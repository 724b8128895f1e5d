"""Run a preset subset of the simulation grid and write the MISE tables.

    python scripts/run_tables.py circular --out results/circular
    python scripts/run_tables.py sphere --replicates 50
    python scripts/run_tables.py exact            # exact-MISE minima only, seconds
"""
import argparse
import logging
import sys

from dirkde import bench
from dirkde.models import SCENARIO_IDS, as_vm_mixture, scenario

PRESETS = {
    "circular": dict(dims=(1,), sizes=(500,), models=("M2", "M7", "M8", "M13", "M14", "M15")),
    "sphere": dict(dims=(2,), sizes=(500,), models=("M2", "M8", "M9", "M14")),
    "sizes": dict(dims=(1,), sizes=(100, 250, 500, 1000), models=("M2",)),
}


def exact_minima(dims, sizes):
    print("model  q     n   h_MISE   MISE x 100")
    for q in dims:
        for m in SCENARIO_IDS:
            if as_vm_mixture(scenario(m, q)) is None:
                continue
            for n in sizes:
                r = bench.exact_mise_minimum(m, q, n)
                print(f"{m:<5} {q:2d} {n:5d}  {r.h:.4f}   {100 * r.value:.4f}")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("preset", choices=sorted(PRESETS) + ["exact"])
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--full", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--h-mise", action="store_true")
    p.add_argument("--out", default=None)
    a = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    if a.preset == "exact":
        exact_minima((1, 2), (100, 250, 500, 1000))
        return 0
    cfg = bench.BenchConfig(**PRESETS[a.preset], replicates=a.replicates, full=a.full, seed=a.seed,
                            workers=a.workers, h_mise=a.h_mise, out_dir=a.out)
    res = bench.run_grid(cfg)
    for q in cfg.dims:
        for n in cfg.sizes:
            print(f"\nq={q} n={n}  MISE x 100 (sd)")
            print(bench.format_table(res, q, n))
            score = res.ranking(q, n)
            print("ranking: " + ", ".join(f"{s}={v:.2f}" for s, v in sorted(score.items(), key=lambda kv: -kv[1])))
    print(f"\n{res.wall_time / 60:.1f} min, digest {res.digest()[:16]}")
    return 0 if res.ok else 1


if __name__ == "__main__":
    sys.exit(main())
