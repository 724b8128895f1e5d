"""Circular rule of thumb with and without the I_1 term, against the exact
MISE optimum for a von Mises truth. Writes plot-ready CSV to stdout.

    python scripts/extra_term.py --n 250 > extra_term.csv
"""
import argparse

import numpy as np

from dirkde.models import VonMisesMixture
from dirkde.quadrature import build_rule
from dirkde.risk import exact_mise, minimize_risk
from dirkde.selectors import rot_bandwidth, tay_bandwidth


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=250)
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--kmin", type=float, default=1e-2)
    p.add_argument("--kmax", type=float, default=100.0)
    a = p.parse_args(argv)
    rule = build_rule(1)
    print("kappa,h_tay,h_rot,h_mise,mise_tay,mise_rot,mise_min")
    for k in np.geomspace(a.kmin, a.kmax, a.points):
        mix = VonMisesMixture([1.0], [[0.0, 1.0]], [k])
        f = mix.density(rule.nodes)

        def risk(h):
            return exact_mise(mix, a.n, h, rule, f)

        ht, hr = min(tay_bandwidth(k, a.n), 1e3), min(rot_bandwidth(1, k, a.n), 1e3)
        best = minimize_risk(risk, 1e-2, 1e2)
        print(",".join(f"{v:.17g}" for v in (k, ht, hr, best.h, risk(ht), risk(hr), best.value)))


if __name__ == "__main__":
    main()
