"""Kernel density estimation on the q-sphere with the von Mises kernel.

Bandwidth selectors (rule of thumb, mixture plug-ins with asymptotic or exact
MISE, and cross-validation), exact MISE for von Mises mixtures, the
simulation scenarios and a Monte Carlo benchmark harness.
"""
from .bench import BenchConfig, BenchResult, ingest_csv, ise, ranking, run_cell, run_grid
from .kde import KdeModel, kde_eval, kde_eval_loo, log_normalizing_constant
from .mixture import FitResult, best_of_restarts, em_fit, select_mixture
from .models import SCENARIO_IDS, VonMisesMixture, scenario
from .quadrature import QuadratureRule, build_rule, integrate
from .risk import curvature_mixture, curvature_vm, exact_mise, h_amise, minimize_risk, psi
from .selectors import SELECTORS, BandwidthReport, SelectionContext, cv2, select
from .special import log_bessel_i, log_cq, solve_concentration

__version__ = "0.1.0"

__all__ = [
    "BandwidthReport", "BenchConfig", "BenchResult", "FitResult", "KdeModel", "QuadratureRule",
    "SCENARIO_IDS", "SELECTORS", "SelectionContext", "VonMisesMixture", "best_of_restarts", "build_rule",
    "curvature_mixture", "curvature_vm", "cv2", "em_fit", "exact_mise", "h_amise", "ingest_csv", "integrate",
    "ise", "kde_eval", "kde_eval_loo", "log_bessel_i", "log_cq", "log_normalizing_constant",
    "minimize_risk", "psi", "ranking", "run_cell", "run_grid", "scenario", "select", "select_mixture",
    "solve_concentration",
]
