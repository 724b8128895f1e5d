import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirkde.geometry import random_rotation
from dirkde.kde import KdeModel, kde_eval, kde_eval_loo
from dirkde.models import VonMises, VonMisesMixture, scenario
from dirkde.selectors import (
    SELECTORS,
    SelectionContext,
    SelectorError,
    cv2,
    cv_kl,
    h_ami_from_mixture,
    h_emi_from_mixture,
    rot_bandwidth,
    rot_bandwidth_circular_terms,
    select,
    tay_bandwidth,
)

# mpmath, 40 digits, from the Bessel-function forms of the rules
H_ROT_Q1_K2_N500 = 0.22935371965473253584
H_TAY_Q1_K2_N500 = 0.24894445268486472788
H_ROT_Q2_K5_N500 = 0.16125252584455789950


def test_closed_form_values():
    assert rot_bandwidth(1, 2.0, 500) == pytest.approx(H_ROT_Q1_K2_N500, rel=1e-12)
    assert tay_bandwidth(2.0, 500) == pytest.approx(H_TAY_Q1_K2_N500, rel=1e-12)
    assert rot_bandwidth(2, 5.0, 500) == pytest.approx(H_ROT_Q2_K5_N500, rel=1e-12)


@given(st.floats(1e-3, 300.0), st.integers(2, 10_000))
def test_rot_matches_term_by_term_form(kappa, n):
    assert rot_bandwidth(1, kappa, n) == pytest.approx(rot_bandwidth_circular_terms(kappa, n), rel=1e-9)
    assert tay_bandwidth(kappa, n) == pytest.approx(rot_bandwidth_circular_terms(kappa, n, False), rel=1e-9)


@given(st.floats(1e-2, 500.0))
def test_tay_never_below_rot(kappa):
    # dropping a positive denominator term can only enlarge h
    assert tay_bandwidth(kappa, 100) >= rot_bandwidth(1, kappa, 100) * (1 - 1e-12)


def test_rate_in_n():
    for q in (1, 2, 3):
        r = rot_bandwidth(q, 3.0, 1000) / rot_bandwidth(q, 3.0, 10)
        assert r == pytest.approx(100 ** (-1 / (4 + q)), rel=1e-12)


def test_rot_on_uniform_like_data_is_clamped():
    assert math.isinf(rot_bandwidth(1, 0.0, 100))
    x = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    rep = select(x, "rot")
    assert rep.at_boundary and rep.h == 1e3


@pytest.mark.parametrize("q,kappa", [(1, 2.0), (2, 5.0), (3, 1.5)])
def test_single_component_ami_equals_rot(q, kappa):
    mu = np.zeros(q + 1)
    mu[-1] = 1.0
    mix = VonMisesMixture([1.0], [mu], [kappa])
    h, edge = h_ami_from_mixture(mix, 500)
    assert not edge
    assert h == pytest.approx(rot_bandwidth(q, kappa, 500), rel=1e-6)


def _brute_cv2(x, h, m=40000):
    th = np.linspace(0, 2 * np.pi, m, endpoint=False)
    grid = np.column_stack([np.cos(th), np.sin(th)])
    model = KdeModel(x, h)
    int_f2 = np.sum(kde_eval(model, grid) ** 2) * 2 * np.pi / m
    loo = np.mean([kde_eval_loo(model, i) for i in range(len(x))])
    return 2 * loo - int_f2


@pytest.mark.parametrize("h", [0.1, 0.4, 1.5])
def test_cv2_matches_definition(h):
    x = scenario("M8", 1).sample(60, np.random.default_rng(1))
    assert cv2(x, h) == pytest.approx(_brute_cv2(x, h), rel=1e-9, abs=1e-12)


def test_cv_kl_matches_definition():
    x = scenario("M14", 2).sample(50, np.random.default_rng(2))
    h = 0.3
    model = KdeModel(x, h)
    ref = sum(math.log(kde_eval_loo(model, i)) for i in range(50))
    assert cv_kl(x, h) == pytest.approx(ref, rel=1e-12)


def test_cv_scores_survive_tiny_bandwidth():
    x = scenario("M2", 1).sample(100, np.random.default_rng(3))
    assert np.isfinite(cv2(x, 1e-3))
    assert np.isfinite(cv_kl(x, 1e-2))


def test_lcv_antipodal_pair_hits_upper_edge():
    rep = select(np.array([[1.0, 0.0], [-1.0, 0.0]]), "lcv")
    assert rep.at_boundary
    assert rep.h >= 9.0


def test_duplicates_do_not_break_cv():
    x = scenario("M2", 1).sample(50, np.random.default_rng(4))
    x = np.vstack([x, x[:10]])
    for m in ("lscv", "lcv"):
        rep = select(x, m)
        assert np.isfinite(rep.h) and rep.h > 0


def test_rotation_equivariance():
    rng = np.random.default_rng(5)
    x = scenario("M9", 2).sample(150, rng)
    Q = random_rotation(3, rng)
    for m in ("rot", "lscv", "lcv"):
        a, b = select(x, m).h, select(x @ Q.T, m).h
        assert a == pytest.approx(b, rel=2e-3), m
    mix = VonMisesMixture([0.4, 0.6], [[0, 0, 1.0], [0, 0.6, 0.8]], [4.0, 12.0])
    rot = VonMisesMixture(mix.weights, mix.means @ Q.T, mix.kappas)
    assert h_ami_from_mixture(mix, 300)[0] == pytest.approx(h_ami_from_mixture(rot, 300)[0], rel=1e-3)
    assert h_emi_from_mixture(mix, 300).h == pytest.approx(h_emi_from_mixture(rot, 300).h, rel=2e-3)


def test_emi_close_to_ami_for_large_n():
    # the exact and asymptotic risks agree as n grows
    mix = VonMisesMixture([1.0], [[0, 1.0]], [10.0])
    h_a, _ = h_ami_from_mixture(mix, 100_000)
    h_e = h_emi_from_mixture(mix, 100_000).h
    assert h_e == pytest.approx(h_a, rel=0.05)


def test_all_selectors_run_and_are_deterministic():
    x = scenario("M14", 1).sample(120, np.random.default_rng(6))
    ctx = SelectionContext(x, seed=2)
    for m in SELECTORS:
        a = select(x, m, ctx=ctx)
        b = select(x, m, seed=2)
        assert a == b, m
        assert a.selector == m and a.n == 120 and a.q == 1
        assert 1e-3 <= a.h <= 1e3
        d = a.to_dict()
        assert d["h"] == a.h


def test_circular_only_selectors_reject_spheres():
    x = VonMises([0, 0, 1], 3.0).sample(30, np.random.default_rng(0))
    for m in ("tay", "oli"):
        with pytest.raises(SelectorError):
            select(x, m)


def test_bad_input():
    with pytest.raises(SelectorError):
        select(np.array([[1.0, 0.0]]), "rot")
    with pytest.raises(SelectorError):
        select(np.array([[1.0, 0.0], [0.0, 1.0]]), "plugin")
    with pytest.raises(ValueError):
        select(np.array([[2.0, 0.0], [0.0, 1.0]]), "rot")


@settings(max_examples=10)
@given(st.integers(0, 2**31))
def test_reports_within_window(seed):
    x = VonMises([0, 1.0], 2.0).sample(40, np.random.default_rng(seed))
    for m in ("rot", "tay", "lscv"):
        assert 1e-3 <= select(x, m).h <= 1e3
