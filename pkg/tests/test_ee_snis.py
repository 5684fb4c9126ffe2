import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from eesnis import derive_stream
from eesnis.core import Integrand, affine_integrand, constant_integrand, draw_weighted_sample
from eesnis.ee_snis import (
    PsiFunction,
    build_psi,
    coupled_ee_snis_estimate,
    ee_snis_estimate,
    psi_derivative,
    psi_eval,
    recenter,
    sandwich_variance,
    solve_root,
)
from eesnis.errors import AtBreakpoint, NonExistence
from eesnis.problems import get_problem, optimal_pair, oracle_values, random_discrete_problem
from eesnis.proposals import CategoricalProposal, CoupledProposal, GaussianProposal
from eesnis.stats import run_replications


def psi_of(plus, minus, ratio=1.0):
    py, pw = zip(*plus)
    my, mw = zip(*minus)
    return PsiFunction(py, pw, my, mw, ratio)


def bisect(fn, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


values = st.floats(-10, 10, allow_nan=False).map(lambda v: round(v, 2))
weights = st.one_of(st.just(0.0), st.floats(0.01, 5.0))
side = st.lists(st.tuples(values, weights), min_size=1, max_size=100)


# ---------------------------------------------------------------- evaluation

def test_two_point_values():
    psi = psi_of([(2, 1)], [(0, 1)])
    assert psi_eval(psi, 0.0) == 2.0
    assert psi_eval(psi, 2.0) == -2.0


def test_hand_value_and_slope():
    psi = psi_of([(3, 2)], [(1, 1)])
    assert psi_eval(psi, 2.0) == 1.0
    assert psi.eval_naive(2.0) == 1.0
    assert psi_derivative(psi, 2.0) == -3.0


def test_zero_weight_plus_side_is_nonpositive():
    psi = psi_of([(5, 0.0), (1, 0.0)], [(0, 1.0), (2, 2.0)])
    mu = np.linspace(-5, 5, 101)
    vals = psi_eval(psi, mu)
    assert np.all(vals <= 0)
    assert np.allclose(vals, -np.maximum(mu - 0, 0) / 2 - 2 * np.maximum(mu - 2, 0) / 2, rtol=1e-14)


def test_far_left_and_right():
    psi = psi_of([(1, 1.0), (4, 2.0)], [(0, 3.0), (2, 1.0)])
    assert psi_eval(psi, -1.0) == pytest.approx((1 * 2 + 2 * 5) / 2, rel=1e-15)
    assert psi_eval(psi, 10.0) == pytest.approx(-(3 * 10 + 1 * 8) / 2, rel=1e-15)
    assert psi_derivative(psi, -1.0) == pytest.approx(-1.5)


def test_prefix_sums_match_naive_batch():
    rng = np.random.default_rng(0)
    psi = PsiFunction(rng.normal(size=50), rng.exponential(size=50), rng.normal(size=50), rng.exponential(size=50))
    mu = rng.uniform(-3, 3, 100)
    fast, slow = psi_eval(psi, mu), psi.eval_naive(mu)
    assert np.allclose(fast, slow, rtol=1e-12, atol=0)


@given(side, side, st.floats(-12, 12))
@settings(max_examples=200, deadline=None)
def test_prefix_sums_match_naive(plus, minus, mu):
    psi = psi_of(plus, minus)
    fast, slow = psi_eval(psi, mu), psi.eval_naive(mu)
    scale = sum(w * (abs(y) + abs(mu)) for y, w in plus + minus) + 1.0
    assert abs(fast - slow) <= 1e-12 * scale


@given(side, side, st.floats(-12, 12), st.floats(0, 5))
@settings(max_examples=200, deadline=None)
def test_monotone(plus, minus, mu, step):
    psi = psi_of(plus, minus)
    assert psi_eval(psi, mu) >= psi_eval(psi, mu + step) - 1e-12 * (1 + abs(psi_eval(psi, mu)))


@given(side, side, st.floats(-12, 12))
@settings(max_examples=100, deadline=None)
def test_finite_difference_slope(plus, minus, mu):
    psi = psi_of(plus, minus)
    h = 1e-7 * (1 + abs(mu))
    b = psi.breakpoints
    assume(not np.any((b >= mu - h) & (b <= mu + h)))
    fd = (psi_eval(psi, mu + h) - psi_eval(psi, mu - h)) / (2 * h)
    d = psi_derivative(psi, mu)
    assert d <= 0
    assert fd == pytest.approx(d, rel=1e-4, abs=1e-6 * (1 + abs(d)))


def test_breakpoint_derivative_needs_side():
    psi = psi_of([(3, 2)], [(1, 1)])
    with pytest.raises(AtBreakpoint):
        psi_derivative(psi, 3.0)
    assert psi_derivative(psi, 3.0, "left") == -3.0
    assert psi_derivative(psi, 3.0, "right") == -1.0


def test_constructor_validation():
    with pytest.raises(ValueError):
        PsiFunction([], [], [1.0], [1.0])
    with pytest.raises(ValueError):
        PsiFunction([1.0], [-1.0], [1.0], [1.0])
    with pytest.raises(ValueError):
        PsiFunction([1.0], [1.0], [1.0], [1.0], ratio=0.0)
    with pytest.raises(ValueError):
        PsiFunction([1.0, 2.0], [1.0], [1.0], [1.0])


# ---------------------------------------------------------------- roots

def test_symmetric_root():
    r = solve_root(psi_of([(2, 1)], [(0, 1)]))
    assert r.mu_hat == 1.0 and r.unique
    assert (r.f_bar, r.f_underbar) == (2.0, 0.0)


def test_hand_root():
    psi = psi_of([(3, 2)], [(1, 1)])
    r = solve_root(psi)
    assert r.mu_hat == pytest.approx(7 / 3, abs=1e-12)
    assert r.mu_hat == pytest.approx(bisect(psi, 1.0, 3.0), abs=1e-12)
    assert r.psi_dot_at_root == -3.0


def test_root_on_interior_segment():
    psi = psi_of([(1, 1), (2, 1)], [(0, 1)])
    r = solve_root(psi)
    assert r.mu_hat == pytest.approx(0.75, abs=1e-12)
    assert r.mu_hat == pytest.approx(bisect(psi, 0.0, 2.0), abs=1e-12)


def test_root_at_breakpoint():
    # plus (2, 1), minus (0, 1) and (1, 1): Psi(1) = 1 - 1 = 0 exactly at a kink
    r = solve_root(psi_of([(2, 1)], [(0, 1), (1, 100)]))
    assert r.psi_at_root == pytest.approx(0.0, abs=1e-12)


@given(side, side)
@settings(max_examples=300, deadline=None)
def test_root_matches_bisection_and_dichotomy(plus, minus):
    psi = psi_of(plus, minus)
    if psi.f_bar is None or psi.f_underbar is None:
        with pytest.raises(NonExistence):
            solve_root(psi)
        return
    r = solve_root(psi)
    assert r.unique == (psi.f_bar > psi.f_underbar)
    if r.unique:
        assert r.mu_hat == pytest.approx(bisect(psi, -11.0, 11.0), abs=1e-10)
        a, b = r.segment
        assert abs(psi_eval(psi, r.mu_hat)) <= 1e-9 * (1 + abs(a) + abs(b * r.mu_hat))
        assert r.psi_dot_at_root < 0
    else:
        lo, hi = sorted(r.root_interval)
        assert lo <= r.mu_hat <= hi
        for mu in np.linspace(lo, hi, 7):
            assert psi_eval(psi, mu) == 0.0


def test_plateau_midpoint():
    r = solve_root(psi_of([(1, 1), (0, 2)], [(3, 1), (5, 1)]))
    assert not r.unique
    assert r.root_interval == (1.0, 3.0)
    assert r.mu_hat == 2.0


def test_nonexistence():
    with pytest.raises(NonExistence):
        solve_root(psi_of([(1, 0.0)], [(0, 1.0)]))
    with pytest.raises(NonExistence):
        solve_root(psi_of([(1, 1.0)], [(0, 0.0)]))


@given(side, side, st.floats(1e-3, 1e3))
@settings(max_examples=100, deadline=None)
def test_weight_scaling(plus, minus, c):
    psi = psi_of(plus, minus)
    assume(psi.f_bar is not None and psi.f_underbar is not None and psi.f_bar > psi.f_underbar)
    scaled = PsiFunction(psi.plus_y, psi.plus_w, psi.minus_y, psi.minus_w, log_scale=math.log(c))
    r1, r2 = solve_root(psi), solve_root(scaled)
    assert r1.mu_hat == r2.mu_hat
    assert psi_eval(scaled, 0.3) == pytest.approx(c * psi_eval(psi, 0.3), rel=1e-12, abs=1e-300)
    se1 = sandwich_variance(psi, r1.mu_hat, r1.psi_dot_at_root)[2]
    se2 = sandwich_variance(scaled, r2.mu_hat, r2.psi_dot_at_root)[2]
    assert se2 == pytest.approx(se1, rel=1e-12, abs=1e-300)


def test_ratio_enters_minus_side():
    psi = psi_of([(3, 2)], [(1, 1)], ratio=2.0)
    # 2 (3 - mu) = 2 (mu - 1) gives mu = 2
    assert solve_root(psi).mu_hat == pytest.approx(2.0, abs=1e-14)


# ---------------------------------------------------------------- variance

def test_theta_star_substitution():
    # at mu = 0 the plus summands are 1 and 1 + sqrt(2) (sd 1), the minus ones 1 and 1 + 3 sqrt(2) (sd 3)
    r2 = math.sqrt(2.0)
    psi = psi_of([(1.0, 1.0), (1.0 + r2, 1.0)], [(-1.0, 1.0), (-1.0 - 3 * r2, 1.0)])
    mu = 0.0
    sp, sm, se, theta = sandwich_variance(psi, mu, psi_derivative(psi, mu))
    p, m = psi.summands(mu)
    assert sp == pytest.approx(np.std(p, ddof=1)) and sm == pytest.approx(np.std(m, ddof=1))
    assert theta == pytest.approx(sp / (sp + sm))
    assert (sp, sm) == (pytest.approx(1.0), pytest.approx(3.0))
    assert theta == pytest.approx(0.25)


def test_degenerate_variance_flag():
    psi = psi_of([(2, 1), (2, 1)], [(0, 1), (0, 1)])
    sp, sm, se, theta = sandwich_variance(psi, 1.0, -2.0)
    assert (sp, sm, se, theta) == (0.0, 0.0, 0.0, 0.5)


def test_optimal_proposals_give_exact_root():
    prob = random_discrete_problem()
    orc = oracle_values(prob)
    qp, qm = optimal_pair(prob, 0.0)
    for i in range(20):
        r = ee_snis_estimate(prob.f, prob.target, qp, qm, 50, 70, derive_stream(40, i))
        assert r.mu_hat == pytest.approx(orc.mu0, abs=1e-10 * max(1, abs(orc.mu0)))
        assert r.std_error <= 1e-9


def test_minimal_sample():
    prob = random_discrete_problem()
    a = prob.atoms
    hi, lo = int(np.argmax(a.values)), int(np.argmin(a.values))
    qp = CategoricalProposal(a.points[[hi]], [1.0])
    qm = CategoricalProposal(a.points[[lo]], [1.0])
    r = ee_snis_estimate(prob.f, prob.target, qp, qm, 1, 1, derive_stream(0, 0))
    wp, wm = a.masses[hi], a.masses[lo]
    expected = (wp * a.values[hi] + wm * a.values[lo]) / (wp + wm)
    assert r.mu_hat == pytest.approx(expected, rel=1e-14)
    assert r.n_total == 2


def test_discrete_generic():
    prob = random_discrete_problem()
    mu0 = oracle_values(prob).mu0
    r = ee_snis_estimate(prob.f, prob.target, prob.defensive, prob.defensive, 10**4, 10**4, derive_stream(41, 0))
    assert abs(r.mu_hat - mu0) <= 5 * r.std_error


def test_sandwich_calibration():
    prob = get_problem("gaussian-x")
    qp, qm = optimal_pair(prob, 0.3)
    est = lambda p, s: ee_snis_estimate(p.f, p.target, qp, qm, 10**4, 10**4, s)
    summ = run_replications(prob, est, 1000, 42, truth=0.0, workers=1)
    assert abs(summ.mean_reported_se / summ.empirical_sd - 1.0) < 0.15


def test_variance_matches_oracle_scaling():
    # total-budget n var of the root against (s2+/theta + s2-/(1-theta)) / c_p^2
    prob = random_discrete_problem()
    q = prob.defensive
    orc = oracle_values(prob, q_plus=q, q_minus=q)
    n_side = 2000
    est = lambda p, s: ee_snis_estimate(p.f, p.target, q, q, n_side, n_side, s)
    summ = run_replications(prob, est, 400, 43, truth=orc.mu0, workers=1)
    n_var = 2 * n_side * summ.empirical_sd**2
    assert n_var == pytest.approx(orc.ee_snis_variance(0.5), rel=0.25)


def test_scale_invariance_end_to_end():
    prob = get_problem("gaussian-x2")
    qp, qm = optimal_pair(prob, 0.2, center=1.0)
    a = ee_snis_estimate(prob.f, prob.target, qp, qm, 300, 300, derive_stream(44, 0))
    b = ee_snis_estimate(prob.f, prob.target.scaled(1e3), qp, qm, 300, 300, derive_stream(44, 0))
    assert a.mu_hat == b.mu_hat
    assert b.std_error == pytest.approx(a.std_error, rel=1e-12)


# ---------------------------------------------------------------- coupled

def test_coupled_independent_covariance_vanishes():
    prob = get_problem("gaussian-x")
    qp, qm = optimal_pair(prob, 0.3)
    joint = CoupledProposal(qp, qm, "independent")
    covs = []
    for i in range(1000):
        covs.append(coupled_ee_snis_estimate(prob.f, prob.target, joint, 200, derive_stream(45, i)).covariance)
    covs = np.array(covs)
    assert abs(covs.mean()) <= 5 * covs.std(ddof=1) / math.sqrt(covs.size)


def test_coupled_independent_uses_same_draws_as_plain():
    # independent coupling spawns "q1"/"q2" children, so feed the plain estimator the same samples
    prob = get_problem("gaussian-x")
    qp, qm = optimal_pair(prob, 0.3)
    s = derive_stream(46, 0)
    r = coupled_ee_snis_estimate(prob.f, prob.target, CoupledProposal(qp, qm, "independent"), 300, s)
    sp = draw_weighted_sample(prob.target, prob.f, qp, 300, s.spawn("q1"))
    sm = draw_weighted_sample(prob.target, prob.f, qm, 300, s.spawn("q2"))
    assert r.mu_hat == pytest.approx(solve_root(build_psi(sp, sm)).mu_hat, rel=1e-13, abs=1e-15)


def test_coupled_comonotone_reports_covariance():
    prob = get_problem("gaussian-x")
    qp, qm = optimal_pair(prob, 0.3)
    r = coupled_ee_snis_estimate(prob.f, prob.target, CoupledProposal(qp, qm, "comonotone"), 2000,
                                 derive_stream(47, 0))
    assert r.covariance is not None and math.isfinite(r.covariance)


def test_positive_covariance_shrinks_paired_se():
    # antithetic draws from a symmetric q make the plus and minus summands equal near mu = 0
    prob = get_problem("gaussian-x")
    q = GaussianProposal(0.0, 2.0)
    r = coupled_ee_snis_estimate(prob.f, prob.target, CoupledProposal(q, q, "antithetic"), 1000,
                                 derive_stream(48, 0))
    assert r.covariance > 0
    independent_se = math.sqrt((r.sigma_plus_hat**2 + r.sigma_minus_hat**2) / 1000) / abs(r.psi_dot_at_root)
    assert r.std_error < independent_se


# ---------------------------------------------------------------- recentering

def test_recenter_zero():
    f = Integrand(lambda x: x**3, 1, "x3")
    h = recenter(f, constant_integrand(0.0))
    x = np.linspace(-2, 2, 9)
    assert np.array_equal(h(x), f(x))


def test_recenter_x2_minus_x():
    prob = get_problem("gaussian-x2")
    h = recenter(prob.f, affine_integrand(1.0))
    qp, qm = optimal_pair(prob, 0.2, center=1.0)
    r = ee_snis_estimate(h, prob.target, qp, qm, 10**4, 10**4, derive_stream(49, 0))
    assert abs(r.mu_hat - 1.0) <= 5 * r.std_error


def test_recenter_to_constant():
    prob = random_discrete_problem()
    mu0 = oracle_values(prob).mu0
    g0 = Integrand(lambda x: prob.f(x) - mu0, 1, "f-mu0")
    h = recenter(prob.f, g0)
    # h is mu0 on every atom; an atom on each side of mu0 is not needed here
    r = ee_snis_estimate(h, prob.target, prob.defensive, prob.defensive, 30, 30, derive_stream(50, 0))
    assert r.mu_hat == pytest.approx(mu0, rel=1e-14)
