import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eesnis import (
    GaussianProposal,
    UnnormalizedTarget,
    derive_stream,
    draw_weighted_sample,
    effective_sample_size,
    stream_key,
)
from eesnis.core import (
    RandomStream,
    affine_integrand,
    as_points,
    as_stream,
    check_dimensions,
    constant_integrand,
    splitmix64,
    weights_from_logs,
)
from eesnis.errors import DimensionMismatch, NonFiniteWeight, SupportViolation
from eesnis.problems import get_problem, hole_problem, oracle_values, random_discrete_problem
from eesnis.proposals import CategoricalProposal, UniformProposal


def first_draws(stream, n=100):
    return stream.generator.random(n)


def test_stream_determinism():
    assert np.array_equal(first_draws(derive_stream(7, 0)), first_draws(derive_stream(7, 0)))


def test_distinct_stream_ids_differ():
    assert not np.array_equal(first_draws(derive_stream(7, 0)), first_draws(derive_stream(7, 1)))


def test_distinct_seeds_differ():
    assert not np.array_equal(first_draws(derive_stream(7, 0)), first_draws(derive_stream(8, 0)))


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
@settings(max_examples=50, deadline=None)
def test_stream_keys_distinct_for_distinct_ids(seed, a, b):
    if a == b:
        return
    k1 = RandomStream(seed, a)
    k2 = RandomStream(seed, b)
    assert not np.array_equal(first_draws(k1, 4), first_draws(k2, 4))


def test_splitmix_is_injective_on_a_sample():
    xs = np.arange(10000)
    assert len({splitmix64(int(x)) for x in xs}) == xs.size


def test_spawn_is_pure_and_label_sensitive():
    s = derive_stream(3, 5)
    a = s.spawn("plus")
    b = s.spawn("plus")
    s.generator.random(10)  # consuming the parent does not move the children
    c = s.spawn("plus")
    assert np.array_equal(first_draws(a), first_draws(b))
    assert np.array_equal(first_draws(RandomStream(3, a.stream_id)), first_draws(c))
    assert a.stream_id != s.spawn("minus").stream_id


def test_stream_key_mixes_order():
    assert stream_key(1, 2) != stream_key(2, 1)
    assert stream_key("plus") != stream_key("minus")


def test_as_stream_accepts_int():
    assert np.array_equal(first_draws(as_stream(11)), first_draws(derive_stream(11, 0)))
    with pytest.raises(TypeError):
        as_stream("nope")


def test_as_points_shapes():
    assert as_points(1.0, 1).shape == (1,)
    assert as_points([[1.0], [2.0]], 1).shape == (2,)
    assert as_points([1.0, 2.0], 2).shape == (1, 2)
    with pytest.raises(DimensionMismatch):
        as_points(np.zeros((3, 2)), 3)
    with pytest.raises(DimensionMismatch):
        as_points(np.zeros((3, 2)), 1)


def test_check_dimensions_rejects_mismatch():
    t = UnnormalizedTarget(lambda x: np.zeros(x.shape[0]), dimension=2)
    with pytest.raises(DimensionMismatch):
        check_dimensions(t, affine_integrand(1.0))


def test_integrand_broadcasts_constants():
    f = constant_integrand(5.0)
    assert np.array_equal(f(np.arange(4.0)), np.full(4, 5.0))
    g = constant_integrand(2.0, dimension=3)
    assert g(np.zeros((2, 3))).shape == (2,)


def test_integrand_difference_tracks_affine():
    h = affine_integrand(2.0, 1.0) - affine_integrand(0.5, 3.0)
    assert h.affine == (1.5, -2.0)
    x = np.linspace(-1, 1, 5)
    assert np.allclose(h(x), 1.5 * x - 2.0)


def test_target_scaled_keeps_kernel():
    t = UnnormalizedTarget(lambda x: -0.5 * x * x)
    big = t.scaled(1000.0)
    assert big.log_kernel is t.log_kernel
    assert np.allclose(big(np.array([0.0, 1.0])), 1000.0 * t(np.array([0.0, 1.0])))
    with pytest.raises(ValueError):
        t.scaled(0.0)


def test_from_density_handles_zero():
    t = UnnormalizedTarget.from_density(lambda x: np.where(x > 0, x, 0.0))
    assert t.log_eval(np.array([-1.0]))[0] == -np.inf
    assert t(np.array([2.0]))[0] == pytest.approx(2.0)


def test_weights_from_logs_errors():
    assert np.array_equal(weights_from_logs(np.array([-np.inf, 0.0]), np.array([0.0, 0.0])), [0.0, 1.0])
    with pytest.raises(SupportViolation):
        weights_from_logs(np.array([0.0]), np.array([-np.inf]))
    with pytest.raises(NonFiniteWeight):
        weights_from_logs(np.array([800.0]), np.array([0.0]))


def test_weights_equal_cp_when_q_is_p():
    prob = get_problem("gaussian-x")
    s = draw_weighted_sample(prob.target, prob.f, prob.p, 50, derive_stream(1, 1))
    assert np.allclose(s.w, math.sqrt(2 * math.pi), rtol=1e-14, atol=0)


def test_weights_equal_cp_when_q_is_p_discrete():
    prob = random_discrete_problem()
    c_p = oracle_values(prob).c_p
    s = draw_weighted_sample(prob.target, prob.f, prob.p, 50, derive_stream(1, 2))
    assert np.allclose(s.w, c_p, rtol=1e-13, atol=0)


def test_holes_give_zero_weights():
    prob = hole_problem()
    q = prob.defensive
    s = draw_weighted_sample(prob.target, prob.f, q, 2000, derive_stream(2, 0))
    holes = prob.atoms.masses == 0
    hit = np.isin(s.x, prob.atoms.points[holes])
    assert hit.any()
    assert np.all(s.w[hit] == 0.0)
    assert np.all(s.w[~hit] > 0.0)


def test_weight_mean_estimates_cp():
    prob = random_discrete_problem()
    c_p = oracle_values(prob).c_p
    s = draw_weighted_sample(prob.target, prob.f, prob.defensive, 1000, derive_stream(3, 0))
    se = s.w.std(ddof=1) / math.sqrt(s.n)
    assert abs(s.w.mean() - c_p) <= 5 * se


@pytest.mark.parametrize("label", ["gaussian-x", "discrete-20"])
def test_weight_mean_unbiased_large_n(label):
    prob = get_problem(label)
    c_p = oracle_values(prob).c_p
    s = draw_weighted_sample(prob.target, prob.f, prob.defensive, 10**5, derive_stream(3, 1))
    se = s.w.std(ddof=1) / math.sqrt(s.n)
    assert abs(s.w.mean() - c_p) <= 5 * se


def test_sample_reproducible_bit_for_bit():
    prob = get_problem("gaussian-x2")
    a = draw_weighted_sample(prob.target, prob.f, prob.defensive, 100, derive_stream(9, 4))
    b = draw_weighted_sample(prob.target, prob.f, prob.defensive, 100, derive_stream(9, 4))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y) and np.array_equal(a.w, b.w)
    assert (a.source_seed, a.stream_id) == (9, 4)
    assert len(a.observations) == 100


def test_support_violation_detected():
    target = UnnormalizedTarget(lambda x: np.zeros(x.shape[0]))

    class Broken(UniformProposal):
        def logpdf(self, x):
            return np.full(np.shape(x), -np.inf)

    with pytest.raises(SupportViolation):
        draw_weighted_sample(target, affine_integrand(1.0), Broken(0, 1), 5, derive_stream(0, 0))


def test_nonfinite_f_at_zero_weight_is_dropped():
    target = UnnormalizedTarget.from_density(lambda x: np.where(x > 0.5, 1.0, 0.0))
    f = lambda x: np.where(x > 0.5, x, np.inf)
    s = draw_weighted_sample(target, f, UniformProposal(0, 1), 200, derive_stream(0, 1))
    assert np.all(np.isfinite(s.y))
    bad = lambda x: np.full(x.shape, np.nan)
    with pytest.raises(ValueError):
        draw_weighted_sample(target, bad, UniformProposal(0, 1), 200, derive_stream(0, 1))


def test_n_must_be_positive():
    prob = get_problem("gaussian-x")
    with pytest.raises(ValueError):
        draw_weighted_sample(prob.target, prob.f, prob.p, 0, derive_stream(0, 0))


def test_effective_sample_size():
    assert effective_sample_size(np.ones(10)) == pytest.approx(10.0)
    assert effective_sample_size([1.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert effective_sample_size(np.zeros(3)) == 0.0


def test_ess_invariant_to_scale():
    prob = get_problem("gaussian-x")
    s1 = draw_weighted_sample(prob.target, prob.f, prob.defensive, 100, derive_stream(5, 5))
    s2 = draw_weighted_sample(prob.target.scaled(1e3), prob.f, prob.defensive, 100, derive_stream(5, 5))
    assert s1.ess() == s2.ess()


def test_multidimensional_sampling():
    atoms = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    q = CategoricalProposal(atoms, [1, 2, 3])
    x = q.draw(derive_stream(1, 0), 50)
    assert x.shape == (50, 2)
    assert np.all(q.in_support(x))
    assert not q.in_support(np.array([[0.5, 0.5]]))[0]
    g = GaussianProposal(0.0, 1.0)
    assert g.dimension == 1
