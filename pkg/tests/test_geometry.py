import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bregmanlab import geometry as geo
from bregmanlab.errors import DomainError, Unbounded, UnsupportedCombination
from bregmanlab.models import CanonicalAux

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def aux(s, beta, w=0.0):
    return CanonicalAux(np.asarray(s, dtype=float), 0.0, beta, w)


def test_bregman_identity_and_quadratic_case():
    g = geo.euclidean_geometry(np.zeros(2))
    assert g.bregman([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert g.bregman([0.0, 0.0], [3.0, 4.0]) == pytest.approx(12.5)


def test_linearization_example():
    g = geo.euclidean_geometry(np.zeros(2))
    assert g.linearize_d([1.0, 0.0], [0.0, 1.0]) == pytest.approx(-0.5)


def test_entropy_bregman_is_kl_on_simplex():
    g = geo.entropy_geometry(3)
    y = np.array([0.2, 0.3, 0.5])
    x = np.array([0.6, 0.1, 0.3])
    assert g.bregman(y, x) == pytest.approx(float(np.sum(x * np.log(x / y))))
    assert g.d(g.center) == pytest.approx(0.0, abs=1e-15)


def test_entropy_rejects_negative_points_and_bad_center():
    g = geo.entropy_geometry(2)
    with pytest.raises(DomainError):
        g.d(np.array([-0.1, 1.1]))
    with pytest.raises(DomainError):
        geo.entropy_geometry(2, np.array([0.0, 1.0]))


@settings(max_examples=60, deadline=None)
@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite))
def test_bregman_matches_definition(y, x):
    g = geo.euclidean_geometry(np.full(4, 0.3))
    direct = g.d(x) - g.linearize_d(y, x)
    assert g.bregman(y, x) == pytest.approx(direct, rel=1e-9, abs=1e-7)
    assert g.bregman(y, x) >= 0


def test_sigma_d_for_each_norm():
    assert geo.euclidean_geometry(np.zeros(5), "l2").sigma_d == 1.0
    assert geo.euclidean_geometry(np.zeros(5), "l1").sigma_d == pytest.approx(0.2)
    assert geo.euclidean_geometry(np.zeros(5), "linf").quad_growth_A == 5.0


def test_unconstrained_stationary_point():
    g = geo.euclidean_geometry(np.array([1.0, -1.0]))
    x = geo.solve_canonical(g, geo.unconstrained(2), aux([2.0, 4.0], 2.0))
    np.testing.assert_allclose(x, [0.0, -3.0])


def test_ball_lmo_is_cauchy_schwarz_extremum():
    q = geo.euclidean_ball(np.array([1.0, 1.0]), 2.0)
    s = np.array([3.0, 4.0])
    np.testing.assert_allclose(geo.lmo(q, s), [1.0 - 1.2, 1.0 - 1.6])
    np.testing.assert_allclose(geo.lmo(q, np.zeros(2)), [-1.0, 1.0])


def test_box_and_simplex_lmo():
    q = geo.box(-np.ones(3), 2 * np.ones(3))
    np.testing.assert_array_equal(geo.lmo(q, [1.0, -1.0, 0.0]), [-1.0, 2.0, -1.0])
    np.testing.assert_array_equal(geo.lmo(geo.simplex(3), [0.5, -2.0, -2.0]), [0.0, 1.0, 0.0])


def test_lmo_unbounded():
    with pytest.raises(Unbounded):
        geo.lmo(geo.unconstrained(2), [1.0, 0.0])
    g = geo.euclidean_geometry(np.zeros(2))
    with pytest.raises(Unbounded):
        geo.solve_canonical(g, geo.unconstrained(2), aux([1.0, 0.0], 0.0))


def test_entropy_subproblem_is_softmax():
    g = geo.entropy_geometry(3)
    s = np.array([1.0, 0.0, -1.0])
    x = geo.solve_canonical(g, geo.simplex(3), aux(s, 2.0))
    ref = np.exp(-s / 2.0) / np.exp(-s / 2.0).sum()
    np.testing.assert_allclose(x, ref, rtol=1e-14)


def test_unsupported_pairs():
    g = geo.euclidean_geometry(np.full(3, 1 / 3))
    with pytest.raises(UnsupportedCombination):
        geo.solve_canonical(g, geo.simplex(3), aux(np.ones(3), 1.0))
    e = geo.entropy_geometry(3)
    with pytest.raises(UnsupportedCombination):
        geo.solve_canonical(e, geo.box(np.zeros(3), np.ones(3)), aux(np.ones(3), 1.0))
    with pytest.raises(UnsupportedCombination):
        geo.solve_canonical(e, geo.simplex(3), aux(np.ones(3), 1.0, 1.0), geo.L1Penalty(1.0))


def test_soft_threshold_composite():
    g = geo.euclidean_geometry(np.zeros(3))
    x = geo.solve_canonical(g, geo.unconstrained(3), aux([-3.0, 0.5, 2.0], 1.0, 1.0), geo.L1Penalty(1.0))
    np.testing.assert_allclose(x, [2.0, 0.0, -1.0])


@settings(max_examples=60, deadline=None)
@given(arrays(float, 3, elements=finite), st.floats(0.1, 10), st.floats(0.0, 3.0))
def test_prox_solution_beats_random_feasible_points(s, beta, weight):
    g = geo.euclidean_geometry(np.array([0.2, -0.1, 0.0]))
    q = geo.box(-np.ones(3), np.ones(3))
    psi = geo.L1Penalty(weight)
    a = aux(s, beta, 1.0)
    x = geo.solve_canonical(g, q, a, psi)
    assert q.contains(x)
    best = a.value(g, x, psi)
    pts = q.sample(np.random.default_rng(0), 200)
    vals = [a.value(g, p, psi) for p in pts]
    assert best <= min(vals) + 1e-9 * max(1.0, abs(best))


@settings(max_examples=80, deadline=None)
@given(arrays(float, 5, elements=finite))
def test_simplex_projection_properties(v):
    q = geo.simplex(5)
    p = q.project(v)
    assert q.contains(p, tol=1e-9)
    # optimality: <v - p, y - p> <= 0 at every vertex
    for i in range(5):
        e = np.zeros(5)
        e[i] = 1.0
        assert float((v - p) @ (e - p)) <= 1e-8 * max(1.0, float(np.abs(v).max()))


def test_diameters():
    n2 = geo.NormSpec("l2", 2)
    assert geo.box(np.zeros(2), np.ones(2)).diameter(n2) == pytest.approx(np.sqrt(2))
    assert geo.simplex(3).diameter(geo.NormSpec("l1", 3)) == pytest.approx(2.0)
    assert geo.euclidean_ball(np.zeros(2), 1.5).diameter(n2) == pytest.approx(3.0)
    assert geo.unconstrained(2).diameter(n2) is None


def test_dual_norm_pairs():
    s = np.array([1.0, -3.0, 2.0])
    assert geo.NormSpec("l1", 3).dual_norm(s) == 3.0
    assert geo.NormSpec("linf", 3).dual_norm(s) == 6.0
