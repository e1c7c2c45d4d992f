import numpy as np
import pytest

from bregmanlab import engine as eng
from bregmanlab import geometry as geo
from bregmanlab import problems as pb
from bregmanlab import schedules as sch
from bregmanlab.errors import DegenerateC0, InvariantViolation, PreconditionError, UnsupportedCombination


def cfg(cls, variant, model, sched, K, **kw):
    return eng.RunConfig(problem_class=cls, variant=variant, model=model, schedule=sched, K=K, **kw)


@pytest.fixture(scope="module")
def quad():
    return pb.quadratic(6, 4.0, 0.5, np.random.default_rng(0), feasible={"kind": "box"}).sp()


@pytest.fixture(scope="module")
def pwl():
    return pb.pwl_strong(8, 6, 1.0, np.random.default_rng(1)).nsp()


def test_optimum_at_center_stays_put():
    g = geo.euclidean_geometry(np.zeros(3))
    p = pb.NonSmoothProblem(f=lambda x: 0.25 * float(x @ x), g=lambda x: 0.5 * x, sigma_f=0.5, geom=g,
                            qset=geo.unconstrained(3), x_star=np.zeros(3), f_star=0.0)
    tr = eng.run(cfg("NSP", "modified", "extended-md", sch.simple_averaging(20), 20), p)
    assert np.all(tr.column_stack("z") == 0.0)
    assert np.all(tr.column("f_xhat") == 0.0)


@pytest.mark.parametrize("variant", ["classical", "modified"])
@pytest.mark.parametrize("model", ["extended-md", "dual-averaging", "hybrid"])
def test_structured_relation_holds(quad, variant, model):
    fn = sch.classical_structured if variant == "classical" else sch.modified_structured
    s = fn(quad.L, 1.0, quad.sigma_f, quad.sigma_bar, 80)
    tr = eng.run(cfg("SP", variant, model, s, 80), quad)
    assert not tr.violations
    assert tr.column("rk_residual").max() <= 1e-8
    rows = eng.certificate_bounds(tr)
    for r in rows:
        assert r["gap"] + r["sigma_xi"] <= r["general_bound"] + 1e-8 * max(1.0, r["general_bound"])
        assert r["dist_sq"] <= r["distance_bound"] * (1 + 1e-8) + 1e-12


def test_nsp_certificate_is_nondecreasing(pwl):
    tr = eng.run(cfg("NSP", "classical", "dual-averaging", sch.simple_averaging(60), 60), pwl)
    assert np.all(np.diff(tr.column("C")) >= 0)


def test_nsp_certificate_recomputed_from_trace(pwl):
    K = 40
    s = sch.simple_averaging(K)
    tr = eng.run(cfg("NSP", "modified", "extended-md", s, K), pwl)
    C = 0.0
    for st in tr.states:
        k = st.k
        denom = st.lam ** 2 * pwl.sigma_f + st.S * (st.beta_prev + s.S_at(k - 1) * pwl.sigma_f)
        C += st.lam ** 2 * st.S * st.g_norm ** 2 / (2 * denom)
        assert st.C == pytest.approx(C, rel=1e-12)


def test_mutated_certificate_trips_strict_mode(pwl):
    with pytest.raises(InvariantViolation) as info:
        eng.run(cfg("NSP", "classical", "extended-md", sch.simple_averaging(30), 30, ck_factor=0.0), pwl)
    assert info.value.k is not None and info.value.residual > 1e-8


def test_degenerate_initial_certificate():
    p = pb.pwl_strong(3, 4, 0.0, np.random.default_rng(2)).nsp()
    with pytest.raises(DegenerateC0):
        eng.run(cfg("NSP", "classical", "extended-md", sch.simple_averaging(3), 3), p)


def test_config_validation(quad, pwl):
    s = sch.simple_averaging(5)
    with pytest.raises(UnsupportedCombination):
        eng.run(cfg("NSP", "classical", "hybrid", s, 5), pwl)
    with pytest.raises(PreconditionError):
        eng.run(cfg("NSP", "classical", "extended-md", s, 9), pwl)
    with pytest.raises(PreconditionError):
        eng.run_cgm(cfg("CGM", "modified", "dual-averaging", s, 5), quad)


def test_runs_are_bit_identical(quad):
    s = sch.modified_structured(quad.L, 1.0, quad.sigma_f, quad.sigma_bar, 50)
    a = eng.run(cfg("SP", "modified", "hybrid", s, 50), quad)
    b = eng.run(cfg("SP", "modified", "hybrid", s, 50), quad)
    assert a.column("f_xhat").tobytes() == b.column("f_xhat").tobytes()
    assert a.column_stack("w").tobytes() == b.column_stack("w").tobytes()


def test_classical_frank_wolfe_linear_objective():
    c = np.array([1.0, 2.0, 3.0])
    g = geo.euclidean_geometry(np.full(3, 1 / 3))
    p = pb.make_smooth_adapter(lambda x: float(c @ x), lambda x: c, 0.0, 0.0, g, geo.simplex(3),
                               x_star=np.array([1.0, 0.0, 0.0]), f_star=1.0)
    out = eng.run_classical_fw(p, 30)
    np.testing.assert_array_equal(out.z[0], [1.0, 0.0, 0.0])
    k = np.arange(31)
    np.testing.assert_allclose(out.gap, 2 * out.gap[0] / ((k + 1) * (k + 2)), rtol=1e-12)
    assert np.all(out.gap <= out.bound + 1e-12)


def test_conditional_gradient_uses_lmo_points():
    p = pb.quadratic(5, 3.0, 0.0, np.random.default_rng(3), geometry={"center": np.full(5, 0.2)},
                     feasible={"kind": "simplex"}, f_offset=0.0).sp()
    tr = eng.run_cgm(cfg("CGM", "modified", "dual-averaging", sch.simple_averaging(100), 100), p)
    for st in tr.states:
        assert np.count_nonzero(st.z) == 1
    rows = eng.certificate_bounds(tr)
    assert all(r["gap"] <= r["closed_form_bound"] for r in rows)
    post = eng.cgm_aposteriori_bound(tr)
    assert np.all(tr.column("f_xhat") - p.f_star <= post + 1e-12)


def test_property_report_needs_recording(quad):
    s = sch.classical_structured(quad.L, 1.0, quad.sigma_f, quad.sigma_bar, 5)
    tr = eng.run(cfg("SP", "classical", "extended-md", s, 5), quad)
    with pytest.raises(PreconditionError):
        eng.property_report(tr)
    tr = eng.run(cfg("SP", "classical", "hybrid", s, 5, track_properties=True), quad)
    rep = eng.property_report(tr, probes=50)
    assert rep.ok and {"build", "upper", "dominance", "floor"} <= set(rep.worst)


def test_weak_smooth_bound_reduces_without_inexactness():
    g = geo.euclidean_geometry(np.zeros(3))
    q = geo.box(-np.ones(3), np.ones(3))
    xs = np.array([0.5, -0.2, 0.1])
    f = lambda x: 0.5 * float((x - xs) @ (x - xs))
    p = pb.make_mixed_adapter(f, lambda x: x - xs, 1.0, 0.0, 1.5, 0.0, g, q, x_star=xs, f_star=0.0)
    s = sch.weak_nonstrong(1.0, 1.0, 1.5, 0.5, 30)
    tr = eng.run(cfg("SP", "modified", "dual-averaging", s, 30), p)
    for st, row in zip(tr.states, eng.weak_smooth_bound(tr)):
        assert row["general_bound"] == pytest.approx(st.beta * g.linearize_d(st.z, xs) / st.S)
        assert row["lhs"] <= row["general_bound"] + 1e-12
