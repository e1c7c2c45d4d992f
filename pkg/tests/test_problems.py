import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bregmanlab import geometry as geo
from bregmanlab import problems as pb
from bregmanlab.errors import PreconditionError, RangeViolation, UnsupportedCombination


def test_model_is_anchored_at_y():
    sigma = 0.7
    g = geo.euclidean_geometry(np.zeros(1))
    f = lambda x: abs(x[0]) + 0.5 * sigma * x[0] ** 2
    sub = lambda x: np.array([np.sign(x[0]) + sigma * x[0]])
    p = pb.NonSmoothProblem(f=f, g=sub, sigma_f=sigma, geom=g, qset=geo.unconstrained(1))
    for y in (-1.3, 0.4, 2.0):
        m = p.model(np.array([y]))
        assert m.value(g, np.array([y])) == pytest.approx(f(np.array([y])), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_model_minorizes_pwl(y, x):
    inst = pb.pwl_strong(1, 4, 0.5, np.random.default_rng(1), feasible={"kind": "box", "lower": -3, "upper": 3})
    p = inst.nsp()
    m = p.model(np.array([y]))
    assert m.value(p.geom, np.array([x])) <= p.f(np.array([x])) + 1e-12


def test_half_square_model_is_exact():
    g = geo.euclidean_geometry(np.zeros(3))
    f = lambda x: 0.5 * float(x @ x)
    p = pb.make_smooth_adapter(f, lambda x: x, 1.0, 1.0, g, geo.unconstrained(3))
    y = np.array([1.0, -2.0, 0.5])
    for x in np.random.default_rng(0).standard_normal((5, 3)):
        # f(x) <= m(y; x) + (L/2)||x - y||^2 - sigma_bar xi(y, x) with zero margin
        m = p.model(y).value(g, x)
        assert m == pytest.approx(f(x), abs=1e-12)


def test_quadratic_spectrum_construction():
    inst = pb.quadratic(50, 10.0, 1.0, np.random.default_rng(0))
    ev = np.linalg.eigvalsh(inst.data["H"])
    assert ev[-1] == pytest.approx(10.0, rel=1e-10)
    assert ev[0] == pytest.approx(1.0, rel=1e-10)
    p = inst.sp()
    assert p.f(inst.x_star) == pytest.approx(inst.f_star)
    np.testing.assert_allclose(p.grad(inst.x_star), 0.0, atol=1e-12)


def test_pwl_strong_optimum():
    inst = pb.pwl_strong(10, 20, 1.0, np.random.default_rng(2))
    p = inst.nsp()
    assert inst.data["A"].shape == (20, 10)
    assert p.f(inst.x_star) == pytest.approx(inst.f_star)
    pts = p.qset.sample(np.random.default_rng(3), 500)
    assert min(p.f(x) for x in pts) >= inst.f_star


def test_entropy_pwl_strong():
    inst = pb.pwl_strong(6, 8, 0.5, np.random.default_rng(4), geometry={"prox": "entropy"})
    p = inst.nsp()
    assert p.qset.kind == "simplex"
    pts = np.random.default_rng(5).dirichlet(np.ones(6), 300)
    assert min(p.f(x) for x in pts) >= inst.f_star - 1e-12


def test_holder_constant_estimate_is_below_analytic_bound():
    for rho in (1.25, 1.5, 1.75):
        inst = pb.holder(6, rho, np.random.default_rng(6), n_pairs=2000)
        upper = pb.holder_constant_upper(inst.data["A"], rho, inst.geom.norm)
        assert 0 < inst.data["M"] <= 1.5 * upper
        assert inst.sp().holder == (inst.data["M"], rho)


def test_holder_rejects_rho_two():
    with pytest.raises(RangeViolation):
        pb.holder(3, 2.0, np.random.default_rng(0))


def test_inexact_oracle_constants():
    inst = pb.quadratic(4, 3.0, 1.0, np.random.default_rng(7))
    exact = inst.sp()
    p = pb.make_inexact_oracle_adapter(exact, 0.01, exact.L, 0.5, exact.geom, seed=3)
    assert p.sigma_f == 0.5
    y = np.array([0.3, -0.2, 0.1, 0.0])
    fy, gy = p.oracle(y)
    assert exact.f(y) - 0.005 <= fy <= exact.f(y)
    assert p.oracle(y)[0] == fy  # deterministic
    with pytest.raises(PreconditionError):
        pb.make_inexact_oracle_adapter(exact, -1.0, exact.L, 0.5, exact.geom)


def test_inexact_oracle_uses_growth_constant():
    g = geo.euclidean_geometry(np.zeros(4), "linf")
    exact = pb.make_smooth_adapter(lambda x: 0.0, lambda x: np.zeros(4), 8.0, 0.0, g, geo.unconstrained(4))
    p = pb.make_inexact_oracle_adapter(exact, 0.0, 8.0, 2.0, g)
    assert p.sigma_f == pytest.approx(0.5)


def test_composite_adapter_contract():
    inst = pb.lasso(12, 6, 0.2, np.random.default_rng(8), reference=False)
    p = inst.sp()
    assert p.psi.kind == "l1"
    with pytest.raises(PreconditionError):
        pb.make_composite_adapter(lambda x: 0.0, lambda x: x, 1.0, 0.0, geo.L1Penalty(1.0), p.geom, p.qset,
                                  sigma_psi=0.1)


def test_lasso_reference_is_certified():
    inst = pb.lasso(30, 10, 0.1, np.random.default_rng(0))
    p = inst.sp()
    assert p.f(inst.x_star) - inst.f_star <= 1e-10 * max(1.0, inst.f_star)
    assert p.f(inst.x_star) >= inst.f_star


def test_sigma_bar_must_not_exceed_sigma_f():
    g = geo.euclidean_geometry(np.zeros(2))
    with pytest.raises(PreconditionError):
        pb.make_smooth_adapter(lambda x: 0.0, lambda x: x, 1.0, 0.5, g, geo.unconstrained(2), sigma_bar=0.7)
    with pytest.raises(PreconditionError):
        pb.make_smooth_adapter(lambda x: 0.0, lambda x: x, 0.1, 0.5, g, geo.unconstrained(2))


def test_families_without_a_form():
    inst = pb.lasso(8, 4, 0.1, np.random.default_rng(0), reference=False)
    with pytest.raises(UnsupportedCombination):
        inst.nsp()
