import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bregmanlab import schedules as sch
from bregmanlab.errors import DegenerateBeta, PreconditionError, RangeViolation


def test_simple_averaging_partial_sums():
    s = sch.simple_averaging(100).validate()
    k = np.arange(101)
    np.testing.assert_allclose(s.S, (k + 1) * (k + 2) / 4)
    assert s.at(0) == (0.5, 0.0, 0.0, 0.5)


def test_classical_structured_recursion():
    s = sch.classical_structured(5.0, 1.0, 0.5, 0.5, 30).validate()
    beta = 4.5
    assert s.beta_at(7) == beta
    for k in range(30):
        assert s.lam[k + 1] == pytest.approx((beta + s.S[k] * 0.5) / beta)


def test_classical_structured_without_convexity_is_simple():
    s = sch.classical_structured(2.0, 1.0, 0.0, 0.0, 10)
    np.testing.assert_array_equal(s.lam, np.ones(11))


@pytest.mark.parametrize("sigma_f", [0.0, 0.01, 0.3, 2.0])
def test_modified_lambda_solves_quadratic(sigma_f):
    s = sch.modified_structured(3.0, 1.0, sigma_f, 0.0, 200)
    assert sch.modified_residual(s) <= 1e-13


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e6), st.floats(0, 100))
def test_modified_lambda_is_largest_root(S, r):
    lam = sch.modified_lambda(S, r)
    a = 1 + r * S
    assert lam > 0
    assert lam * lam == pytest.approx(a * (lam + S), rel=1e-12)


def test_modified_structured_cap():
    s = sch.modified_structured(1.0, 1.0, 1.0, 0.0, 10_000, max_S=1e50)
    assert s.S[-1] <= 1e50 and s.K < 10_000


def test_overflow_is_reported():
    with pytest.raises(RangeViolation):
        sch.modified_structured(1.0, 1.0, 1.0, 0.0, 10_000)


def test_degenerate_and_invalid_beta():
    with pytest.raises(DegenerateBeta):
        sch.structured_beta(2.0, 1.0, 2.0)
    with pytest.raises(PreconditionError):
        sch.structured_beta(1.0, 1.0, 2.0)


def test_weak_schedules_shape():
    s = sch.weak_nonstrong(2.0, 1.0, 1.5, 0.3, 20)
    assert s.beta_at(5) == pytest.approx(2.0 + 0.3 * 8 ** 0.75)
    w = sch.weak_strong(2.0, 1.0, 3, 0.5, 20)
    assert w.lam[4] == pytest.approx(5 ** 3 / 4)
    assert w.beta_at(4) == pytest.approx(2.5 * 6 ** 2)


def test_weak_schedule_ranges():
    with pytest.raises(RangeViolation):
        sch.weak_nonstrong(1.0, 1.0, 2.0, 1.0, 5)
    with pytest.raises(RangeViolation):
        sch.weak_nonstrong(1.0, 1.0, 1.5, 0.0, 5)
    with pytest.raises(PreconditionError):
        sch.weak_strong(1.0, 1.0, 0, 0.0, 5)


def test_p_regimes_at_rho_one_and_a_half():
    assert sch.p_threshold(1.5) == pytest.approx(5.0)
    assert sch.p_regime(5, 1.5) == "above"
    assert sch.p_regime(4, 1.5) == "equal"
    assert sch.p_regime(1, 1.5) == "below"
    assert sch.default_p(1.5) == 5
    assert sch.default_p(1.0) == 1


def test_tune_gamma():
    g = sch.tune_gamma(2.0, 1.0, 1.0, 3.0)
    assert g == pytest.approx(2.0 * (1.0 / 36.0) ** 0.5)
    with pytest.raises(PreconditionError):
        sch.tune_gamma(1.0, 1.0, 1.5, 0.0)


def test_custom_table_validation():
    with pytest.raises(RangeViolation):
        sch.custom_table([1.0, -1.0], [0.0, 0.0, 0.0])
    with pytest.raises(RangeViolation):
        sch.custom_table([1.0, 1.0], [1.0, 2.0, 1.0])


@pytest.mark.parametrize("r", [1e-4, 1e-2, 1.0, 100.0])
def test_sandwich_orders(r):
    lo, mid, hi = sch.sandwich(r)
    assert lo <= mid <= hi


def test_growth_sequences_match_direct_recursion():
    r, K = 0.1, 40
    seq = sch.growth_sequences(r, K)
    S = 1.0
    for k in range(K):
        S += sch.modified_lambda(S, r)
        assert math.log(S) == pytest.approx(seq["logS"][k + 1], rel=1e-12)


@pytest.mark.parametrize("r", [0.0, 1e-2, 1e-1, 1.0, 10.0])
def test_growth_bounds(r):
    worst = sch.validate_growth_bounds(r, 10_000)
    assert max(worst.values()) <= 1e-12
    assert ("sum_limit" in worst) == (r > 0)
