import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from lcpkit.core import (IterationRecord, IterationTrace, QuadraticObjective, SmoothObjective,
                         StepSchedule, big_gamma, gamma, golden_section, spectral_norm,
                         top_eigenvalue_gram, unroll_recursion, wolfe_gap)
from lcpkit.oracles import ScaledSimplex


def test_gamma_values():
    assert gamma(1) == 1.0
    assert gamma(3) == 0.5
    assert big_gamma(1) == 1.0
    assert big_gamma(4) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        gamma(0)
    with pytest.raises(ValueError):
        big_gamma(0)


@given(st.integers(min_value=1, max_value=400))
def test_big_gamma_matches_product(k):
    prod = 1.0
    for i in range(2, k + 1):
        prod *= 1.0 - gamma(i)
    assert big_gamma(k) == pytest.approx(prod, rel=1e-12)


def test_unroll_first_gamma_one_drops_delta0():
    gs = [gamma(k) for k in range(1, 11)]
    assert unroll_recursion(1e6, gs, [0.0] * 10) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 10), st.floats(0.01, 1.0),
       st.lists(st.tuples(st.floats(0.01, 0.99), st.floats(0, 5)), min_size=1, max_size=30))
def test_unroll_bounds_simulated_recursion(delta0, g1, pairs):
    gs = [g1] + [g for g, _ in pairs[1:]]
    bs = [b for _, b in pairs]
    # worst case of Delta_i <= (1-g_i) Delta_{i-1} + B_i, starting from Delta_0
    d = delta0
    for g, b in zip(gs, bs):
        d = (1 - g) * d + b
    assert d <= unroll_recursion(delta0, gs, bs) * (1 + 1e-9) + 1e-12


def test_unroll_rejects_bad_input():
    with pytest.raises(ValueError):
        unroll_recursion(1.0, [0.5], [1.0, 2.0])
    with pytest.raises(ValueError):
        unroll_recursion(1.0, [1.5], [1.0])
    with pytest.raises(ValueError):
        unroll_recursion(1.0, [1.0, 1.0], [1.0, 1.0])


def test_golden_section_quadratic_and_endpoints():
    assert golden_section(lambda a: (a - 0.3) ** 2) == pytest.approx(0.3, abs=1e-8)
    assert golden_section(lambda a: a) == 0.0
    assert golden_section(lambda a: -a) == 1.0


def test_power_iteration_matches_svd(rng):
    A = rng.standard_normal((30, 20))
    assert spectral_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-6)
    As = sp.random(40, 30, density=0.3, random_state=1, format="csr")
    assert top_eigenvalue_gram(As) == pytest.approx(np.linalg.norm(As.toarray(), 2) ** 2, rel=1e-6)
    assert spectral_norm(np.zeros((3, 3))) == 0.0


def test_quadratic_objective_gradient_and_lipschitz(rng):
    A = rng.uniform(0, 1, (8, 5))
    b = rng.standard_normal(8)
    q = QuadraticObjective(A, b)
    x = rng.standard_normal(5)
    h = 1e-6
    num = np.array([(q.value(x + h * e) - q.value(x - h * e)) / (2 * h) for e in np.eye(5)])
    assert np.allclose(q.grad(x), num, atol=1e-5)
    assert q.lipschitz == pytest.approx(2 * np.linalg.norm(A, 2) ** 2, rel=1e-6)
    assert q.gram_min_eigenvalue() == pytest.approx(2 * np.linalg.eigvalsh(A.T @ A)[0], rel=1e-8)
    assert QuadraticObjective(A.T, b[:5]).gram_min_eigenvalue() == 0.0


def test_quadratic_acts_on_matrices(rng):
    A = rng.standard_normal((4, 9))
    q = QuadraticObjective(A, np.zeros(4))
    X = rng.standard_normal((3, 3))
    assert q.grad(X).shape == (3, 3)
    assert q.value(X) == pytest.approx(np.sum((A @ X.ravel()) ** 2))


def test_exact_linesearch_matches_golden(rng):
    A = rng.standard_normal((6, 4))
    q = QuadraticObjective(A, rng.standard_normal(6))
    y, x = rng.standard_normal(4), rng.standard_normal(4)
    generic = SmoothObjective(q.value, q.grad, q.lipschitz)
    assert q.linesearch(y, x) == pytest.approx(generic.linesearch(y, x), abs=1e-6)
    assert q.linesearch(y, y) == 0.0


def test_step_schedule():
    q = QuadraticObjective(np.eye(2), np.zeros(2))
    y, x = np.array([1.0, 0.0]), np.array([-1.0, 0.0])
    assert StepSchedule.OPEN_LOOP.step(3, q, y, x) == 0.5
    assert StepSchedule.LINE_SEARCH.step(3, q, y, x) == pytest.approx(0.5)
    assert StepSchedule("linesearch") is StepSchedule.LINE_SEARCH


def test_linearization():
    q = QuadraticObjective(np.eye(2), np.zeros(2))
    x, y = np.array([1.0, 2.0]), np.array([0.0, 1.0])
    assert q.linearization(x, y) == pytest.approx(5 + 2 * (-1) + 4 * (-1))


def test_wolfe_gap_upper_bounds_suboptimality(rng):
    n = 6
    A = rng.uniform(0, 1, (4, n))
    s0 = np.full(n, 1.0 / n)
    q = QuadraticObjective(A, A @ s0)
    X = ScaledSimplex(n)
    for _ in range(20):
        y = X.random_point(rng)
        assert wolfe_gap(q, X, y) >= q.value(y) - 0.0 - 1e-12
    assert wolfe_gap(q, X, s0) == pytest.approx(0.0, abs=1e-12)


def test_wolfe_gap_shape_mismatch():
    bad = SmoothObjective(lambda x: 0.0, lambda x: np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        wolfe_gap(bad, ScaledSimplex(2), np.array([1.0, 0.0]))


def test_trace_violations_and_serialization():
    t = IterationTrace("x", records=[IterationRecord(0, 1.0, 0, 0.0),
                                     IterationRecord(1, 0.5, 1, 0.0, bound=0.4),
                                     IterationRecord(2, 0.3, 2, 0.0, dual_bound=0.0, bound=0.3)])
    assert t.violations(0.0) == [1]
    assert t.violations(0.05) == [1]
    assert t.violations(-0.01) == [1, 2]
    assert t.violations(None) == []
    d = t.to_dict()
    assert d["records"][1]["bound"] == 0.4
    assert t.at(2).objective == 0.3
    with pytest.raises(KeyError):
        t.at(5)
    assert math.isnan(t.column("bound")[0])
