import math
import warnings

import numpy as np
import pytest
from scipy.optimize import minimize

from lcpkit.smoothing import (EntropySimplex, HalfSquaredBall, RandomizedSmoother, SaddleObjective,
                              eta_schedule, game_value, matrix_game, norm_objective,
                              randomized_grad, sample_ball, sandwich_check, saddle_as_nonsmooth,
                              smoothed_value_grad, u_schedule)


def brute_maximize(prox, u, eta):
    """Direct SLSQP maximization of <u, y> - eta [V(y) - D^2] over the dual set."""
    m = u.size
    def neg(y):
        return -(u @ y - eta * (prox.bregman(y) - prox.d_squared))
    if isinstance(prox, EntropySimplex):
        cons = [{"type": "eq", "fun": lambda y: y.sum() - 1}]
        bounds = [(1e-300, 1)] * m
    else:
        cons = [{"type": "ineq", "fun": lambda y: prox.radius ** 2 - np.sum((y - prox.center) ** 2)}]
        bounds = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(neg, prox.center + 0.0, method="SLSQP", bounds=bounds, constraints=cons,
                       options={"ftol": 1e-14, "maxiter": 500})
    return -res.fun


@pytest.mark.parametrize("prox", [EntropySimplex(6), HalfSquaredBall(6, radius=1.5)])
@pytest.mark.parametrize("eta", [0.05, 0.5, 5.0])
def test_closed_form_maximizer_matches_numeric(prox, eta, rng):
    for _ in range(3):
        u = rng.standard_normal(6)
        y, val = prox.maximize(u, eta)
        assert prox.contains(y)
        assert val == pytest.approx(u @ y - eta * (prox.bregman(y) - prox.d_squared), abs=1e-10)
        assert val >= brute_maximize(prox, u, eta) - 1e-7


def test_zero_matrix_gives_constant_smoothing():
    s = SaddleObjective(np.zeros((4, 3)), EntropySimplex(4))
    x = np.array([0.2, 0.3, 0.5])
    assert s.value(x) == 0.0
    val, g, _ = smoothed_value_grad(s, x, 0.7)
    assert val == pytest.approx(0.7 * math.log(4))
    assert np.allclose(g, 0)


def test_entropy_prox_constants():
    p = EntropySimplex(8)
    assert p.d_squared == pytest.approx(math.log(8))
    assert p.bregman(p.center) == pytest.approx(0.0, abs=1e-12)
    assert p.bregman(np.eye(8)[0]) == pytest.approx(math.log(8))


@pytest.mark.parametrize("prox_name", ["entropy", "ball"])
def test_smoothed_gradient_is_finite_difference(prox_name, rng):
    s = matrix_game(7, 5, prox_name, seed=3)
    x = rng.dirichlet(np.ones(5))
    eta = 0.3
    _, g, _ = smoothed_value_grad(s, x, eta)
    h = 1e-6
    num = [(smoothed_value_grad(s, x + h * e, eta)[0] - smoothed_value_grad(s, x - h * e, eta)[0]) / (2 * h)
           for e in np.eye(5)]
    assert np.allclose(g, num, atol=1e-6)


@pytest.mark.parametrize("prox_name", ["entropy", "ball"])
def test_smoothed_gradient_lipschitz_constant(prox_name, rng):
    s = matrix_game(6, 6, prox_name, seed=1)
    eta = 0.2
    # spectral norm dominates the l2 -> l_inf norm used on the entropy side
    L = s.a_norm ** 2 / (eta * s.prox.sigma)
    for _ in range(50):
        x1, x2 = rng.standard_normal(6), rng.standard_normal(6)
        g1 = smoothed_value_grad(s, x1, eta)[1]
        g2 = smoothed_value_grad(s, x2, eta)[1]
        assert np.linalg.norm(g1 - g2) <= L * np.linalg.norm(x1 - x2) + 1e-10


def test_sandwich_helper():
    s = matrix_game(5, 5, "ball", 0)
    f, fe = sandwich_check(s, np.full(5, 0.2), 0.1)
    assert f <= fe <= f + 0.1 * s.prox.d_squared + 1e-12


def test_eta_schedule():
    assert eta_schedule(4, 2.0, 1.0, 0.5) == pytest.approx(2.0)
    vals = [eta_schedule(k, 1.0, 1.0, 1.0) for k in range(1, 50)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    for bad in [(0, 1, 1, 1), (1, 1, 1, 0), (1, 0, 1, 1)]:
        with pytest.raises(ValueError):
            eta_schedule(*bad)


def test_ball_prox_validation():
    with pytest.raises(ValueError):
        HalfSquaredBall(3, radius=0)
    with pytest.raises(ValueError):
        SaddleObjective(np.ones((3, 2)), EntropySimplex(4))
    with pytest.raises(ValueError):
        smoothed_value_grad(matrix_game(2, 2), np.ones(2) / 2, 0.0)
    with pytest.raises(ValueError):
        matrix_game(2, 2, "nope")


def test_sample_ball_is_uniform(rng):
    n = 5
    xi = sample_ball(n, rng, size=200_000)
    r = np.linalg.norm(xi, axis=1)
    assert r.max() <= 1.0
    # radial law P(||xi|| <= t) = t^n
    for t in (0.5, 0.8, 0.95):
        assert np.mean(r <= t) == pytest.approx(t ** n, abs=4 * math.sqrt(t ** n * (1 - t ** n) / r.size))
    assert np.abs(xi.mean(0)).max() < 4 * math.sqrt(1 / (n + 2) / r.size)
    assert np.mean(r ** 2) == pytest.approx(n / (n + 2), rel=1e-2)
    assert sample_ball(3, rng).shape == (3,)


def test_smoother_cache_recycles_prefix():
    sm = RandomizedSmoother(u=0.5, n=4, rng_seed=9)
    a = sm.samples(3).copy()
    b = sm.samples(5)
    assert np.array_equal(b[:3], a)
    assert len(sm.sample_cache) == 5
    fresh = RandomizedSmoother(u=0.5, n=4, rng_seed=9, fresh=True)
    assert not np.array_equal(fresh.samples(3), fresh.samples(3))
    with pytest.raises(ValueError):
        RandomizedSmoother(u=0.0, n=3)


def test_randomized_grad_accepts_callable():
    f = norm_objective(2.0)
    sm1 = RandomizedSmoother(u=0.1, n=3, rng_seed=1)
    sm2 = RandomizedSmoother(u=0.1, n=3, rng_seed=1)
    y = np.array([1.0, -2.0, 0.5])
    assert np.allclose(randomized_grad(f, y, 0.1, 7, sm1), randomized_grad(f.subgrad, y, 0.1, 7, sm2))
    with pytest.raises(ValueError):
        randomized_grad(f, y, 0.1, 0, sm1)


def test_u_schedule():
    T, u = u_schedule(4, 16, 2.0)
    assert T == 4 and u == pytest.approx(2.0)
    with pytest.raises(ValueError):
        u_schedule(0, 4, 1.0)


def test_game_value_lp_and_ball(rng):
    s = matrix_game(6, 4, "entropy", 2)
    v = game_value(s)
    # no point on a fine random cloud beats the LP value; vertices included
    pts = np.vstack([rng.dirichlet(np.ones(4) * 0.3, 20000), np.eye(4)])
    vals = (s.A @ pts.T).max(0)
    assert vals.min() >= v - 1e-9
    assert vals.min() <= v + 0.05
    sb = matrix_game(6, 4, "ball", 2)
    vb = game_value(sb)
    vals = np.linalg.norm(sb.A @ pts.T, axis=0)
    assert vals.min() >= vb - 1e-9


def test_saddle_nonsmooth_view(rng):
    s = matrix_game(5, 4, "entropy", 0)
    f = saddle_as_nonsmooth(s)
    x = rng.standard_normal(4)
    assert f.value(x) == s.value(x)
    assert np.allclose(f.subgrad(x), s.subgrad(x))
    assert f.lipschitz == pytest.approx(s.a_norm)
    assert np.allclose(f.values(x[None, :]), [s.value(x)])
