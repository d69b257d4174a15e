"""Smoothing for nonsmooth objectives.

Two devices live here:

* Nesterov-style smoothing of ``f(x) = max_{y in Y} <A x, y>`` with a strongly
  convex prox term on the dual set, for which both supported prox setups
  (entropy on the simplex, half squared norm on a ball) have closed-form
  maximizers;
* convolution smoothing ``f_u(x) = E f(x + u xi)`` with ``xi`` uniform on the
  unit Euclidean ball, estimated by averaging sampled subgradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import logsumexp, softmax

from .core import spectral_norm


class EntropySimplex:
    """Entropy prox on the probability simplex of dimension m (sigma = 1 w.r.t. l1)."""

    sigma = 1.0

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("dual dimension must be positive")
        self.m = m
        self.center = np.full(m, 1.0 / m)
        self.d_squared = math.log(m)

    def bregman(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        pos = y > 0
        return float(np.sum(y[pos] * np.log(y[pos]))) + math.log(self.m)

    def maximize(self, u: np.ndarray, eta: float) -> tuple[np.ndarray, float]:
        """argmax and max of <u, y> - eta [V(y) - D^2] over the simplex."""
        z = u / eta
        y = softmax(z)
        # <u,y> - eta*sum y log y = eta*logsumexp(u/eta) - eta*log m; the
        # +eta*D^2 shift cancels the log m
        return y, float(eta * logsumexp(z))

    def support(self, u: np.ndarray) -> tuple[np.ndarray, float]:
        """Maximizer and value of <u, y> over the simplex (linear oracle)."""
        i = int(np.argmax(u))
        y = np.zeros_like(u)
        y[i] = 1.0
        return y, float(u[i])

    def contains(self, y, tol=1e-9) -> bool:
        return abs(float(np.sum(y)) - 1.0) <= tol and float(np.min(y)) >= -tol


class HalfSquaredBall:
    """Prox v(y) = ||y||^2 / 2 on the Euclidean ball (sigma = 1 w.r.t. l2)."""

    sigma = 1.0

    def __init__(self, m: int, radius: float = 1.0, center: Optional[np.ndarray] = None):
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        self.m = m
        self.radius = float(radius)
        self.center = np.zeros(m) if center is None else np.asarray(center, dtype=float)
        self.d_squared = 0.5 * self.radius ** 2

    def bregman(self, y: np.ndarray) -> float:
        d = np.asarray(y, dtype=float) - self.center
        return 0.5 * float(d @ d)

    def maximize(self, u: np.ndarray, eta: float) -> tuple[np.ndarray, float]:
        nu = float(np.linalg.norm(u))
        if nu <= eta * self.radius:
            w = u / eta
        else:
            w = self.radius * u / nu
        y = self.center + w
        val = float(u @ y) - eta * (0.5 * float(w @ w) - self.d_squared)
        return y, val

    def support(self, u: np.ndarray) -> tuple[np.ndarray, float]:
        nu = float(np.linalg.norm(u))
        w = np.zeros_like(u) if nu == 0.0 else self.radius * u / nu
        return self.center + w, float(u @ self.center) + self.radius * nu

    def contains(self, y, tol=1e-9) -> bool:
        return float(np.linalg.norm(np.asarray(y) - self.center)) <= self.radius + tol


ProxSetup = EntropySimplex | HalfSquaredBall


class SaddleObjective:
    """f(x) = max_{y in Y} <A x, y> for a dual set Y carried by ``prox``.

    Only the matrix-game case (no dual penalty term) is supported.
    """

    def __init__(self, A, prox, a_norm: Optional[float] = None):
        self.A = np.asarray(A, dtype=float)
        if self.A.shape[0] != prox.m:
            raise ValueError("rows of A must match the dual dimension")
        self.prox = prox
        self.a_norm = spectral_norm(self.A) if a_norm is None else float(a_norm)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def value(self, x: np.ndarray) -> float:
        return self.prox.support(self.A @ x)[1]

    def subgrad(self, x: np.ndarray) -> np.ndarray:
        return self.A.T @ self.prox.support(self.A @ x)[0]

    def smoothed(self, x: np.ndarray, eta: float):
        return smoothed_value_grad(self, x, eta)

    def lipschitz(self) -> float:
        """Lipschitz constant of f itself, ||A|| times the dual radius."""
        if isinstance(self.prox, HalfSquaredBall):
            return self.a_norm * (self.prox.radius + float(np.linalg.norm(self.prox.center)))
        return self.a_norm


def matrix_game(m: int, n: int, prox: str = "ball", seed: int = 0) -> SaddleObjective:
    """Random game with entries uniform on [-1, 1]; dual set is the simplex or the unit ball."""
    rng = np.random.Generator(np.random.Philox(seed))
    A = rng.uniform(-1.0, 1.0, (m, n))
    if prox == "entropy":
        return SaddleObjective(A, EntropySimplex(m))
    if prox == "ball":
        return SaddleObjective(A, HalfSquaredBall(m))
    raise ValueError(f"unknown prox setup {prox!r}")


def game_value(s: SaddleObjective) -> float:
    """min over the probability simplex of f, solved to high accuracy.

    Entropy (simplex dual): the LP min t s.t. A x <= t, sum x = 1, x >= 0.
    Ball dual: f(x) = <A x, c> + rho ||A x||, minimized by SLSQP.
    """
    m, n = s.A.shape
    if isinstance(s.prox, EntropySimplex):
        c = np.r_[np.zeros(n), 1.0]
        A_ub = np.hstack([s.A, -np.ones((m, 1))])
        A_eq = np.r_[np.ones(n), 0.0][None, :]
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=[1.0],
                      bounds=[(0, None)] * n + [(None, None)], method="highs")
        if not res.success:
            raise RuntimeError(f"LP for the game value failed: {res.message}")
        return float(res.fun)
    c, rho = s.prox.center, s.prox.radius

    def fun(x):
        u = s.A @ x
        nu = np.linalg.norm(u)
        g = s.A.T @ (c + (rho * u / nu if nu > 0 else 0.0))
        return float(u @ c + rho * nu), g

    x0 = np.full(n, 1.0 / n)
    res = minimize(fun, x0, jac=True, method="SLSQP", bounds=[(0, 1)] * n,
                   constraints=[{"type": "eq", "fun": lambda x: x.sum() - 1.0,
                                 "jac": lambda x: np.ones(n)}],
                   options={"ftol": 1e-15, "maxiter": 1000})
    x = np.clip(res.x, 0.0, None)
    return s.value(x / x.sum())


def smoothed_value_grad(s: SaddleObjective, x: np.ndarray, eta: float):
    """Value, gradient and dual maximizer of the smoothed objective f_eta at x."""
    if eta <= 0:
        raise ValueError(f"smoothing parameter must be positive, got {eta}")
    u = s.A @ x
    y, val = s.prox.maximize(u, eta)
    return val, s.A.T @ y, y


def eta_schedule(k: int, a_norm: float, d_x: float, d_yv: float, sigma_v: float = 1.0) -> float:
    """||A|| D_X / (D_{Y,V} sqrt(sigma_v k)); non-increasing in k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if d_yv <= 0:
        raise ValueError("prox diameter must be positive")
    if a_norm <= 0 or d_x <= 0 or sigma_v <= 0:
        raise ValueError("schedule parameters must be positive")
    return a_norm * d_x / (d_yv * math.sqrt(sigma_v * k))


def sandwich_check(s: SaddleObjective, x: np.ndarray, eta: float) -> tuple[float, float]:
    """Return (f(x), f_eta(x)); the caller checks f <= f_eta <= f + eta D^2."""
    return s.value(x), smoothed_value_grad(s, x, eta)[0]


def sample_ball(n: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Uniform draw(s) from the unit Euclidean ball in R^n."""
    if n < 1:
        raise ValueError("dimension must be positive")
    shape = (n,) if size is None else (size, n)
    g = rng.standard_normal(shape)
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    radius = rng.uniform(0.0, 1.0, shape[:-1]) ** (1.0 / n)
    return g * np.asarray(radius)[..., None]


@dataclass
class NonsmoothObjective:
    """M-Lipschitz convex function given by value and subgradient oracles.

    ``subgrad_batch``, when given, maps a (T, n) array of points to a (T, n)
    array of subgradients; ``value_batch`` likewise returns T values.
    """

    value: Callable
    subgrad: Callable
    lipschitz: float
    subgrad_batch: Optional[Callable] = None
    value_batch: Optional[Callable] = None

    def subgrads(self, pts: np.ndarray) -> np.ndarray:
        if self.subgrad_batch is not None:
            return self.subgrad_batch(pts)
        return np.stack([self.subgrad(p) for p in pts])

    def values(self, pts: np.ndarray) -> np.ndarray:
        if self.value_batch is not None:
            return self.value_batch(pts)
        return np.array([self.value(p) for p in pts])


def norm_objective(M: float = 1.0) -> NonsmoothObjective:
    """f(x) = M ||x||_2."""

    def subgrad_batch(P):
        nrm = np.linalg.norm(P, axis=-1, keepdims=True)
        return M * np.divide(P, nrm, out=np.zeros_like(P), where=nrm > 0)

    return NonsmoothObjective(
        value=lambda x: M * float(np.linalg.norm(x)),
        subgrad=lambda x: subgrad_batch(np.asarray(x)[None, :])[0],
        lipschitz=M,
        subgrad_batch=subgrad_batch,
        value_batch=lambda P: M * np.linalg.norm(P, axis=-1),
    )


def saddle_as_nonsmooth(s: SaddleObjective) -> NonsmoothObjective:
    """View a matrix game as a plain nonsmooth objective (dual side by linear oracle)."""
    return NonsmoothObjective(value=s.value, subgrad=s.subgrad, lipschitz=s.lipschitz())


@dataclass
class RandomizedSmoother:
    """Radius and a reusable cache of unit-ball samples.

    With ``fresh=True`` every request draws new samples instead of reusing the
    cached prefix.
    """

    u: float
    n: int
    rng_seed: int = 0
    fresh: bool = False
    _cache: np.ndarray = field(default=None, repr=False)
    _rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self.u <= 0:
            raise ValueError("smoothing radius must be positive")
        self._rng = np.random.Generator(np.random.Philox(self.rng_seed))
        self._cache = np.empty((0, self.n))

    @property
    def sample_cache(self) -> np.ndarray:
        return self._cache

    def samples(self, T: int) -> np.ndarray:
        if self.fresh:
            return sample_ball(self.n, self._rng, size=T)
        if T > len(self._cache):
            extra = sample_ball(self.n, self._rng, size=T - len(self._cache))
            self._cache = np.vstack([self._cache, extra])
        return self._cache[:T]


def randomized_grad(f_subgrad, y: np.ndarray, u: float, T: int,
                    smoother: RandomizedSmoother) -> np.ndarray:
    """Average of f'(y + u xi_t) over the first T samples of the smoother.

    ``f_subgrad`` is either a :class:`NonsmoothObjective` or a plain
    single-point subgradient callable.
    """
    if T < 1:
        raise ValueError("sample count must be >= 1")
    if u <= 0:
        raise ValueError("smoothing radius must be positive")
    pts = y[None, :] + u * smoother.samples(T)
    if isinstance(f_subgrad, NonsmoothObjective):
        G = f_subgrad.subgrads(pts)
    else:
        G = np.stack([f_subgrad(p) for p in pts])
    return G.mean(axis=0)


def u_schedule(k: int, n: int, d_x: float) -> tuple[int, float]:
    """Sample count T_k = k and radius n^{1/4} D_X / sqrt(k)."""
    if k < 1 or n < 1 or d_x <= 0:
        raise ValueError("schedule parameters must be positive")
    return k, n ** 0.25 * d_x / math.sqrt(k)
