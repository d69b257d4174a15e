"""Shared numerical pieces: objectives, stepsizes, traces and the Wolfe gap."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

GOLDEN_TOL = 1e-10
POWER_TOL = 1e-8
POWER_MAXITER = 1000


def gamma(k: int) -> float:
    """Open-loop weight 2/(k+1)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 2.0 / (k + 1)


def big_gamma(k: int) -> float:
    """Closed form of the product prod_{i=2..k} (1 - gamma(i)), i.e. 2/(k(k+1))."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 2.0 / (k * (k + 1))


def unroll_recursion(delta0: float, gammas: Sequence[float], bs: Sequence[float]) -> float:
    """Upper bound on Delta_k for any sequence with Delta_i <= (1-g_i) Delta_{i-1} + B_i.

    Returns ``G_k (1 - g_1) delta0 + G_k * sum_i B_i / G_i`` where G is built
    from the product recursion G_1 = 1, G_i = (1 - g_i) G_{i-1}.
    """
    if len(gammas) != len(bs) or len(gammas) == 0:
        raise ValueError("gammas and bs must be non-empty and of equal length")
    if not 0.0 < gammas[0] <= 1.0:
        raise ValueError(f"first gamma must lie in (0, 1], got {gammas[0]}")
    for g in gammas[1:]:
        if not 0.0 < g < 1.0:
            raise ValueError(f"later gamma values must lie in (0, 1), got {g}")
    Gs = [1.0]
    for g in gammas[1:]:
        Gs.append((1.0 - g) * Gs[-1])
    Gk = Gs[-1]
    acc = sum(b / G for b, G in zip(bs, Gs))
    return Gk * (1.0 - gammas[0]) * delta0 + Gk * acc


def inner(a: np.ndarray, b: np.ndarray) -> float:
    # works for vectors and matrices alike (Frobenius for the latter)
    return float(np.vdot(a, b))


def sqnorm(a: np.ndarray) -> float:
    return float(np.vdot(a, a))


def golden_section(phi: Callable[[float], float], lo: float = 0.0, hi: float = 1.0,
                   tol: float = GOLDEN_TOL) -> float:
    """Minimize a unimodal scalar function on [lo, hi]; endpoints are compared at the end."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = phi(c), phi(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = phi(d)
    best = 0.5 * (a + b)
    cands = [(phi(best), best), (phi(lo), lo), (phi(hi), hi)]
    return min(cands)[1]


def top_eigenvalue_gram(A, tol: float = POWER_TOL, maxiter: int = POWER_MAXITER) -> float:
    """Largest eigenvalue of A^T A by power iteration (A dense, sparse or LinearOperator)."""
    n = A.shape[1]
    rng = np.random.Generator(np.random.Philox(0))
    v = np.abs(rng.standard_normal(n)) + 1.0
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        w = A.T @ (A @ v)
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        lam = new
    return lam


def spectral_norm(A) -> float:
    return math.sqrt(max(top_eigenvalue_gram(A), 0.0))


class SmoothObjective:
    """A differentiable convex objective with known gradient Lipschitz constant.

    ``value`` and ``grad`` accept arrays of any shape (matrices for the
    spectrahedron). ``linesearch(y, x)`` returns argmin over alpha in [0, 1] of
    f((1-alpha) y + alpha x); without an exact hook it falls back to golden
    section search.
    """

    def __init__(self, value: Callable, grad: Callable, lipschitz: float,
                 strong_convexity: float = 0.0, linesearch: Optional[Callable] = None):
        if lipschitz < 0 or strong_convexity < 0:
            raise ValueError("lipschitz and strong_convexity must be non-negative")
        self._value = value
        self._grad = grad
        self._linesearch = linesearch
        self.lipschitz = float(lipschitz)
        self.strong_convexity = float(strong_convexity)

    def value(self, x: np.ndarray) -> float:
        return float(self._value(x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self._grad(x)

    def linearization(self, x: np.ndarray, y: np.ndarray) -> float:
        """l_f(x; y) = f(x) + <f'(x), y - x>."""
        return self.value(x) + inner(self.grad(x), y - x)

    def linesearch(self, y: np.ndarray, x: np.ndarray) -> float:
        if self._linesearch is not None:
            return float(self._linesearch(y, x))
        d = x - y
        return golden_section(lambda a: self.value(y + a * d))


class QuadraticObjective(SmoothObjective):
    """f(x) = ||A x - b||_2^2 with A acting on the flattened iterate."""

    def __init__(self, A, b: np.ndarray, lipschitz: Optional[float] = None,
                 strong_convexity: float = 0.0):
        self.A = sp.csr_matrix(A) if sp.issparse(A) else np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b have incompatible shapes")
        L = 2.0 * top_eigenvalue_gram(self.A) if lipschitz is None else lipschitz
        super().__init__(self.value, self.grad, L, strong_convexity)

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x.ravel() - self.b

    def value(self, x: np.ndarray) -> float:
        r = self.residual(x)
        return float(r @ r)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return (2.0 * (self.A.T @ self.residual(x))).reshape(x.shape)

    def linesearch(self, y: np.ndarray, x: np.ndarray) -> float:
        r = self.residual(y)
        Ad = self.A @ (y - x).ravel()
        den = float(Ad @ Ad)
        if den == 0.0:
            return 0.0
        return min(max(float(r @ Ad) / den, 0.0), 1.0)

    def gram_min_eigenvalue(self) -> float:
        """2 * lambda_min(A^T A), the modulus of strong convexity (0 if m < n)."""
        m, n = self.A.shape
        if m < n:
            return 0.0
        dense = self.A.toarray() if sp.issparse(self.A) else self.A
        return 2.0 * max(float(np.linalg.eigvalsh(dense.T @ dense)[0]), 0.0)


class StepSchedule(enum.Enum):
    OPEN_LOOP = "open"
    LINE_SEARCH = "linesearch"

    def step(self, k: int, objective, y: np.ndarray, x: np.ndarray) -> float:
        if self is StepSchedule.OPEN_LOOP:
            return gamma(k)
        return objective.linesearch(y, x)


@dataclass
class IterationRecord:
    k: int
    objective: float
    oracle_calls: int
    elapsed: float
    wolfe_gap: Optional[float] = None
    dual_bound: Optional[float] = None
    step: Optional[float] = None
    bound: Optional[float] = None


@dataclass
class IterationTrace:
    algorithm: str
    records: list = field(default_factory=list)
    final_iterate: Optional[np.ndarray] = None
    oracle_calls: int = 0
    wolfe_calls: int = 0
    history: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def at(self, k: int) -> IterationRecord:
        for r in self.records:
            if r.k == k:
                return r
        raise KeyError(k)

    def violations(self, f_star: float, tol: float = 1e-8) -> list:
        """Iteration indices whose gap exceeds the solver's certificate.

        When a record carries a lower bound on f*, the certificate is read as
        ``objective - dual_bound <= bound`` and the lower bound must not
        exceed ``f_star``; otherwise ``objective - f_star <= bound``. Pass
        ``f_star=None`` to check only the self-contained primal-dual form.
        """
        bad = []
        for r in self.records:
            if r.dual_bound is not None:
                ok = r.bound is None or r.objective - r.dual_bound <= r.bound + tol
                ok = ok and (f_star is None or r.dual_bound <= f_star + tol)
            else:
                ok = r.bound is None or f_star is None or r.objective - f_star <= r.bound + tol
            if not ok:
                bad.append(r.k)
        return bad

    def to_dict(self, include_iterate: bool = True) -> dict:
        out = {
            "algorithm": self.algorithm,
            "oracle_calls": self.oracle_calls,
            "wolfe_calls": self.wolfe_calls,
            "meta": _jsonable(self.meta),
            "records": [asdict(r) for r in self.records],
        }
        if include_iterate and self.final_iterate is not None:
            out["final_iterate"] = np.asarray(self.final_iterate).tolist()
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def wolfe_gap(obj: SmoothObjective, feasible_set, y: np.ndarray) -> float:
    """max over x in X of <f'(y), y - x>, computed with one oracle call."""
    g = obj.grad(y)
    if g.shape != y.shape:
        raise ValueError(f"gradient shape {g.shape} does not match point shape {y.shape}")
    x = feasible_set.lmo(g)
    return inner(g, y - x)
