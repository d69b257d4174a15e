"""Feasible sets and their exact linear minimization oracles.

Every oracle breaks ties toward the lowest index so that runs are
reproducible. Sets are described by small frozen dataclasses; the stateful
adversarial oracle used by the lower-bound constructions lives in
:class:`ResistingOracleState` / :class:`ResistingSimplex`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9


class UnsupportedDomainError(ValueError):
    """Raised when an operation is not available for a feasible-set variant."""


def _check_vector(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("direction must be a non-empty vector")
    if not np.all(np.isfinite(p)):
        raise ValueError("direction has non-finite entries")
    return p


def lmo_simplex(p, D: float = 1.0) -> np.ndarray:
    """D * e_i for the lowest index i attaining min_i p_i."""
    p = _check_vector(p)
    if D <= 0:
        raise ValueError("simplex scale must be positive")
    x = np.zeros_like(p)
    x[int(np.argmin(p))] = D
    return x


def _smallest_eigvec(P: np.ndarray) -> tuple[float, np.ndarray]:
    w, V = np.linalg.eigh(P)
    v = V[:, 0].copy()
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return float(w[0]), v


def lmo_spectrahedron(P) -> np.ndarray:
    """v v^T for a unit eigenvector v of the smallest eigenvalue of sym(P)."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("spectrahedron direction must be a square matrix")
    if not np.all(np.isfinite(P)):
        raise ValueError("direction has non-finite entries")
    _, v = _smallest_eigvec(0.5 * (P + P.T))
    return np.outer(v, v)


def lmo_hypercube(p) -> np.ndarray:
    p = _check_vector(p)
    return (p < 0).astype(float)


def _greedy_box_knapsack(p: np.ndarray, lo: np.ndarray, hi: np.ndarray, budget: float) -> np.ndarray:
    # fractional knapsack: start at the lower corner, raise the most negative
    # coordinates first until the budget on sum(x) is used up
    x = lo.copy()
    room = budget - float(lo.sum())
    for i in np.argsort(p, kind="stable"):
        if p[i] >= 0 or room <= 0:
            break
        inc = min(hi[i] - lo[i], room)
        x[i] += inc
        room -= inc
    return x


def lmo_knapsack_box(p, r: float) -> np.ndarray:
    """Minimize <p, x> over {x in [0,1]^n : sum(x) <= r n}."""
    p = _check_vector(p)
    if not 0.0 < r <= 1.0:
        raise ValueError(f"knapsack ratio must lie in (0, 1], got {r}")
    n = p.size
    return _greedy_box_knapsack(p, np.zeros(n), np.ones(n), r * n)


@dataclass(frozen=True)
class FeasibleSet:
    """Base class; subclasses provide ``lmo``, ``diameter`` and ``residual``."""

    @property
    def shape(self) -> tuple:
        raise NotImplementedError

    def lmo(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def residual(self, x: np.ndarray) -> float:
        """Largest constraint violation of x (0 when feasible)."""
        raise NotImplementedError

    def contains(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        return self.residual(x) <= tol

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def default_start(self) -> np.ndarray:
        """Deterministic vertex: the oracle answer for the all-ones direction."""
        return self.lmo(np.ones(self.shape))


@dataclass(frozen=True)
class ScaledSimplex(FeasibleSet):
    n: int
    D: float = 1.0

    @property
    def shape(self):
        return (self.n,)

    def lmo(self, p):
        return lmo_simplex(p, self.D)

    def diameter(self):
        return self.D * math.sqrt(2.0)

    def residual(self, x):
        x = np.asarray(x, dtype=float)
        return max(abs(float(x.sum()) - self.D), float(max(0.0, -x.min())))

    def random_point(self, rng):
        e = rng.exponential(size=self.n)
        return self.D * e / e.sum()


@dataclass(frozen=True)
class StandardSimplex(ScaledSimplex):
    D: float = field(default=1.0, init=False)


@dataclass(frozen=True)
class Spectrahedron(FeasibleSet):
    n: int

    @property
    def shape(self):
        return (self.n, self.n)

    def lmo(self, P):
        return lmo_spectrahedron(P)

    def diameter(self):
        return math.sqrt(2.0)

    def residual(self, x):
        x = np.asarray(x, dtype=float)
        asym = float(np.abs(x - x.T).max())
        lam = float(np.linalg.eigvalsh(0.5 * (x + x.T))[0])
        return max(abs(float(np.trace(x)) - 1.0), max(0.0, -lam), asym)

    def random_point(self, rng):
        G = rng.standard_normal((self.n, self.n))
        S = G @ G.T
        return S / np.trace(S)


@dataclass(frozen=True)
class Hypercube(FeasibleSet):
    n: int

    @property
    def shape(self):
        return (self.n,)

    def lmo(self, p):
        return lmo_hypercube(p)

    def diameter(self):
        return math.sqrt(self.n)

    def linf_diameter(self) -> float:
        return 1.0

    def residual(self, x):
        x = np.asarray(x, dtype=float)
        return float(max(0.0, -x.min(), x.max() - 1.0))

    def random_point(self, rng):
        return rng.uniform(0.0, 1.0, self.n)


@dataclass(frozen=True)
class KnapsackBox(FeasibleSet):
    n: int
    r: float

    def __post_init__(self):
        if not 0.0 < self.r <= 1.0:
            raise ValueError(f"knapsack ratio must lie in (0, 1], got {self.r}")

    @property
    def shape(self):
        return (self.n,)

    @property
    def budget(self) -> float:
        return self.r * self.n

    def lmo(self, p):
        return lmo_knapsack_box(p, self.r)

    def diameter(self):
        # exact when the budget is at most n/2; sqrt(n) is an upper bound beyond
        if self.budget <= self.n / 2:
            return min(math.sqrt(self.n), math.sqrt(2.0 * self.budget))
        return math.sqrt(self.n)

    def linf_diameter(self) -> float:
        return 1.0

    def residual(self, x):
        x = np.asarray(x, dtype=float)
        return float(max(0.0, -x.min(), x.max() - 1.0, float(x.sum()) - self.budget))

    def random_point(self, rng):
        x = rng.uniform(0.0, 1.0, self.n)
        s = float(x.sum())
        if s > self.budget:
            x *= self.budget / s
        return x


@dataclass(frozen=True)
class EuclideanBall(FeasibleSet):
    center: tuple
    radius: float

    @property
    def shape(self):
        return (len(self.center),)

    def lmo(self, p):
        p = _check_vector(p)
        c = np.asarray(self.center, dtype=float)
        nrm = np.linalg.norm(p)
        if nrm == 0.0:
            d = np.zeros_like(c)
            d[0] = 1.0
            return c - self.radius * d
        return c - self.radius * p / nrm

    def diameter(self):
        return 2.0 * self.radius

    def residual(self, x):
        c = np.asarray(self.center, dtype=float)
        return float(max(0.0, np.linalg.norm(np.asarray(x) - c) - self.radius))

    def random_point(self, rng):
        from .smoothing import sample_ball

        return np.asarray(self.center, dtype=float) + self.radius * sample_ball(len(self.center), rng)


def enhanced_lmo(p, x0, R: float, feasible_set: FeasibleSet) -> np.ndarray:
    """Minimize <p, x> over X intersected with the l_inf ball of radius R around x0."""
    if not isinstance(feasible_set, (Hypercube, KnapsackBox)):
        raise UnsupportedDomainError(
            f"enhanced oracle is only available for Hypercube and KnapsackBox, "
            f"not {type(feasible_set).__name__}")
    if R <= 0:
        raise ValueError("ball radius must be positive")
    p = _check_vector(p)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != p.shape:
        raise ValueError("x0 and p have different shapes")
    lo = np.maximum(0.0, x0 - R)
    hi = np.minimum(1.0, x0 + R)
    if isinstance(feasible_set, Hypercube):
        return np.where(p < 0, hi, lo)
    return _greedy_box_knapsack(p, lo, hi, feasible_set.budget)


@dataclass
class ResistingOracleState:
    """Adversarial simplex oracle state: which vertices have been revealed so far.

    The initial point D e_1 counts as revealed, so ``returned_support`` starts
    as ``[0]`` (0-based indices).
    """

    n: int
    D: float = 1.0
    returned_support: list = field(default_factory=lambda: [0])
    calls: int = 0


def resisting_lmo(state: ResistingOracleState, p) -> np.ndarray:
    """D e_j with j among the minimizers of p, preferring indices not yet revealed."""
    p = _check_vector(p)
    if p.size != state.n:
        raise ValueError(f"direction has dimension {p.size}, oracle expects {state.n}")
    ties = np.flatnonzero(p == p.min())
    seen = set(state.returned_support)
    fresh = [int(j) for j in ties if int(j) not in seen]
    j = fresh[0] if fresh else int(ties[0])
    if j not in seen:
        state.returned_support.append(j)
    state.calls += 1
    x = np.zeros(state.n)
    x[j] = state.D
    return x


class ResistingSimplex(ScaledSimplex):
    """Scaled simplex whose oracle is the resisting one; not thread-safe."""

    def __init__(self, n: int, D: float = 1.0):
        super().__init__(n, D)
        object.__setattr__(self, "state", ResistingOracleState(n, D))

    def lmo(self, p):
        return resisting_lmo(self.state, p)

    def default_start(self):
        x = np.zeros(self.n)
        x[0] = self.D
        return x


def diameter(feasible_set: FeasibleSet) -> float:
    """Euclidean (Frobenius for matrices) diameter of the set."""
    return feasible_set.diameter()
