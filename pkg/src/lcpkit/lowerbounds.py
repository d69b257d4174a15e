"""Worst-case instances for oracle-only methods and exact gap floors.

All three families live on the scaled simplex X_0 = {x >= 0, sum x = D}.
Their objectives are symmetric in the coordinates, so the minimum over the
face spanned by q vertices is attained at the uniform weights. Starting at
D e_1 and talking to an oracle that reveals at most one new vertex per call,
any method's iterate y_k sits in a face of at most k + 1 vertices, which
gives the floor ``f(y_k) - f* >= face_minimum(k + 1) - f*``.

Values (with q vertices in the face):

=============  =================  ==================
family         face minimum       optimum (q = n)
=============  =================  ==================
smooth         L D^2 / (2 q)      L D^2 / (2 n)
nonsmooth      M D / sqrt(q)      M D / sqrt(n)
saddle         M Dt D / sqrt(q)   M Dt D / sqrt(n)
=============  =================  ==================

The saddle family min_x max_{||y|| <= Dt} M <x, y> equals M Dt ||x||_2, so
it reuses the norm machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .algorithms import SolverConfig, smoothing_cndg
from .core import SmoothObjective
from .oracles import ResistingSimplex
from .smoothing import HalfSquaredBall, NonsmoothObjective, SaddleObjective, norm_objective

FAMILIES = ("smooth", "nonsmooth", "saddle")
FLOOR_TOL = 1e-10


class OracleBypassError(RuntimeError):
    """The solver produced iterates without going through the resisting oracle."""


@dataclass(frozen=True)
class HardInstance:
    family: str
    n: int
    L: float = 1.0
    M: float = 1.0
    D: float = 1.0
    dual_radius: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.n < 2:
            raise ValueError("hard instances need n >= 2")
        if min(self.L, self.M, self.D, self.dual_radius) <= 0:
            raise ValueError("instance constants must be positive")

    @property
    def norm_scale(self) -> float:
        """Coefficient c in f = c ||x||_2 for the nonsmooth and saddle families."""
        return self.M * (self.dual_radius if self.family == "saddle" else 1.0)

    @property
    def x_star(self) -> np.ndarray:
        return np.full(self.n, self.D / self.n)

    @property
    def f_star(self) -> float:
        return self.face_value(self.n)

    def face_value(self, q: int) -> float:
        if self.family == "smooth":
            return self.L * self.D ** 2 / (2.0 * q)
        return self.norm_scale * self.D / math.sqrt(q)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.family == "smooth":
            return 0.5 * self.L * float(x @ x)
        return self.norm_scale * float(np.linalg.norm(x))

    def smooth_objective(self) -> SmoothObjective:
        if self.family != "smooth":
            raise ValueError(f"{self.family} instance has no smooth objective")
        L = self.L
        return SmoothObjective(lambda x: 0.5 * L * float(x @ x), lambda x: L * x, lipschitz=L)

    def nonsmooth_objective(self) -> NonsmoothObjective:
        if self.family == "smooth":
            raise ValueError("smooth instance has no nonsmooth form")
        return norm_objective(self.norm_scale)

    def saddle_objective(self) -> SaddleObjective:
        if self.family != "saddle":
            raise ValueError(f"{self.family} instance is not a saddle problem")
        return SaddleObjective(self.M * np.eye(self.n), HalfSquaredBall(self.n, self.dual_radius),
                               a_norm=self.M)

    def domain(self) -> ResistingSimplex:
        """A fresh resisting-oracle simplex (state is per run)."""
        return ResistingSimplex(self.n, self.D)

    def iteration_lower_bound(self, eps: float) -> float:
        """Theoretical minimum iteration count to reach accuracy ``eps``."""
        if eps <= 0:
            raise ValueError("accuracy must be positive")
        dx2 = 2.0 * self.D ** 2  # squared diameter of the scaled simplex
        if self.family == "smooth":
            return math.ceil(min(self.n / 2.0, self.L * dx2 / (4.0 * eps))) - 1
        if self.family == "nonsmooth":
            return 0.25 * min(self.n, self.M ** 2 * dx2 / (2.0 * eps ** 2)) - 1
        dy2 = (2.0 * self.dual_radius) ** 2
        return 0.25 * min(self.n, self.M ** 2 * dx2 * dy2 / (2.0 * eps ** 2)) - 1


def smooth_quadratic(n: int, L: float = 1.0, D: float = 1.0) -> HardInstance:
    return HardInstance("smooth", n, L=L, D=D)


def nonsmooth_norm(n: int, M: float = 1.0, D: float = 1.0) -> HardInstance:
    return HardInstance("nonsmooth", n, M=M, D=D)


def saddle_scaled(n: int, M: float = 1.0, dual_radius: float = 1.0, D: float = 1.0) -> HardInstance:
    return HardInstance("saddle", n, M=M, D=D, dual_radius=dual_radius)


def face_minimum(inst: HardInstance, support: Iterable[int]) -> float:
    """Exact minimum of the instance objective over D conv{e_i : i in support}."""
    idx = set(int(i) for i in support)
    if not idx:
        raise ValueError("support must be non-empty")
    if min(idx) < 0 or max(idx) >= inst.n:
        raise ValueError(f"support indices must lie in [0, {inst.n})")
    return inst.face_value(len(idx))


def gap_floor(inst: HardInstance, k: int, n: Optional[int] = None) -> float:
    """face_minimum at k + 1 vertices minus f*, valid for 1 <= k <= n - 1."""
    n = inst.n if n is None else n
    if n != inst.n:
        raise ValueError(f"dimension {n} does not match instance dimension {inst.n}")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must satisfy 1 <= k <= n-1 = {n - 1}, got {k}")
    return inst.face_value(k + 1) - inst.f_star


def _run_solver(solver: Callable, inst: HardInstance, X: ResistingSimplex, cfg: SolverConfig):
    if solver is smoothing_cndg:
        return solver(inst.saddle_objective(), X, cfg)
    if inst.family == "smooth":
        return solver(inst.smooth_objective(), X, cfg)
    return solver(inst.nonsmooth_objective(), X, cfg)


def certify_floor(solver: Callable, inst: HardInstance, K: int, seed: Optional[int] = None,
                  eps_grid: Optional[Sequence[float]] = None, tol: float = FLOOR_TOL) -> dict:
    """Run ``solver`` for K iterations through the resisting oracle and compare to the floor.

    Returns a JSON-ready report with per-iteration gaps and floors, an
    ``ok`` flag, and, for each accuracy in ``eps_grid``, the first iteration
    whose gap is at most that accuracy next to the theoretical lower bound.
    Raises :class:`OracleBypassError` if the solver's oracle tally and the
    resisting oracle's tally disagree or an iterate leaves the revealed face.
    """
    if not 1 <= K <= inst.n - 1:
        raise ValueError(f"K must satisfy 1 <= K <= n-1 = {inst.n - 1}, got {K}")
    X = inst.domain()
    y0 = np.zeros(inst.n)
    y0[0] = inst.D
    cfg = SolverConfig(max_iterations=K, y0=y0, seed=seed, keep_history=True)
    trace = _run_solver(solver, inst, X, cfg)
    if X.state.calls != trace.oracle_calls or X.state.calls == 0:
        raise OracleBypassError(
            f"solver reported {trace.oracle_calls} oracle calls, resisting oracle saw {X.state.calls}")
    revealed = X.state.returned_support
    f_star = inst.f_star
    rows = []
    ok = True
    for r in trace.records:
        if r.k == 0:
            continue
        h = trace.history[r.k - 1]
        outside = np.flatnonzero(np.abs(h["y"]) > 0)
        if not set(outside.tolist()) <= set(revealed[: r.oracle_calls + 1]):
            raise OracleBypassError(f"iterate {r.k} has support outside the revealed vertices")
        gap = r.objective - f_star
        floor = gap_floor(inst, r.k)
        hold = gap >= floor - tol
        ok &= hold
        rows.append({"k": r.k, "gap": gap, "floor": floor, "holds": bool(hold)})
    gaps = np.array([row["gap"] for row in rows])
    if eps_grid is None:
        eps_grid = [float(g) for g in np.geomspace(max(gaps.min(), 1e-12), gaps.max(), 5)]
    reach = []
    for eps in eps_grid:
        hit = np.flatnonzero(gaps <= eps)
        reach.append({
            "eps": float(eps),
            "first_k": int(rows[hit[0]]["k"]) if hit.size else None,
            "lower_bound": float(inst.iteration_lower_bound(eps)),
        })
    return {
        "family": inst.family,
        "n": inst.n,
        "constants": {"L": inst.L, "M": inst.M, "D": inst.D, "dual_radius": inst.dual_radius},
        "algorithm": trace.algorithm,
        "iterations": K,
        "seed": seed,
        "f_star": f_star,
        "ok": bool(ok),
        "revealed_vertices": len(set(revealed)),
        "per_iteration": rows,
        "accuracy_reach": reach,
    }
