"""Conditional gradient solvers driven only by linear minimization oracles.

All solvers share the same skeleton: a sequence of oracle calls ``x_k =
LMO(p_k)`` followed by the convex-combination update ``y_k = (1 - a_k)
y_{k-1} + a_k x_k``. They differ in how the oracle input ``p_k`` is formed:

=================  ============================================================
``cndg``           gradient at the previous iterate
``pa_cndg``        gradient at a sliding average of the oracle outputs
``pda_cndg``       running weighted average of those gradients; also yields a
                   lower bound on the optimal value
``smoothing_cndg`` gradient of a smoothed max-type objective
``randomized_cndg`` averaged subgradients at randomly perturbed points
``shrinking_cndg`` classic steps inside a shrinking l_inf ball (enhanced oracle)
=================  ============================================================

Each returns an :class:`~lcpkit.core.IterationTrace` whose ``bound`` column
holds the right-hand side of the solver's convergence certificate.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (IterationRecord, IterationTrace, SmoothObjective, StepSchedule,
                   golden_section, inner, sqnorm, wolfe_gap)
from .oracles import (FEAS_TOL, FeasibleSet, Hypercube, KnapsackBox,
                      UnsupportedDomainError, enhanced_lmo)
from .smoothing import (NonsmoothObjective, RandomizedSmoother, SaddleObjective,
                        eta_schedule, randomized_grad, smoothed_value_grad, u_schedule)


@dataclass
class SolverConfig:
    """Run parameters shared by every solver.

    ``stop_tolerance`` turns on Wolfe-gap stopping (one extra oracle call per
    iteration, tallied separately). ``y0`` overrides the start point;
    otherwise ``random_start`` draws one from ``seed`` or the set's default
    vertex is used. ``keep_history`` retains per-iteration vectors, which
    :func:`holder_diagnostic` and several checks need.
    """

    max_iterations: int = 1000
    schedule: StepSchedule = StepSchedule.OPEN_LOOP
    stop_tolerance: Optional[float] = None
    record_every: int = 1
    seed: Optional[int] = None
    y0: Optional[np.ndarray] = None
    random_start: bool = False
    keep_history: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if isinstance(self.schedule, str):
            self.schedule = StepSchedule(self.schedule)


class _Run:
    def __init__(self, name: str, feasible_set: FeasibleSet, cfg: SolverConfig):
        self.set = feasible_set
        self.cfg = cfg
        self.trace = IterationTrace(name, history=[] if cfg.keep_history else None)
        self.t0 = time.perf_counter()
        self.calls = 0

    def start(self) -> np.ndarray:
        cfg = self.cfg
        if cfg.y0 is not None:
            y0 = np.array(cfg.y0, dtype=float)
        elif cfg.random_start:
            rng = np.random.Generator(np.random.Philox(cfg.seed or 0))
            y0 = self.set.random_point(rng)
        else:
            y0 = self.set.default_start()
        if y0.shape != tuple(self.set.shape):
            raise ValueError(f"start point has shape {y0.shape}, set expects {self.set.shape}")
        if self.set.residual(y0) > FEAS_TOL * max(1.0, float(np.abs(y0).max())):
            raise ValueError("start point is infeasible")
        return y0

    def lmo(self, p):
        self.calls += 1
        return self.set.lmo(p)

    def record(self, k: int, objective: float, last: bool = False, **kw) -> None:
        if not math.isfinite(objective):
            raise FloatingPointError(f"non-finite objective at iteration {k}")
        if last or k == 0 or k % self.cfg.record_every == 0:
            self.trace.records.append(IterationRecord(
                k=k, objective=objective, oracle_calls=self.calls,
                elapsed=time.perf_counter() - self.t0, **kw))

    def keep(self, **kw) -> None:
        if self.trace.history is not None:
            self.trace.history.append({k: (np.array(v) if isinstance(v, np.ndarray) else v)
                                       for k, v in kw.items()})

    def wolfe(self, obj, y) -> Optional[float]:
        if self.cfg.stop_tolerance is None:
            return None
        self.trace.wolfe_calls += 1
        return wolfe_gap(obj, self.set, y)

    def finish(self, y) -> IterationTrace:
        self.trace.final_iterate = y
        self.trace.oracle_calls = self.calls
        return self.trace


def _stop(gap: Optional[float], cfg: SolverConfig) -> bool:
    return gap is not None and gap <= cfg.stop_tolerance


def cndg(obj: SmoothObjective, feasible_set: FeasibleSet, cfg: SolverConfig = SolverConfig()) -> IterationTrace:
    """Classic conditional gradient.

    Certificate: f(y_k) - f* <= 2L/(k(k+1)) * sum_{i<=k} ||x_i - y_{i-1}||^2.
    """
    run = _Run("cndg", feasible_set, cfg)
    y = run.start()
    L = obj.lipschitz
    run.trace.meta.update(lipschitz=L, diameter=feasible_set.diameter())
    run.record(0, obj.value(y))
    acc = 0.0
    K = cfg.max_iterations
    for k in range(1, K + 1):
        p = obj.grad(y)
        x = run.lmo(p)
        acc += sqnorm(x - y)
        a = cfg.schedule.step(k, obj, y, x)
        y_prev = y
        y = y + a * (x - y)
        gap = run.wolfe(obj, y)
        stop = _stop(gap, cfg)
        run.record(k, obj.value(y), last=(k == K or stop), wolfe_gap=gap, step=a,
                   bound=2.0 * L / (k * (k + 1)) * acc)
        run.keep(k=k, p=p, x=x, y=y, y_prev=y_prev, step=a)
        if stop:
            break
    return run.finish(y)


def pa_cndg(obj: SmoothObjective, feasible_set: FeasibleSet, cfg: SolverConfig = SolverConfig()) -> IterationTrace:
    """Primal-averaging conditional gradient.

    The oracle is queried at f'(z_{k-1}) with
    z_{k-1} = ((k-1) y_{k-1} + 2 x_{k-1}) / (k+1) and x_0 = y_0.
    Certificate: 2L/(k(k+1)) * sum ||x_i - x_{i-1}||^2.
    """
    run = _Run("pa", feasible_set, cfg)
    y = run.start()
    x_prev = y.copy()
    L = obj.lipschitz
    run.trace.meta.update(lipschitz=L, diameter=feasible_set.diameter())
    run.record(0, obj.value(y))
    acc = 0.0
    K = cfg.max_iterations
    for k in range(1, K + 1):
        z = ((k - 1) * y + 2.0 * x_prev) / (k + 1)
        p = obj.grad(z)
        x = run.lmo(p)
        acc += sqnorm(x - x_prev)
        a = cfg.schedule.step(k, obj, y, x)
        y = y + a * (x - y)
        gap = run.wolfe(obj, y)
        stop = _stop(gap, cfg)
        run.record(k, obj.value(y), last=(k == K or stop), wolfe_gap=gap, step=a,
                   bound=2.0 * L / (k * (k + 1)) * acc)
        run.keep(k=k, p=p, x=x, y=y, z=z, step=a)
        x_prev = x
        if stop:
            break
    return run.finish(y)


@dataclass
class PdaState:
    """Aggregates behind the lower model Psi_k(x) = (c_k + <g_k, x>) / Theta_k."""

    theta_sum: float = 0.0
    aggregated_gradient: Optional[np.ndarray] = None
    aggregated_scalar: float = 0.0

    def add(self, theta: float, fz: float, gz: np.ndarray, z: np.ndarray) -> None:
        self.theta_sum += theta
        if self.aggregated_gradient is None:
            self.aggregated_gradient = np.zeros_like(gz)
        self.aggregated_gradient = self.aggregated_gradient + theta * gz
        self.aggregated_scalar += theta * (fz - inner(gz, z))

    def direction(self) -> np.ndarray:
        return self.aggregated_gradient / self.theta_sum

    def psi(self, x: np.ndarray) -> float:
        return (self.aggregated_scalar + inner(self.aggregated_gradient, x)) / self.theta_sum


def pda_cndg(obj: SmoothObjective, feasible_set: FeasibleSet, cfg: SolverConfig = SolverConfig()) -> IterationTrace:
    """Primal-dual averaging conditional gradient with weights theta_k = k.

    Records the online lower bound Psi_k(x_k) <= f* as ``dual_bound``.
    Certificate: f(y_k) - Psi_k(x_k) <= 2L/(k(k+1)) * sum ||x_i - x_{i-1}||^2.
    """
    run = _Run("pda", feasible_set, cfg)
    y = run.start()
    x_prev = y.copy()
    L = obj.lipschitz
    run.trace.meta.update(lipschitz=L, diameter=feasible_set.diameter())
    run.record(0, obj.value(y))
    state = PdaState()
    acc = 0.0
    K = cfg.max_iterations
    for k in range(1, K + 1):
        z = ((k - 1) * y + 2.0 * x_prev) / (k + 1)
        gz = obj.grad(z)
        fz = obj.value(z)
        state.add(float(k), fz, gz, z)
        p = state.direction()
        x = run.lmo(p)
        psi = state.psi(x)
        acc += sqnorm(x - x_prev)
        a = cfg.schedule.step(k, obj, y, x)
        y = y + a * (x - y)
        gap = run.wolfe(obj, y)
        stop = _stop(gap, cfg)
        run.record(k, obj.value(y), last=(k == K or stop), wolfe_gap=gap, step=a,
                   dual_bound=psi, bound=2.0 * L / (k * (k + 1)) * acc)
        run.keep(k=k, p=p, x=x, y=y, z=z, step=a, psi=psi,
                 lf_zx=fz + inner(gz, x - z), theta_sum=state.theta_sum)
        x_prev = x
        if stop:
            break
    return run.finish(y)


def smoothing_cndg(s: SaddleObjective, primal_set: FeasibleSet, cfg: SolverConfig = SolverConfig(),
                   eta: Optional[Callable[[int], float]] = None) -> IterationTrace:
    """Conditional gradient on a matrix game, steering by the gradient of f_{eta_k}.

    ``eta`` maps k to the smoothing parameter; by default the rate-optimal
    schedule ||A|| D_X / (D_{Y,V} sqrt(sigma k)) is used. The schedule must
    be non-increasing. ``bound`` carries
    2/(k(k+1)) * sum_i [i eta_i D^2 + ||A||^2/(sigma eta_i) ||x_i - y_{i-1}||^2].
    """
    prox = s.prox
    d_x = primal_set.diameter()
    d2 = prox.d_squared
    sigma = prox.sigma
    a2 = s.a_norm ** 2
    if eta is None:
        if s.a_norm > 0 and d2 > 0:
            def eta(k):
                return eta_schedule(k, s.a_norm, d_x, math.sqrt(d2), sigma)
        else:
            # degenerate data: any positive non-increasing schedule is valid
            def eta(k):
                return 1.0 / math.sqrt(k)
    run = _Run("smooth", primal_set, cfg)
    y = run.start()
    run.trace.meta.update(a_norm=s.a_norm, diameter=d_x, prox_d_squared=d2, sigma=sigma)
    run.record(0, s.value(y))
    acc = 0.0
    eta_prev = math.inf
    K = cfg.max_iterations
    for k in range(1, K + 1):
        eta_k = float(eta(k))
        if not 0 < eta_k <= eta_prev * (1 + 1e-12):
            raise ValueError("smoothing schedule must be positive and non-increasing")
        eta_prev = eta_k
        _, g, _ = smoothed_value_grad(s, y, eta_k)
        x = run.lmo(g)
        acc += k * eta_k * d2 + a2 / (sigma * eta_k) * sqnorm(x - y)
        if cfg.schedule is StepSchedule.OPEN_LOOP:
            a = 2.0 / (k + 1)
        else:
            d = x - y
            a = golden_section(lambda t: smoothed_value_grad(s, y + t * d, eta_k)[0])
        y = y + a * (x - y)
        run.record(k, s.value(y), last=(k == K), step=a, bound=2.0 / (k * (k + 1)) * acc)
        run.keep(k=k, p=g, x=x, y=y, eta=eta_k, step=a)
    return run.finish(y)


def randomized_cndg(obj: NonsmoothObjective, feasible_set: FeasibleSet,
                    cfg: SolverConfig = SolverConfig(), fresh_samples: bool = False) -> IterationTrace:
    """Conditional gradient on a convolution-smoothed nonsmooth objective.

    Iteration k averages T_k = k subgradients at y_{k-1} + u_k xi_t with
    u_k = n^{1/4} D_X / sqrt(k); samples are recycled across iterations unless
    ``fresh_samples``. ``bound`` holds the expected-gap bound
    4 (1 + 2 n^{1/4}) M D_X / (3 sqrt(k)), which individual runs need not meet.
    """
    run = _Run("rand", feasible_set, cfg)
    y = run.start()
    if y.ndim != 1:
        raise UnsupportedDomainError("randomized smoothing needs a vector domain")
    n = y.size
    d_x = feasible_set.diameter()
    M = obj.lipschitz
    smoother = RandomizedSmoother(u=u_schedule(1, n, d_x)[1], n=n,
                                  rng_seed=cfg.seed or 0, fresh=fresh_samples)
    run.trace.meta.update(lipschitz=M, diameter=d_x, bound_kind="expectation")
    run.record(0, obj.value(y))
    evals = 0
    K = cfg.max_iterations
    c = 4.0 * (1.0 + 2.0 * n ** 0.25) * M * d_x / 3.0
    for k in range(1, K + 1):
        T, u = u_schedule(k, n, d_x)
        g = randomized_grad(obj, y, u, T, smoother)
        evals += T
        x = run.lmo(g)
        if cfg.schedule is StepSchedule.OPEN_LOOP:
            a = 2.0 / (k + 1)
        else:
            xi = smoother.samples(T)
            d = x - y
            a = golden_section(lambda t: float(obj.values((y + t * d)[None, :] + u * xi).mean()))
        y = y + a * (x - y)
        run.record(k, obj.value(y), last=(k == K), step=a, bound=c / math.sqrt(k))
        run.keep(k=k, p=g, x=x, y=y, u=u, step=a)
    run.trace.meta.update(subgradient_evals=evals, distinct_samples=len(smoother.sample_cache))
    return run.finish(y)


def shrinking_cndg(obj: SmoothObjective, feasible_set: FeasibleSet, epsilon: float,
                   cfg: SolverConfig = SolverConfig()) -> IterationTrace:
    """Conditional gradient restarted inside l_inf balls whose radius shrinks by sqrt(2).

    Each outer round runs ceil(8 L / mu) classic steps using the enhanced
    oracle over X intersected with the ball of radius R around the current
    center, then halves R^2. Rounds stop once mu R^2 / 2 <= epsilon or the
    total oracle calls reach ``cfg.max_iterations``. The first radius is the
    l_inf diameter of the set, matching the ball's norm.

    ``trace.meta["outer"]`` lists each center p_t with its radius R_t; the
    last inner record of round t carries ``bound = mu R_t^2 / 2``.
    """
    mu = obj.strong_convexity
    if mu <= 0:
        raise ValueError("shrinking scheme needs a strongly convex objective (mu > 0)")
    if not isinstance(feasible_set, (Hypercube, KnapsackBox)):
        raise UnsupportedDomainError(
            f"enhanced oracle unavailable for {type(feasible_set).__name__}")
    if epsilon <= 0:
        raise ValueError("target accuracy must be positive")
    L = obj.lipschitz
    k_inner = math.ceil(8.0 * L / mu)
    R = feasible_set.linf_diameter()
    budget = k_inner * math.ceil(max(math.log2(mu * R / epsilon), 1.0))
    run = _Run("shrink", feasible_set, cfg)
    p = run.start()
    run.trace.meta.update(lipschitz=L, strong_convexity=mu, inner_iterations=k_inner,
                          initial_radius=R, call_budget=budget)
    run.record(0, obj.value(p))
    outer = [{"t": 0, "center": p.copy(), "radius": R, "objective": obj.value(p)}]
    t = 0
    while mu * R * R / 2.0 > epsilon and run.calls < cfg.max_iterations:
        y = p
        for k in range(1, k_inner + 1):
            x = enhanced_lmo(obj.grad(y), p, R, feasible_set)
            run.calls += 1
            a = cfg.schedule.step(k, obj, y, x)
            y = y + a * (x - y)
            last = k == k_inner
            run.record(run.calls, obj.value(y), last=last, step=a,
                       bound=mu * (R / math.sqrt(2.0)) ** 2 / 2.0 if last else None)
            run.keep(t=t + 1, k=k, x=x, y=y, center=p, radius=R)
        p = y
        R /= math.sqrt(2.0)
        t += 1
        outer.append({"t": t, "center": p.copy(), "radius": R, "objective": obj.value(p)})
    run.trace.meta.update(outer=outer, rounds=t, converged=mu * R * R / 2.0 <= epsilon)
    return run.finish(p)


def holder_diagnostic(trace: IterationTrace, rho: float) -> np.ndarray:
    """Ratios ||x_k - x_{k-1}|| / ||p_k - p_{k-1}||^rho for k >= 2.

    Needs a trace produced with ``keep_history=True``. A zero denominator
    gives ``inf`` when the outputs moved and ``0`` otherwise.
    """
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if not trace.history or "p" not in trace.history[0]:
        raise ValueError("trace does not retain oracle inputs/outputs; run with keep_history=True")
    out = []
    for prev, cur in zip(trace.history, trace.history[1:]):
        num = math.sqrt(sqnorm(cur["x"] - prev["x"]))
        den = math.sqrt(sqnorm(cur["p"] - prev["p"])) ** rho
        if den == 0.0:
            out.append(math.inf if num > 0 else 0.0)
        else:
            out.append(num / den)
    return np.array(out)


SMOOTH_SOLVERS = {"cndg": cndg, "pa": pa_cndg, "pda": pda_cndg}
