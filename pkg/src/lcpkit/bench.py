"""Planted sparse least-squares benchmarks and the experiment runner.

Instances are f(x) = ||A x - b||^2 with b = A s0 for a feasible s0, so the
optimal value is exactly 0. Randomness comes from the Philox counter-based
generator: ``SeedSequence(seed).spawn(3)`` gives independent streams for
s0, the matrix A and the start point y0, in that order.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .algorithms import SMOOTH_SOLVERS, SolverConfig
from .core import IterationTrace, QuadraticObjective, StepSchedule
from .oracles import FeasibleSet, Hypercube, KnapsackBox, ScaledSimplex, Spectrahedron

DOMAINS = ("simplex", "spectrahedron", "hypercube", "knapsack")
SUITE_DOMAIN = {"sim": "simplex", "spe": "spectrahedron", "cub": "hypercube", "hyb": "knapsack"}
DESK_FACTOR = 8
CSV_COLUMNS = ("instance", "algorithm", "f_y0", "f_y100", "f_y1000", "time_s", "oracle_calls")
DEFAULT_ALGORITHMS = ("cndg", "pa", "pda")


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    domain: str
    n: int
    m: int
    d: float
    r: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if not 0.0 < self.d <= 1.0:
            raise ValueError(f"sparsity density must lie in (0, 1], got {self.d}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if self.domain == "knapsack" and (self.r is None or not 0.0 < self.r <= 1.0):
            raise ValueError("knapsack instances need a ratio r in (0, 1]")

    def scaled(self, factor: int) -> "InstanceSpec":
        return InstanceSpec(self.name, self.domain, max(self.n // factor, 2),
                            max(self.m // factor, 1), self.d, self.r, self.seed)

    def with_seed(self, seed: int) -> "InstanceSpec":
        return InstanceSpec(self.name, self.domain, self.n, self.m, self.d, self.r, seed)


def _catalog() -> dict:
    rows = {}
    pairs = {
        "sim": [(2000, 500, 1000, 1.0), (4000, 1000, 2000, 0.8), (8000, 2000, 4000, 0.6)],
        "spe": [(100, 500, 1000, 0.6), (200, 500, 1000, 0.4), (400, 500, 1000, 0.2)],
        "cub": [(500, 100, 200, 1.0), (1000, 250, 500, 1.0), (2000, 500, 1000, 1.0),
                (4000, 1000, 2000, 0.8), (8000, 2000, 4000, 0.6), (16000, 4000, 8000, 0.4)],
    }
    first = {"sim": 1, "spe": 4, "cub": 1}
    for tag, table in pairs.items():
        for i, (n, m1, m2, d) in enumerate(table):
            for j, m in ((1, m1), (2, m2)):
                name = f"{tag.upper()}{first[tag] + i}{j}"
                rows[name] = InstanceSpec(name, SUITE_DOMAIN[tag], n, m, d)
    hyb = [(4000, 1000, 2000, 0.8), (8000, 2000, 4000, 0.6), (16000, 4000, 8000, 0.4)]
    for i, (n, m1, m2, d) in enumerate(hyb):
        for h, r in enumerate((0.25, 0.5)):
            row = 2 * i + h + 1
            for j, m in ((1, m1), (2, m2)):
                name = f"HYB{row}{j}"
                rows[name] = InstanceSpec(name, "knapsack", n, m, d, r)
    return rows


CATALOG = _catalog()


def _cell_seed(seed: int, name: str) -> int:
    words = [seed & 0xFFFFFFFF, seed >> 32] + [ord(c) for c in name]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def suite(tag: str, scale: str = "desk", seed: int = 0) -> list:
    """Instance specs for one suite.

    ``full`` gives every catalog row at its listed size. ``desk`` divides n
    and m by 8 and keeps six rows: all of them for sim/spe, the first-column
    (m1) rows for cub/hyb.
    """
    if tag not in SUITE_DOMAIN:
        raise ValueError(f"unknown suite {tag!r}")
    if scale not in ("desk", "full"):
        raise ValueError(f"unknown scale {scale!r}")
    names = [k for k in CATALOG if k.startswith(tag.upper())]
    if scale == "desk" and tag in ("cub", "hyb"):
        names = [k for k in names if k.endswith("1")]
    specs = [CATALOG[k].with_seed(_cell_seed(seed, k)) for k in names]
    if scale == "desk":
        specs = [s.scaled(DESK_FACTOR) for s in specs]
    return specs


def _streams(seed: int):
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(3)]


def feasible_set_for(spec: InstanceSpec) -> FeasibleSet:
    if spec.domain == "simplex":
        return ScaledSimplex(spec.n, 1.0)
    if spec.domain == "spectrahedron":
        return Spectrahedron(spec.n)
    if spec.domain == "hypercube":
        return Hypercube(spec.n)
    return KnapsackBox(spec.n, spec.r)


def _sparse_uniform(rng, m, n, d) -> sp.csr_matrix:
    # Bernoulli(d) mask, uniform[0, 1] values, assembled from triplets
    mask = rng.random((m, n)) < d
    vals = rng.uniform(0.0, 1.0, (m, n))
    rows, cols = np.nonzero(mask)
    return sp.coo_matrix((vals[rows, cols], (rows, cols)), shape=(m, n)).tocsr()


def _symmetric_operator(rng, m, n, d) -> sp.csr_matrix:
    iu = np.triu_indices(n)
    out = []
    for _ in range(m):
        mask = rng.random(iu[0].size) < d
        vals = rng.uniform(0.0, 1.0, iu[0].size) * mask
        S = np.zeros((n, n))
        S[iu] = vals
        S = S + np.triu(S, 1).T
        out.append(S.ravel())
    return sp.csr_matrix(np.array(out))


def generate_instance(spec: InstanceSpec):
    """Return (objective, feasible set, planted s0) for ``spec``; f(s0) == 0."""
    rng_s, rng_a, _ = _streams(spec.seed)
    X = feasible_set_for(spec)
    s0 = X.random_point(rng_s)
    if spec.domain == "spectrahedron":
        A = _symmetric_operator(rng_a, spec.m, spec.n, spec.d)
    else:
        A = _sparse_uniform(rng_a, spec.m, spec.n, spec.d)
    b = A @ s0.ravel()
    return QuadraticObjective(A, b), X, s0


def initial_point(spec: InstanceSpec, X: Optional[FeasibleSet] = None) -> np.ndarray:
    """Seeded random feasible start, drawn like s0 from an independent stream."""
    X = feasible_set_for(spec) if X is None else X
    return X.random_point(_streams(spec.seed)[2])


def save_instance(spec: InstanceSpec, path: str) -> None:
    obj, _, s0 = generate_instance(spec)
    A = obj.A.tocoo()
    doc = {
        "spec": asdict(spec),
        "A": {"shape": list(A.shape), "rows": A.row.tolist(), "cols": A.col.tolist(),
              "vals": A.data.tolist()},
        "b": obj.b.tolist(),
        "s0": s0.tolist(),
    }
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh)
    except OSError as exc:
        raise OSError(f"cannot write instance to {path}: {exc}") from exc


def load_instance(path: str):
    """Return (spec, objective, feasible set, s0) from an instance JSON file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read instance from {path}: {exc}") from exc
    spec = InstanceSpec(**doc["spec"])
    a = doc["A"]
    A = sp.coo_matrix((a["vals"], (a["rows"], a["cols"])), shape=tuple(a["shape"])).tocsr()
    return spec, QuadraticObjective(A, np.array(doc["b"])), feasible_set_for(spec), np.array(doc["s0"])


@dataclass
class RunResult:
    instance: str
    algorithm: str
    f_y0: float = math.nan
    f_y100: float = math.nan
    f_y1000: float = math.nan
    elapsed_seconds: float = math.nan
    oracle_calls: int = 0
    f_final: float = math.nan
    certified: Optional[bool] = None
    error: Optional[str] = None
    trace: Optional[IterationTrace] = field(default=None, repr=False, compare=False)

    def summary(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "trace"}
        if self.trace is not None:
            out["trace"] = {
                "k": [r.k for r in self.trace.records],
                "objective": [r.objective for r in self.trace.records],
                "bound": [r.bound for r in self.trace.records],
                "dual_bound": [r.dual_bound for r in self.trace.records],
            }
        return out


def _objective_at(trace: IterationTrace, k: int) -> float:
    try:
        return trace.at(k).objective
    except KeyError:
        return math.nan


def _run_cell(obj, X, y0, name, alg, K, certify) -> RunResult:
    solver = SMOOTH_SOLVERS.get(alg)
    if solver is None:
        return RunResult(name, alg, error=f"algorithm {alg!r} does not apply to quadratic benchmarks")
    cfg = SolverConfig(max_iterations=K, schedule=StepSchedule.OPEN_LOOP, y0=y0)
    t0 = time.perf_counter()
    trace = solver(obj, X, cfg)
    elapsed = time.perf_counter() - t0
    res = RunResult(name, alg, f_y0=trace.at(0).objective, f_y100=_objective_at(trace, 100),
                    f_y1000=_objective_at(trace, 1000), elapsed_seconds=elapsed,
                    oracle_calls=trace.oracle_calls, f_final=trace.records[-1].objective, trace=trace)
    if certify:
        res.certified = not trace.violations(0.0, tol=1e-8 * max(1.0, res.f_y0))
    return res


def thread_cap() -> int:
    env = os.environ.get("LCPKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"LCPKIT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_experiment(specs: Sequence[InstanceSpec], algorithms: Sequence[str] = DEFAULT_ALGORITHMS,
                   K: int = 1000, certify: bool = False, threads: Optional[int] = None) -> list:
    """Run every (instance, algorithm) cell with a shared start per instance.

    Results come back in spec order, then algorithm order, regardless of
    completion order. A cell that cannot run carries an ``error`` string.
    """
    instances = []
    for spec in specs:
        obj, X, _ = generate_instance(spec)
        instances.append((spec, obj, X, initial_point(spec, X)))
    cells = [(spec.name, obj, X, y0, alg) for spec, obj, X, y0 in instances for alg in algorithms]
    workers = min(threads or thread_cap(), max(len(cells), 1))

    def job(cell):
        name, obj, X, y0, alg = cell
        return _run_cell(obj, X, y0, name, alg, K, certify)

    if workers == 1:
        return [job(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, cells))


def _sci(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{v:.2e}"


def export_results(results: Sequence[RunResult], fmt: str, path: str) -> None:
    """Write results as a 3-significant-digit CSV table or a full-precision JSON list."""
    ordered = sorted(results, key=lambda r: (r.instance, r.algorithm))
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                w = csv.writer(fh)
                w.writerow(CSV_COLUMNS)
                for r in ordered:
                    w.writerow([r.instance, r.algorithm, _sci(r.f_y0), _sci(r.f_y100),
                                _sci(r.f_y1000), _sci(r.elapsed_seconds), r.oracle_calls])
            elif fmt == "json":
                json.dump([r.summary() for r in ordered], fh, indent=1)
            else:
                raise ValueError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def load_results(path: str) -> list:
    with open(path) as fh:
        doc = json.load(fh)
    return [RunResult(**{k: v for k, v in d.items() if k != "trace"}) for d in doc]


def format_table(results: Sequence[RunResult], algorithms: Sequence[str] = DEFAULT_ALGORITHMS) -> str:
    """Plain-text table: instance, f(y0), then f(y100) f(y1000) time per algorithm."""
    by = {(r.instance, r.algorithm): r for r in results}
    names = list(dict.fromkeys(r.instance for r in results))
    head = f"{'Inst':<8}{'f(y0)':>10}" + "".join(
        f" | {a + ' f(y100)':>14}{'f(y1000)':>10}{'time':>8}" for a in algorithms)
    lines = [head, "-" * len(head)]
    for name in names:
        f0 = next((by[(name, a)].f_y0 for a in algorithms if (name, a) in by), math.nan)
        row = f"{name:<8}{_sci(f0):>10}"
        for a in algorithms:
            r = by.get((name, a))
            if r is None or r.error:
                row += f" | {'n/a':>14}{'':>10}{'':>8}"
            else:
                row += f" | {_sci(r.f_y100):>14}{_sci(r.f_y1000):>10}{r.elapsed_seconds:>8.2f}"
        lines.append(row)
    return "\n".join(lines)
