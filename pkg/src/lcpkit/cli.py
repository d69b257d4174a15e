"""``lcpkit`` command line: gen, solve, bench, lowerbound, verify.

Exit codes: 0 success, 2 certificate or floor violation, 64 usage error,
65 infeasible configuration. Every run first prints one ``# effective-config``
line that reproduces it exactly.

Instance strings accepted by ``solve --instance``:

* a path to an instance JSON written by ``gen``
* a catalog name such as ``SIM11`` (sized by ``--scale``)
* ``planted:domain=simplex,n=200,m=50,d=1[,r=0.5]``
* ``game:prox=ball|entropy,m=50,n=50``   (for smooth and rand)
* ``strong:n=10``   f = ||x - c||^2 over the unit hypercube (for shrink)
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import shlex
import sys
from typing import Optional

import numpy as np

from . import bench
from .algorithms import (SMOOTH_SOLVERS, SolverConfig, randomized_cndg, shrinking_cndg,
                         smoothing_cndg)
from .core import QuadraticObjective, StepSchedule
from .lowerbounds import HardInstance, OracleBypassError, certify_floor
from .oracles import Hypercube, ScaledSimplex, UnsupportedDomainError
from .smoothing import game_value, matrix_game, saddle_as_nonsmooth

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_USAGE = 64
EXIT_CONFIG = 65
ALGORITHMS = ("cndg", "pa", "pda", "smooth", "rand", "shrink")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lcpkit", description="Conditional gradient solvers and benchmarks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a planted instance to JSON")
    g.add_argument("--name", help="catalog row, e.g. CUB11")
    g.add_argument("--domain", choices=bench.DOMAINS)
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--d", type=float, default=1.0)
    g.add_argument("--r", type=float)
    g.add_argument("--scale", choices=("desk", "full"), default="desk")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="run one solver on one instance")
    s.add_argument("--algorithm", choices=ALGORITHMS, default="cndg")
    s.add_argument("--instance", required=True)
    s.add_argument("--iters", type=int, default=1000)
    s.add_argument("--step", choices=("open", "linesearch"), default="open")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scale", choices=("desk", "full"), default="desk")
    s.add_argument("--epsilon", type=float, default=1e-6, help="target accuracy for shrink")
    s.add_argument("--record-every", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--certify", action="store_true")
    s.add_argument("--emit-plot-data", metavar="CSV")

    b = sub.add_parser("bench", help="run a benchmark suite")
    b.add_argument("--suite", choices=("sim", "spe", "cub", "hyb", "all"), default="all")
    b.add_argument("--scale", choices=("desk", "full"), default="desk")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--iters", type=int, default=1000)
    b.add_argument("--out-dir", default=".")
    b.add_argument("--certify", action="store_true")

    lb = sub.add_parser("lowerbound", help="certify gap floors on a hard instance")
    lb.add_argument("--family", choices=("smooth", "nonsmooth", "saddle"), default="smooth")
    lb.add_argument("--n", type=int, default=100)
    lb.add_argument("--L", type=float, default=1.0)
    lb.add_argument("--M", type=float, default=1.0)
    lb.add_argument("--D", type=float, default=1.0)
    lb.add_argument("--dual-radius", type=float, default=1.0)
    lb.add_argument("--algorithm", choices=ALGORITHMS, default="cndg")
    lb.add_argument("--iters", type=int, default=50)
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    lb.add_argument("--out")

    v = sub.add_parser("verify", help="check table-level orderings in a results JSON")
    v.add_argument("--results", required=True)
    v.add_argument("--check", choices=("auto", "pda-dominates", "same-ballpark"), default="auto")
    v.add_argument("--factor", type=float, default=0.1)
    v.add_argument("--spread", type=float, default=20.0)
    v.add_argument("--min-rows", type=int, default=5)
    return p


def effective_config(args: argparse.Namespace) -> str:
    parts = ["lcpkit", args.command]
    for key, val in sorted(vars(args).items()):
        if key == "command" or val is None or val is False:
            continue
        flag = "--" + key.replace("_", "-")
        parts.append(flag if val is True else f"{flag} {shlex.quote(str(val))}")
    return "# effective-config: " + " ".join(parts)


def _parse_kv(body: str) -> dict:
    out = {}
    for item in filter(None, body.split(",")):
        if "=" not in item:
            raise ConfigError(f"malformed instance parameter {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_problem(text: str, algorithm: str, seed: int, scale: str = "desk") -> dict:
    """Resolve an instance string into objective, domain and known optimum."""
    if os.path.exists(text):
        spec, obj, X, s0 = bench.load_instance(text)
        return {"kind": "quadratic", "objective": obj, "set": X, "f_star": 0.0,
                "y0": bench.initial_point(spec, X), "name": spec.name}
    family, _, body = text.partition(":")
    if family in bench.CATALOG and not body:
        spec = bench.suite(family[:3].lower(), scale, seed)
        spec = next((s for s in spec if s.name == family), None)
        if spec is None:
            base = bench.CATALOG[family].with_seed(seed)
            spec = base.scaled(bench.DESK_FACTOR) if scale == "desk" else base
        obj, X, _ = bench.generate_instance(spec)
        return {"kind": "quadratic", "objective": obj, "set": X, "f_star": 0.0,
                "y0": bench.initial_point(spec, X), "name": spec.name}
    kv = _parse_kv(body)
    try:
        if family == "planted":
            spec = bench.InstanceSpec("planted", kv.get("domain", "simplex"), int(kv["n"]),
                                      int(kv["m"]), float(kv.get("d", 1.0)),
                                      float(kv["r"]) if "r" in kv else None, seed)
            obj, X, _ = bench.generate_instance(spec)
            return {"kind": "quadratic", "objective": obj, "set": X, "f_star": 0.0,
                    "y0": bench.initial_point(spec, X), "name": text}
        if family == "game":
            s = matrix_game(int(kv.get("m", 50)), int(kv.get("n", 50)), kv.get("prox", "ball"), seed)
            return {"kind": "game", "objective": s, "set": ScaledSimplex(s.n), "f_star": game_value(s),
                    "y0": None, "name": text}
        if family == "strong":
            n = int(kv.get("n", 10))
            c = np.random.Generator(np.random.Philox(seed)).uniform(0.1, 0.9, n)
            obj = QuadraticObjective(np.eye(n), c, lipschitz=2.0, strong_convexity=2.0)
            return {"kind": "quadratic", "objective": obj, "set": Hypercube(n), "f_star": 0.0,
                    "y0": None, "name": text, "x_star": c}
    except KeyError as exc:
        raise ConfigError(f"instance {text!r} is missing parameter {exc}") from None
    raise ConfigError(f"cannot resolve instance {text!r} (not a file, catalog name or known family)")


def _run_solve(args) -> int:
    if args.iters < 1:
        raise ConfigError("--iters must be >= 1")
    prob = load_problem(args.instance, args.algorithm, args.seed, args.scale)
    cfg = SolverConfig(max_iterations=args.iters, schedule=StepSchedule(args.step), seed=args.seed,
                       y0=prob["y0"], record_every=args.record_every)
    alg = args.algorithm
    obj, X = prob["objective"], prob["set"]
    if alg in SMOOTH_SOLVERS:
        if prob["kind"] != "quadratic":
            raise ConfigError(f"{alg} needs a smooth instance")
        trace = SMOOTH_SOLVERS[alg](obj, X, cfg)
    elif alg == "smooth":
        if prob["kind"] != "game":
            raise ConfigError("smooth needs a game: instance")
        trace = smoothing_cndg(obj, X, cfg)
    elif alg == "rand":
        if prob["kind"] != "game":
            raise ConfigError("rand needs a game: instance")
        trace = randomized_cndg(saddle_as_nonsmooth(obj), X, cfg)
    else:
        trace = shrinking_cndg(obj, X, args.epsilon, cfg)
    f_star = prob["f_star"]
    bad = []
    if args.certify:
        if f_star is None:
            raise ConfigError("--certify needs an instance with known optimum")
        if alg == "rand":
            # expectation bound: a single run is held to twice the bound
            bad = [r.k for r in trace.records
                   if r.bound is not None and r.objective - f_star > 2.0 * r.bound + 1e-8]
        else:
            f0 = trace.records[0].objective
            bad = trace.violations(f_star, tol=1e-8 * max(1.0, abs(f0)))
    last = trace.records[-1]
    print(f"{trace.algorithm} on {prob['name']}: k={last.k} f={last.objective:.6e} "
          f"oracle_calls={trace.oracle_calls}" + (f" gap={last.objective - f_star:.3e}" if f_star is not None else ""))
    if args.out:
        doc = trace.to_dict()
        doc["f_star"] = f_star
        doc["certificate_violations"] = bad
        _write_json(args.out, doc)
    if args.emit_plot_data:
        _write_plot_data(args.emit_plot_data, trace, f_star)
    if bad:
        print(f"certificate violated at k = {bad[:10]}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _write_json(path: str, doc) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _write_plot_data(path: str, trace, f_star) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "gap", "bound"])
        for r in trace.records:
            gap = r.objective - (f_star if f_star is not None else 0.0)
            w.writerow([r.k, repr(gap), "" if r.bound is None else repr(r.bound)])


def _run_gen(args) -> int:
    if args.name:
        if args.name not in bench.CATALOG:
            raise ConfigError(f"unknown catalog row {args.name!r}")
        spec = bench.CATALOG[args.name].with_seed(args.seed)
        if args.scale == "desk":
            spec = spec.scaled(bench.DESK_FACTOR)
    else:
        if args.domain is None or args.n is None or args.m is None:
            raise ConfigError("gen needs --name or all of --domain, --n, --m")
        spec = bench.InstanceSpec("custom", args.domain, args.n, args.m, args.d, args.r, args.seed)
    bench.save_instance(spec, args.out)
    print(f"wrote {spec.name} (n={spec.n}, m={spec.m}, d={spec.d}) to {args.out}")
    return EXIT_OK


def _run_bench(args) -> int:
    if args.iters < 1:
        raise ConfigError("--iters must be >= 1")
    tags = ["sim", "spe", "cub", "hyb"] if args.suite == "all" else [args.suite]
    os.makedirs(args.out_dir, exist_ok=True)
    failed = False
    for tag in tags:
        results = bench.run_experiment(bench.suite(tag, args.scale, args.seed), K=args.iters,
                                       certify=args.certify)
        bench.export_results(results, "csv", os.path.join(args.out_dir, f"results_{tag}.csv"))
        bench.export_results(results, "json", os.path.join(args.out_dir, f"results_{tag}.json"))
        print(f"[{tag}]")
        print(bench.format_table(results))
        failed |= any(r.certified is False for r in results)
    return EXIT_VIOLATION if failed else EXIT_OK


def _lb_solver(name: str):
    if name in SMOOTH_SOLVERS:
        return SMOOTH_SOLVERS[name]
    if name == "rand":
        return randomized_cndg
    if name == "smooth":
        return smoothing_cndg
    raise ConfigError(f"{name} cannot run through the resisting oracle")


def _run_lowerbound(args) -> int:
    if not 1 <= args.iters <= args.n - 1:
        raise ConfigError(f"--iters must satisfy 1 <= k <= n-1 = {args.n - 1}")
    inst = HardInstance(args.family, args.n, L=args.L, M=args.M, D=args.D, dual_radius=args.dual_radius)
    solver = _lb_solver(args.algorithm)
    if inst.family == "smooth" and solver not in SMOOTH_SOLVERS.values():
        raise ConfigError(f"{args.algorithm} does not apply to the smooth family")
    if inst.family != "smooth" and solver in SMOOTH_SOLVERS.values():
        raise ConfigError(f"{args.algorithm} needs a smooth objective")
    if solver is smoothing_cndg and inst.family != "saddle":
        raise ConfigError("smooth runs on the saddle family only")
    reports = [certify_floor(solver, inst, args.iters, seed=args.seed + i) for i in range(args.seeds)]
    for rep in reports:
        worst = min(r["gap"] - r["floor"] for r in rep["per_iteration"])
        print(f"{rep['family']} n={rep['n']} {rep['algorithm']} seed={rep['seed']}: "
              f"{'ok' if rep['ok'] else 'VIOLATED'} (min gap - floor = {worst:.3e})")
    if args.out:
        _write_json(args.out, reports if len(reports) > 1 else reports[0])
    return EXIT_OK if all(r["ok"] for r in reports) else EXIT_VIOLATION


def check_results(results, check: str = "auto", factor: float = 0.1, spread: float = 20.0,
                  min_rows: Optional[int] = 5) -> tuple[bool, list]:
    """Table-level checks on bench results; returns (passed, per-instance lines).

    Compares f(y_1000), or the last recorded value for shorter runs.
    """
    by = {}
    for r in results:
        if r.error is None:
            v = r.f_y1000 if math.isfinite(r.f_y1000) else r.f_final
            by.setdefault(r.instance, {})[r.algorithm] = v
    lines, hits = [], 0
    for name, vals in by.items():
        mode = check
        if mode == "auto":
            mode = "pda-dominates" if name[:3] in ("CUB", "HYB") else "same-ballpark"
        if mode == "pda-dominates":
            ratio = vals["pda"] / vals["cndg"] if vals.get("cndg") else math.inf
            ok = ratio <= factor
            lines.append(f"{name}: pda/cndg = {ratio:.3g} ({'ok' if ok else 'no'})")
        else:
            vs = [v for v in vals.values() if v is not None]
            ratio = max(vs) / min(vs) if min(vs) > 0 else math.inf
            ok = ratio <= spread
            lines.append(f"{name}: max/min = {ratio:.3g} ({'ok' if ok else 'no'})")
        hits += ok
    need = len(by) if min_rows is None else min(min_rows, len(by))
    if check == "same-ballpark" or (check == "auto" and all(n[:3] in ("SIM", "SPE") for n in by)):
        need = len(by)
    return hits >= need and len(by) > 0, lines


def _run_verify(args) -> int:
    try:
        results = bench.load_results(args.results)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read results {args.results}: {exc}") from None
    ok, lines = check_results(results, args.check, args.factor, args.spread, args.min_rows)
    print("\n".join(lines))
    print("verify:", "pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_VIOLATION


COMMANDS = {"gen": _run_gen, "solve": _run_solve, "bench": _run_bench,
            "lowerbound": _run_lowerbound, "verify": _run_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    print(effective_config(args), flush=True)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UnsupportedDomainError, OracleBypassError, ValueError) as exc:
        print(f"lcpkit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
