"""Command-line entry point: ``heatlab <command> [flags]``.

Every command writes its reports to ``--out`` (default: ``$HEATLAB_OUT`` or
``./heatlab_out``). Exit status is 0 when all recorded checks pass, 2 when a
check fails and 1 on usage or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from contextlib import contextmanager

import numpy as np

from . import __version__
from .eigenfunctions import (
    check_growth_bounds,
    construct_positive_eigenfunction,
    growth_profile,
    one_step_harnack_violations,
    verify_zero_propagation,
)
from .errors import HeatlabError
from .graph import FAMILIES, certify_bounded_geometry, decompose_balls, dumps_graph, generate_family, load_graph
from .heat import (
    ImplicitHeatSolver,
    HeatState,
    SpectralMeasure,
    audit_harnack,
    heat_residual,
    solve_heat_spectral,
    synthesize_ancient,
)
from .laplacian import check_maximum_principle
from .liouville import RATE_TOL, VERDICT_TOL, dichotomy_sweep, spatial_lower_bound
from .reports import IoError, RunReport, emit_report, fmt
from .spectrum import estimate_lambda1_exhaustion

EXIT_OK, EXIT_USAGE, EXIT_CHECKS = 0, 1, 2
COMMANDS = ("gen", "lambda1", "eigfn", "growth", "heat", "synth", "harnack", "liouville")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _pair(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return tuple(vals)


def _atoms(text):
    """``lam:nu,lam:nu`` -> list of (lam, nu)."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lam, _, nu = part.partition(":")
        out.append((float(lam), float(nu) if nu else 1.0))
    if not out:
        raise argparse.ArgumentTypeError("no atoms given")
    return out


def _add_graph_args(p, default_family="lattice_Z", default_radius=30):
    p.add_argument("--family", choices=FAMILIES, default=default_family)
    p.add_argument("--radius", "--size", dest="radius", type=int, default=default_radius,
                   help="ball radius for infinite families, vertex count for path/cycle")
    p.add_argument("--degree", type=int, default=None, help="degree of tree_regular")
    p.add_argument("--graph", default=None, help="graph file (graph v1 format) instead of a family")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heatlab", description="Heat equation and Liouville audits on weighted graphs.")
    parser.add_argument("--version", action="version", version=f"heatlab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def command(name, help, **graph_defaults):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", default=None, help="JSON file with flag values; flags override it")
        p.add_argument("--out", default=None, help="output directory (default $HEATLAB_OUT or ./heatlab_out)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--pretty", action="store_true", help="print a human-readable table")
        _add_graph_args(p, **graph_defaults)
        return p

    p = command("gen", "generate or load a graph and certify bounded geometry")
    p.add_argument("--c0", type=float, default=None, help="override c0 (must be >= certified)")

    p = command("lambda1", "Dirichlet exhaustion estimate of the bottom of the spectrum", default_radius=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--eigen-tol", type=float, default=1e-8)

    p = command("eigfn", "construct a positive lambda-eigenfunction on a truncation")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)

    p = command("growth", "growth profile of an eigenfunction against the growth bounds", default_radius=40)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--tail-fraction", type=float, default=0.5)
    p.add_argument("--slack", type=float, default=0.05)
    p.add_argument("--c0", type=float, default=None)

    p = command("heat", "implicit heat stepping checked against the spectral solution",
                default_family="path", default_radius=2)
    p.add_argument("--u0", type=_floats, default=None, help="initial values (default: delta at vertex 0)")
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--tau", type=float, default=1 / 64)
    p.add_argument("--random-trials", type=int, default=1000)

    p = command("synth", "synthesize an ancient solution from atoms lam:nu,...")
    p.add_argument("--atoms", type=_atoms, default=[(1.0, 0.5), (0.0, 0.5)])
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--times", type=_floats, default=[-5.0, 0.0])
    p.add_argument("--tol", type=float, default=1e-10)

    p = command("harnack", "empirical Harnack constants for a synthesized solution")
    p.add_argument("--atoms", type=_atoms, default=[(1.0, 1.0)])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--window", type=_pair, default=(-5.0, 0.0))
    p.add_argument("--horizon", type=float, default=1.0)

    p = command("liouville", "stationarity dichotomy sweep over single-atom solutions")
    p.add_argument("--lambdas", type=_floats, default=[0.0, 0.5, 1.0])
    p.add_argument("--t-star", type=float, default=-1.0)
    p.add_argument("--time-grid", type=_floats, default=None, help="explicit times, e.g. -40,-35,...,-10")
    p.add_argument("--rate-tol", type=float, default=RATE_TOL)
    p.add_argument("--tol", type=float, default=VERDICT_TOL)
    p.add_argument("--slack", type=float, default=0.05)
    p.add_argument("--no-autoscale", dest="autoscale", action="store_false")
    return parser


# list-valued flags whose values may start with a minus sign ("-0.1,0,1")
LIST_FLAGS = ("--lambdas", "--u0", "--atoms", "--times", "--window", "--time-grid")


def _glue_list_values(argv):
    """Rewrite ``--lambdas -0.1,0`` as ``--lambdas=-0.1,0`` so argparse keeps the value."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in LIST_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and not argv[i + 1].startswith("--"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def parse_args(argv):
    argv = _glue_list_values(list(argv))
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        config = {k.replace("-", "_"): v for k, v in config.items()}
        unknown = sorted(set(config) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for action in sub._actions:
            if action.dest not in config:
                continue
            value = config[action.dest]
            if isinstance(value, list) and action.type is not None:
                value = ",".join(map(str, value))
            if isinstance(value, str) and action.type is not None:
                try:
                    value = action.type(value)
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise UsageError(f"bad config value for {action.dest!r}: {exc}") from exc
            action.default = value
        args = parser.parse_args(argv)
    return args


def _load_or_generate(args):
    if args.graph:
        with open(args.graph, encoding="utf-8") as fh:
            return load_graph(fh)
    return generate_family(args.family, args.radius, args.degree)


def _config_echo(args) -> dict:
    skip = {"config", "pretty"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


@contextmanager
def _timed(report, name):
    start = time.perf_counter()
    yield
    report.timings[name] = time.perf_counter() - start


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args, report):
    g = _load_or_generate(args)
    cert = certify_bounded_geometry(g)
    if args.c0 is not None:
        cert = cert.relaxed(args.c0)
    balls = decompose_balls(g)
    report.documents["graph_meta.json"] = {
        "vertex_count": g.vertex_count,
        "edge_count": g.edge_count,
        "family_tag": g.family_tag,
        "truncation_radius": g.truncation_radius,
        "center": balls.root,
        "certificate": {
            "c0": cert.c0,
            "witness_edge_min": cert.witness_edge_min,
            "witness_edge_max": cert.witness_edge_max,
            "witness_measure_min": cert.witness_measure_min,
            "witness_measure_max": cert.witness_measure_max,
            "witness_degree_max": cert.witness_degree_max,
        },
    }
    report.add_table("spheres.csv", ["n", "size"], [(n, len(s)) for n, s in enumerate(balls.spheres)])
    report.results.update(c0=cert.c0, vertex_count=g.vertex_count, edge_count=g.edge_count)
    report.check("c0_at_least_one", cert.c0 >= 1)
    report.texts["graph.txt"] = dumps_graph(g)
    return [("vertices", g.vertex_count), ("edges", g.edge_count), ("c0", cert.c0)]


def cmd_lambda1(args, report):
    g = _load_or_generate(args)
    balls = decompose_balls(g)
    est = estimate_lambda1_exhaustion(g, balls, tol=args.tol, eigen_tol=args.eigen_tol)
    report.add_table("lambda1.csv", ["radius", "dirichlet_bottom"], est.per_radius)
    vals = [v for _, v in est.per_radius]
    report.results.update(lambda1=est.lambda1, converged=est.converged, tol=est.tol)
    report.check("nonincreasing", all(b <= a * (1 + 1e-9) + 1e-14 for a, b in zip(vals, vals[1:])))
    report.check("nonnegative", est.lambda1 >= 0)
    return est.per_radius


def cmd_eigfn(args, report):
    g = _load_or_generate(args)
    balls = decompose_balls(g)
    w = construct_positive_eigenfunction(g, balls, args.lam, tol=args.tol)
    cert = certify_bounded_geometry(g)
    report.add_table(
        "eigenfunction.csv",
        ["vertex", "distance", "value"],
        [(x, int(balls.distance[x]), float(w.values[x])) for x in range(g.vertex_count)],
    )
    report.results.update(lam=w.lam, residual=w.residual, positivity=w.positivity, radius=w.radius, c0=cert.c0)
    report.check("strictly_positive", w.positivity == "strictly_positive")
    report.check("zero_propagation", verify_zero_propagation(g, w, tol=max(args.tol, 1e-10)))
    report.check("one_step_harnack", not one_step_harnack_violations(g, w, cert.c0))
    if w.lam >= 0:
        report.check(
            "maximum_principle",
            all(check_maximum_principle(g, balls, w.values, n) for n in range(w.radius)),
        )
    return [("lambda", w.lam), ("residual", w.residual), ("positivity", w.positivity)]


def cmd_growth(args, report):
    g = _load_or_generate(args)
    balls = decompose_balls(g)
    w = construct_positive_eigenfunction(g, balls, args.lam)
    cert = certify_bounded_geometry(g)
    if args.c0 is not None:
        cert = cert.relaxed(args.c0)
    prof = growth_profile(w, balls, args.tail_fraction)
    bounds = check_growth_bounds(prof, args.lam, cert, slack=args.slack, nonconstant=w.is_nonconstant())
    rows = []
    for n in range(len(prof.M)):
        ratio = float(prof.ratios[n]) if n < len(prof.ratios) else None
        if ratio is None:
            ok = None
        else:
            ok = ratio <= bounds.upper_ratio * (1 + 1e-12)
            if bounds.lower_ratio is not None:
                ok = ok and ratio >= bounds.lower_ratio * (1 - 1e-12)
        rows.append((n, float(prof.M[n]), ratio, bounds.lower_ratio, bounds.upper_ratio, ok))
    report.add_table("growth.csv", ["n", "M_n", "ratio", "lower_bound", "upper_bound", "pass"], rows)
    report.results.update(
        lam=args.lam,
        c0=cert.c0,
        rate_lower=prof.rate_lower,
        rate_upper=prof.rate_upper,
        tail=[prof.tail_start, prof.tail_end],
        lower_rate_bound=bounds.lower_bound,
        upper_rate_bound=bounds.upper_bound,
        upper_bound_origin="one-step estimate c0^2 (lambda + c0^3), derived in this package",
    )
    report.check("rate_upper", bounds.rate_upper_ok)
    if bounds.rate_lower_ok is not None:
        report.check("rate_lower", bounds.rate_lower_ok)
        report.check("ratio_lower", bounds.ratios_ok)
    report.check("max_on_sphere", bool(np.all(prof.attained_on_sphere[: w.radius])) if args.lam >= 0 else True)
    return [(n, M, r) for n, M, r, *_ in rows]


def cmd_heat(args, report):
    g = _load_or_generate(args)
    n = g.vertex_count
    u0 = np.zeros(n)
    if args.u0 is None:
        u0[0] = 1.0
    else:
        if len(args.u0) != n:
            raise UsageError(f"--u0 has {len(args.u0)} values, graph has {n} vertices")
        u0 = np.array(args.u0, dtype=float)
    steps = max(1, round(args.t / args.tau))
    solver = ImplicitHeatSolver(g, args.t / steps)
    state = HeatState(g, 0.0, u0)
    worst_mass = 0.0
    nonneg = True
    for _ in range(steps):
        new = solver.step(state)
        worst_mass = max(worst_mass, abs(new.mass - state.mass) / max(abs(state.mass), 1e-300))
        nonneg &= bool(np.all(new.values >= 0)) or not np.all(state.values >= 0)
        state = new
    exact = solve_heat_spectral(g, u0, args.t)
    diff = float(np.abs(state.values - exact.values).max())

    rng = np.random.default_rng(args.seed)
    trials = rng.uniform(0.0, 1.0, size=(n, args.random_trials)) * (rng.uniform(size=(n, args.random_trials)) < 0.5)
    stepped = solver.solve(trials)
    random_nonneg = bool(np.all(stepped >= 0))
    mass_in, mass_out = g.measure @ trials, g.measure @ stepped
    random_mass = float(np.max(np.abs(mass_out - mass_in) / np.maximum(np.abs(mass_in), 1e-300)))

    report.add_table(
        "heat.csv",
        ["vertex", "implicit", "spectral"],
        [(x, float(state.values[x]), float(exact.values[x])) for x in range(n)],
    )
    tau = args.t / steps
    bound = 10 * tau * (1 + float(np.abs(u0).max()))
    report.results.update(steps=steps, tau=tau, max_difference=diff, agreement_bound=bound,
                          max_relative_mass_drift=max(worst_mass, random_mass))
    report.check("agreement", diff <= bound)
    report.check("mass_conservation", max(worst_mass, random_mass) <= 1e-10)
    report.check("nonnegativity", nonneg and random_nonneg)
    return [(x, state.values[x], exact.values[x]) for x in range(n)]


def _solution(args):
    g = _load_or_generate(args)
    balls = decompose_balls(g)
    est = estimate_lambda1_exhaustion(g, balls)
    atoms = [(lam, nu, construct_positive_eigenfunction(g, balls, lam)) for lam, nu in args.atoms]
    measure = SpectralMeasure.from_atoms(atoms, lambda1_reference=est.lambda1)
    return g, balls, est, synthesize_ancient(measure, args.horizon)


def cmd_synth(args, report):
    g, balls, est, sol = _solution(args)
    rows = []
    for t in args.times:
        u, du, lap = sol.values(t), sol.time_derivative(t), sol.laplacian(t)
        for x in sol.domain:
            rows.append((t, int(x), float(u[x]), float(du[x]), float(lap[x]), float(abs(lap[x] - du[x]))))
    report.add_table("synth.csv", ["t", "vertex", "u", "dudt", "laplacian", "residual"], rows)
    residual = heat_residual(sol, args.times)
    # |Delta u - du/dt| <= sum_i nu_i e^{lam_i t} residual_i max w_i
    bound = max(
        sum(a.nu * math.exp(a.lam * t) * a.eigenfunction.residual * a.eigenfunction.values.max()
            for a in sol.measure.atoms)
        for t in args.times
    )
    scale = max(float(sol.values(t)[sol.domain].max()) for t in args.times)
    report.results.update(lambda1_reference=est.lambda1, max_residual=residual, residual_bound=bound,
                          support=list(sol.measure.support))
    report.check("heat_residual", residual <= max(bound * (1 + 1e-6), args.tol * scale) + 1e-12 * scale)
    return [("max_residual", residual), ("bound", bound)]


def cmd_harnack(args, report):
    g, balls, est, sol = _solution(args)
    audit = audit_harnack(sol, g, balls, sample_count=args.samples, window=args.window, seed=args.seed)
    report.documents["harnack.json"] = audit.to_json()
    report.results.update(fitted_C1=audit.fitted_C1, fitted_C2=audit.fitted_C2, max_violation=audit.max_violation)
    report.check("finite_constants", audit.fitted_C1 is not None and audit.fitted_C2 is not None)
    report.check("max_violation_nonpositive", audit.max_violation <= 0)
    return [("C1", audit.fitted_C1), ("C2", audit.fitted_C2), ("max_violation", audit.max_violation)]


def cmd_liouville(args, report):
    if args.graph:
        raise UsageError("liouville sweeps generated families; --graph is not supported")
    sweep = dichotomy_sweep(
        args.family,
        args.lambdas,
        args.radius,
        seed=args.seed,
        degree=args.degree,
        t_star=args.t_star,
        time_grid=args.time_grid,
        rate_tol=args.rate_tol,
        tol=args.tol,
        autoscale=args.autoscale,
    )
    header = ["family", "lambda", "radius", "spatial_rate", "temporal_rate", "support", "stationary", "harmonic", "consistent"]
    rows = []
    lower_ok = True
    for r in sweep.rows:
        v = r.verdict
        if v is None:
            rows.append((r.family, r.lam, r.radius, None, None, r.error, None, None, None))
            continue
        c = v.classification
        rows.append((r.family, r.lam, r.radius, c.spatial_rate, c.temporal_rate, v.measure_support,
                     v.stationary, v.harmonic, v.consistent_with_theorem))
        if r.lam > 0:
            lower_ok &= c.spatial_rate >= spatial_lower_bound(r.lam, r.c0) - args.slack
    report.add_table("verdicts.csv", header, rows)
    report.results.update(
        rows=[dict(zip(header, row)) for row in rows],
        tolerances={"rate_tol": args.rate_tol, "tol": args.tol, "slack": args.slack},
        seed=args.seed,
        scope="single-atom solutions built from exhaustion eigenfunctions on the truncation",
    )
    report.check("all_consistent", sweep.all_consistent)
    report.check("spatial_lower_bound", lower_ok)
    return rows


HANDLERS = {
    "gen": cmd_gen,
    "lambda1": cmd_lambda1,
    "eigfn": cmd_eigfn,
    "growth": cmd_growth,
    "heat": cmd_heat,
    "synth": cmd_synth,
    "harnack": cmd_harnack,
    "liouville": cmd_liouville,
}


def _print_pretty(rows, stream):
    for row in rows:
        cells = row if isinstance(row, (list, tuple)) else (row,)
        stream.write("  ".join(f"{fmt(c) if not isinstance(c, float) else format(c, '.6g'):>14}" for c in cells) + "\n")


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = parse_args(list(sys.argv[1:] if argv is None else argv))
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    out_dir = args.out or os.environ.get("HEATLAB_OUT") or "heatlab_out"
    args.out = out_dir
    report = RunReport(command=args.command, config=_config_echo(args))
    try:
        with _timed(report, args.command):
            rows = HANDLERS[args.command](args, report)
        emit_report(report, out_dir)
    except UsageError as exc:
        stderr.write(f"heatlab {args.command}: {exc}\n")
        return EXIT_USAGE
    except (IoError, OSError) as exc:
        stderr.write(f"heatlab {args.command}: I/O error: {exc}\n")
        return EXIT_USAGE
    except HeatlabError as exc:
        stderr.write(f"heatlab {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_USAGE

    if args.pretty:
        _print_pretty(rows, stdout)
    for name, ok in report.checks.items():
        stdout.write(f"{'PASS' if ok else 'FAIL'} {name}\n")
    stdout.write(f"reports written to {out_dir}\n")
    return EXIT_OK if report.passed else EXIT_CHECKS


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
