"""Command-line interface: ``scenopt {bound,bench,solve,opf,validate}``.

Exit codes: 0 success, 1 solver failure, 2 configuration error, 3 I/O error.
JSON reports are written with sorted keys and contain no timings, so equal
configurations produce byte-identical output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .opf import (OpfConfig, build_adaptive_opf, decision_from_solution, fitted_mapping,
                  load_case, load_uncertainty, opf_posterior, sample_load_scenarios)
from .opf.model import AdaptiveOpfDecision, balance_residual
from .posterior import default_fresh_count, empirical_violation, support_scenarios
from .program import ConstraintTemplate, Mode, QuadRow, ScenarioProgram, build_deterministic, epigraph_objective
from .sizing import ChanceSpec, ScenarioCapError, binomial_tail, min_scenarios, pd_grid_count
from .solver import SolverConfig, solve_convex
from .uncertainty import (AffineMap, Box, EndogenousSet, Polytope, ScenarioSet, grid_samples,
                          reformulate_enu, sample_uniform)

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

# uncertain-load counts implied by the published grid sizes (5**m and 7**m)
REF_M = {"five_bus": 4, "case57": 42, "case118": 91}
REF_LABEL = {"five_bus": "IEEE5", "case57": "IEEE57", "case118": "IEEE118"}
REF_RS = {"five_bus": "0.5k", "case57": "4k", "case118": "9.8k"}
REF_PD = {("ExU", "five_bus"): "0.6k", ("ExU", "case57"): "2.2e29", ("ExU", "case118"): "4e63",
            ("EnU", "five_bus"): "2.4k", ("EnU", "case57"): "3e35", ("EnU", "case118"): "8e76"}


class ConfigError(ValueError):
    pass


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _floats(v):
    return [float(x) for x in np.asarray(v, dtype=float).ravel()]


def _spec(args):
    return ChanceSpec(int(args.n), float(args.alpha), float(args.epsilon))


# bound

def cmd_bound(args):
    spec = _spec(args)
    N = min_scenarios(spec, cap=args.cap)
    lines = [f"n          {spec.n}", f"alpha      {spec.alpha:g}", f"epsilon    {spec.epsilon:g}",
             f"N          {N}",
             f"tail(N)    {binomial_tail(N, spec.n, spec.alpha):.6g}"]
    if N > 1:
        lines.append(f"tail(N-1)  {binomial_tail(N - 1, spec.n, spec.alpha):.6g}")
    lines.append(f"target     {1 - spec.epsilon:.6g}")
    for b, m in args.pd or ():
        count = pd_grid_count(b, m)
        lines.append(f"PD {b}^{m}    {count.short_format()} ({count})")
    print("\n".join(lines))
    return EXIT_OK


# bench

def _bench_scenarios(net, method, mapping, cfg, b, N, seed):
    if method == "RS":
        return sample_load_scenarios(net, N, seed, mapping, cfg)
    region = load_uncertainty(net, mapping, cfg)
    box = region if isinstance(region, Box) else region.bounding_box
    return grid_samples(list(zip(box.lower, box.upper)), b, cap=10**18)


def cmd_bench(args):
    spec = ChanceSpec(1, args.alpha, args.epsilon)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = ["uncertainty", "method", "system", "m", "n", "count", "exact", "reference", "time_s"]
    writer.writerow(header)
    cfg = OpfConfig(delta=args.delta, kappa=args.kappa)
    for utype in ("ExU", "EnU"):
        for system in args.systems:
            net = load_case(system)
            G = len(net.generators)
            n = 2 * G + 1
            m_fixture = len(net.load_buses(cfg.uncertain))
            m = REF_M.get(system, m_fixture) if args.m_source == "reference" else m_fixture
            mapping = fitted_mapping(net, seed=args.seed, cfg=cfg) if utype == "EnU" else None
            b = args.b_exu if utype == "ExU" else args.b_enu
            label = REF_LABEL.get(system, system)
            for method in ("PD", "RS"):
                if method == "PD":
                    count = pd_grid_count(b, m)
                    exact = str(count.exact) if count.exact is not None else f"{count.mantissa:.4f}e{count.exponent10}"
                    ref = REF_PD.get((utype, system), "")
                    solvable = not count.exceeds(args.cap) and m == m_fixture
                    N = count.exact if solvable else None
                else:
                    N = min_scenarios(ChanceSpec(n, spec.alpha, spec.epsilon))
                    count = pd_grid_count(N, 1)
                    exact = str(N)
                    ref = REF_RS.get(system, "")
                    solvable = True
                rows = None if N is None else N * (2 * G + 2 * len(net.lines))
                timing = "-"
                if solvable and not args.no_timing and rows <= args.max_rows:
                    scen = _bench_scenarios(net, method, mapping, cfg, b, N, args.seed)
                    t0 = time.perf_counter()
                    sp = build_adaptive_opf(net, scen, mapping, cfg)
                    sol = solve_convex(build_deterministic(sp))
                    elapsed = time.perf_counter() - t0
                    timing = f"{elapsed:.3f}" if sol.optimal else sol.status.value
                writer.writerow([utype, method, label, m, n, count.short_format(), exact, ref, timing])
    _write(out.getvalue(), args.output)
    return EXIT_OK


# solve

_PROBLEM_KEYS = {"objective", "template", "fixed", "cost", "exo", "enu", "mapping", "enu_set",
                 "mode", "support_dim"}
_TEMPLATE_KEYS = {"Fx", "f0", "Fu", "Fv", "Fxu", "Fxv", "quad", "equality"}


def _uset(spec):
    if "box" in spec:
        return Box(spec["box"]["lower"], spec["box"]["upper"])
    if "polytope" in spec:
        return Polytope(spec["polytope"]["G"], spec["polytope"]["g0"])
    raise ConfigError("uncertainty needs a 'box' or 'polytope' entry")


def _quad(d):
    return QuadRow(d["Q"], d["a"], d.get("c", 0.0))


def load_problem(problem: dict, count, seed):
    """ScenarioProgram from a JSON problem description.

    ``exo`` / ``enu`` give either explicit ``scenarios`` or an uncertainty
    set (``box`` or ``polytope``) to sample ``count`` points from. An
    ``enu_set`` with a ``mapping`` is reformulated before sampling.
    """
    unknown = set(problem) - _PROBLEM_KEYS
    if unknown:
        raise ConfigError(f"unknown problem keys: {sorted(unknown)}")
    t = problem["template"]
    bad = set(t) - _TEMPLATE_KEYS
    if bad:
        raise ConfigError(f"unknown template keys: {sorted(bad)}")
    quad = [_quad(q) for q in t.get("quad", [])]
    Fx = np.atleast_2d(np.asarray(t["Fx"], dtype=float))
    f0 = np.asarray(t["f0"], dtype=float)
    I = np.asarray(t["Fu"]).shape[1] if "Fu" in t else 0
    J = np.asarray(t["Fv"]).shape[1] if "Fv" in t else 0
    template = ConstraintTemplate(Fx, f0, t.get("Fu"), t.get("Fv"), t.get("Fxu"), t.get("Fxv"),
                                  quad, t.get("equality"), I=I, J=J)
    mapping = AffineMap(problem["mapping"]["A"], problem["mapping"]["b"]) if "mapping" in problem else None

    def scenarios(key, region, offset):
        spec = problem.get(key)
        if spec is None and region is None:
            return None
        if spec is not None and "scenarios" in spec:
            return ScenarioSet(np.asarray(spec["scenarios"], dtype=float).reshape(-1, template.I if key == "exo" else template.J))
        region = region or _uset(spec)
        return sample_uniform(region, count, seed + offset)

    enu_region = None
    if "enu_set" in problem:
        if mapping is None:
            raise ConfigError("enu_set requires a mapping")
        e = problem["enu_set"]
        enu_region = reformulate_enu(EndogenousSet(e["Gv"], e["Gx"], e["g0"]), mapping)
    exo = scenarios("exo", None, 0) if template.I else None
    enu = scenarios("enu", enu_region, 1_000_003) if template.J else None
    if exo is None and enu is None:
        exo = ScenarioSet(np.zeros((1, 0)))  # no uncertain inputs: one copy of the rows
    fixed = problem.get("fixed", {})
    sp = ScenarioProgram(problem["objective"], template, exo, enu, mapping,
                         Mode(problem.get("mode", "Plain")),
                         fixed.get("A"), fixed.get("b"),
                         tuple(_quad(q) for q in fixed.get("quad", [])),
                         problem.get("support_dim"))
    if "cost" in problem:
        sp = epigraph_objective(sp, _quad(problem["cost"]))
    return sp


def _scenario_count(args, n):
    if args.scenarios == "auto":
        return min_scenarios(ChanceSpec(n, args.alpha, args.epsilon))
    try:
        N = int(args.scenarios)
    except ValueError:
        raise ConfigError(f"--scenarios must be an integer or 'auto', got {args.scenarios!r}") from None
    if N < 1:
        raise ConfigError("--scenarios must be positive")
    return N


def _echo(args, keys):
    return {k: getattr(args, k) for k in keys}


def cmd_solve(args):
    problem = json.loads(Path(args.problem).read_text())
    n_dim = problem.get("support_dim") or len(problem["objective"]) + ("cost" in problem)
    N = _scenario_count(args, n_dim)
    sp = load_problem(problem, N, args.seed)
    cp = build_deterministic(sp)
    sol = solve_convex(cp, SolverConfig())
    report = {"command": "solve", "status": sol.status.value,
              "config": _echo(args, ["problem", "scenarios", "alpha", "epsilon", "seed"]),
              "N_used": sp.scenario_count, "n": sp.support_dim}
    if sol.optimal:
        sup = support_scenarios(cp, sol)
        report.update(x=_floats(sol.x), objective=float(sol.objective),
                      support_count=sup.count, support_indices=sup.support_indices,
                      proposition_holds=sup.proposition_holds, degenerate=sup.degenerate,
                      basis_support_count=len(sup.basis_indices))
    _write(dump_json(report), args.output)
    return EXIT_OK if sol.optimal else EXIT_SOLVER


def _opf_config(args):
    return OpfConfig(delta=args.delta, kappa=args.kappa, uncertain=args.uncertain)


def cmd_opf(args):
    net = load_case(args.case)
    cfg = _opf_config(args)
    G = len(net.generators)
    N = _scenario_count(args, 2 * G + 1)
    mapping = fitted_mapping(net, seed=args.seed, cfg=cfg) if args.enu else None
    sp = build_adaptive_opf(net, N, mapping, cfg, seed=args.seed)
    cp = build_deterministic(sp)
    sol = solve_convex(cp, SolverConfig())
    config = _echo(args, ["case", "scenarios", "alpha", "epsilon", "seed", "enu", "delta",
                          "kappa", "uncertain", "fresh"])
    config["case_name"] = net.name
    report = {"command": "opf", "status": sol.status.value, "config": config, "N_used": N,
              "n": 2 * G + 1, "uncertainty": sp.meta["uncertainty"]}
    if not sol.optimal:
        _write(dump_json(report), args.output)
        return EXIT_SOLVER
    dec = decision_from_solution(net, sol)
    sup = support_scenarios(cp, sol)
    scen = sp.enu_scenarios if mapping is not None else sp.exo_scenarios
    fresh_n = args.fresh or default_fresh_count(args.alpha)
    fresh = sample_load_scenarios(net, fresh_n, args.seed + 1, mapping, cfg)
    viol = opf_posterior(net, dec, fresh, cfg)
    report.update(
        objective=float(sol.objective), p_base=_floats(dec.p_base), beta=_floats(dec.beta),
        beta_sum=float(np.sum(dec.beta)),
        max_balance_residual=float(np.abs(balance_residual(net, dec, scen.points)).max()),
        support_count=sup.count, proposition_holds=sup.proposition_holds,
        degenerate=sup.degenerate, basis_support_count=len(sup.basis_indices),
        alpha_hat=viol.alpha_hat, fresh_trials=viol.trials)
    if mapping is not None:
        report["mapping"] = {"A": [_floats(r) for r in mapping.A], "b": _floats(mapping.b)}
    _write(dump_json(report), args.output)
    return EXIT_OK


# validate

def cmd_validate(args):
    report = json.loads(Path(args.report).read_text())
    kind = report.get("command")
    if report.get("status") != "Optimal":
        raise ConfigError("report does not hold an optimal solution")
    results = []
    if kind == "opf":
        conf = report["config"]
        net = load_case(conf["case"])
        cfg = OpfConfig(delta=conf["delta"], kappa=conf["kappa"], uncertain=conf["uncertain"])
        dec = AdaptiveOpfDecision(np.array(report["p_base"]), np.array(report["beta"]),
                                  float(report["objective"]))
        mapping = AffineMap(report["mapping"]["A"], report["mapping"]["b"]) if "mapping" in report else None
        fresh_n = args.fresh or default_fresh_count(conf["alpha"])
        for r in range(args.repeats):
            fresh = sample_load_scenarios(net, fresh_n, args.seed + r, mapping, cfg)
            results.append(opf_posterior(net, dec, fresh, cfg))
        alpha = conf["alpha"]
    elif kind == "solve":
        conf = report["config"]
        problem = json.loads(Path(conf["problem"]).read_text())
        alpha = conf["alpha"]
        fresh_n = args.fresh or default_fresh_count(alpha)
        x = np.array(report["x"])
        for r in range(args.repeats):
            sp = load_problem(problem, fresh_n, args.seed + r)
            fresh_u = sp.exo_scenarios.points if sp.exo_scenarios is not None else None
            fresh_v = sp.enu_scenarios.points if sp.enu_scenarios is not None else None
            t = sp.template
            U = fresh_u if fresh_u is not None else np.zeros((fresh_n, t.I))
            V = fresh_v if fresh_v is not None else np.zeros((fresh_n, t.J))
            results.append(empirical_violation(t, x, U, V))
    else:
        raise ConfigError(f"cannot validate a report of kind {kind!r}")
    out = {"command": "validate", "report": args.report, "seed": args.seed,
           "repeats": args.repeats, "alpha": alpha,
           "alpha_hat": results[0].alpha_hat, "trials": results[0].trials,
           "alpha_hats": [r.alpha_hat for r in results],
           "within_alpha": sum(r.alpha_hat <= alpha for r in results)}
    _write(dump_json(out), args.output)
    return EXIT_OK


# argument parsing

def _unit(name):
    def parse(text):
        v = float(text)
        if not 0.0 < v < 1.0:
            raise argparse.ArgumentTypeError(f"{name} must lie in (0, 1), got {text}")
        return v
    return parse


def _pd_pair(text):
    try:
        b, m = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected B:M, got {text!r}") from None
    return b, m


def _add_chance(p):
    p.add_argument("--alpha", type=_unit("alpha"), default=0.05)
    p.add_argument("--epsilon", type=_unit("epsilon"), default=0.95)


def build_parser():
    parser = argparse.ArgumentParser(prog="scenopt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file of option defaults for the subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="scenario count for a chance constraint")
    p.add_argument("--n", type=int, default=1)
    _add_chance(p)
    p.add_argument("--pd", type=_pd_pair, action="append", metavar="B:M",
                   help="also show the grid size B**M")
    p.add_argument("--cap", type=int, default=10**9)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("bench", help="scenario counts and solve times per test system")
    p.add_argument("--systems", nargs="+", default=["five_bus", "case57", "case118"])
    p.add_argument("--b-exu", type=int, default=5)
    p.add_argument("--b-enu", type=int, default=7)
    _add_chance(p)
    p.add_argument("--cap", type=int, default=10**6, help="largest grid that is materialized")
    p.add_argument("--max-rows", type=int, default=200_000, help="largest LP that is timed")
    p.add_argument("--m-source", choices=["reference", "fixture"], default="reference",
                   help="uncertain-load count: published grid sizes or the case file")
    p.add_argument("--no-timing", action="store_true")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--kappa", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("solve", help="solve a scenario program described in JSON")
    p.add_argument("--problem", required=True)
    p.add_argument("--scenarios", default="auto")
    _add_chance(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("opf", help="adaptive DC-OPF on a case file")
    p.add_argument("--case", required=True)
    p.add_argument("--scenarios", default="auto")
    _add_chance(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--enu", action="store_true", help="decision-dependent load deviations")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--kappa", type=float, default=0.2)
    p.add_argument("--uncertain", choices=["loaded", "pq"], default="loaded")
    p.add_argument("--fresh", type=int, default=0, help="out-of-sample scenarios (0: default)")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_opf)

    p = sub.add_parser("validate", help="out-of-sample check of a solve or opf report")
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--fresh", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_validate)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults from ``--config``; unknown keys are an error."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    data = json.loads(Path(args.config).read_text())
    known = {k for k in vars(args) if k not in ("func", "command", "config")}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**data)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"scenopt: {exc}", file=sys.stderr)
        return EXIT_IO
    except ScenarioCapError as exc:
        print(f"scenopt: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError, TypeError) as exc:
        print(f"scenopt: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"scenopt: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:  # argparse reports bad flags with exit code 2
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
