"""Command-line interface.

Subcommands: allocate (one scheme on one problem file), simulate (macro /
uncertainty / micro experiments), nash (equilibrium report for a problem
file), oracle-check (cross-validate the allocators against the reference
solvers).  JSON in, JSON/CSV out; exit codes: 0 ok, 1 verification failure,
2 input error, 3 domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import game, itf, metrics, oracle, sim
from .model import (
    STREAM_SCENARIO,
    AllocationProblem,
    allocation_to_dict,
    generate_scenario,
    problem_from_dict,
    scenario_config_from_dict,
    substream,
)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_INPUT = 2
EXIT_DOMAIN = 3


def _fail(code: int, kind: str, message: str) -> int:
    print(f"quotasim: {kind}: {message}", file=sys.stderr)
    return code


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _num(x: float) -> float:
    return float(f"{x:.12g}")


# ---------------------------------------------------------------------------
# allocate
# ---------------------------------------------------------------------------

def cmd_allocate(args: argparse.Namespace) -> int:
    try:
        problem = problem_from_dict(_load_json(args.input))
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(EXIT_INPUT, "input-error", str(exc))
    try:
        allocation, _ = sim.apply_scheme(args.scheme, problem)
    except ValueError as exc:
        return _fail(EXIT_DOMAIN, "domain-error", str(exc))
    doc = allocation_to_dict(allocation)
    if args.output:
        Path(args.output).write_text(json.dumps(doc, indent=2) + "\n")
    else:
        print(json.dumps(doc, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        doc = _load_json(args.config)
        config = scenario_config_from_dict(doc)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(EXIT_INPUT, "input-error", str(exc))
    if args.seed is not None or args.rounds is not None:
        from dataclasses import replace

        config = replace(
            config,
            seed=config.seed if args.seed is None else args.seed,
            rounds=config.rounds if args.rounds is None else args.rounds,
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.mode == "macro":
        schemes = tuple(args.schemes.split(",")) if args.schemes else sim.DEFAULT_MACRO_SCHEMES
        try:
            report = sim.run_macro_experiment(config, schemes)
        except ValueError as exc:
            return _fail(EXIT_INPUT, "input-error", str(exc))
        sim.write_round_csv(out_dir / "rounds.csv", report)
        (out_dir / "report.json").write_text(
            json.dumps(sim.report_to_dict(report), indent=2) + "\n"
        )
        print(f"{'scheme':>8} {'welfare':>12} {'jain':>8} {'vs-ne':>8}")
        for agg in report.aggregates:
            print(
                f"{agg.scheme:>8} {agg.welfare_mean:12.4f} {agg.jain_mean:8.4f} "
                f"{agg.ne_fraction_mean:8.4f}"
            )
        return EXIT_OK

    if args.mode == "uncertainty":
        methods = [args.method] if args.method else ["evm", "ccp"]
        rows = {}
        for method in methods:
            outcome = sim.run_uncertainty_experiment(config, method)
            if method == "ccp" and args.burst:
                outcome = sim.run_burst_phase(outcome, sim.burst_rng(config))
            rows[method] = outcome
        doc_out = {
            method: {
                "over_provision_count": outcome.over_provision_count,
                "welfare": _num(outcome.welfare),
                "q_ext": _num(outcome.q_ext),
                "total_granted": _num(outcome.total_granted),
            }
            for method, outcome in rows.items()
        }
        (out_dir / "uncertainty.json").write_text(json.dumps(doc_out, indent=2) + "\n")
        for method, outcome in rows.items():
            print(
                f"{method}: over-provisioned {outcome.over_provision_count}"
                f"/{config.n_users}, welfare {outcome.welfare:.4f}"
            )
        return EXIT_OK

    if args.mode == "micro":
        schemes = tuple(args.schemes.split(",")) if args.schemes else sim.DEFAULT_MICRO_SCHEMES
        population = sim.WELCOME_USERS if args.population == "welcome" else sim.UNWELCOME_USERS
        try:
            report = sim.run_micro_study(population, schemes=schemes, n_total=config.n_users)
        except ValueError as exc:
            return _fail(EXIT_INPUT, "input-error", str(exc))
        doc_out = sim.micro_report_to_dict(report)
        (out_dir / "micro.json").write_text(json.dumps(doc_out, indent=2) + "\n")
        print(f"{'user':>18} " + " ".join(f"{s:>10}" for s in report.schemes))
        for row in doc_out["users"]:
            cells = " ".join(
                f"{row[s]['quota_over_demand']:10.4f}" for s in report.schemes
            )
            print(f"{row['label']:>18} {cells}")
        return EXIT_OK

    return _fail(EXIT_INPUT, "input-error", f"unknown mode {args.mode!r}")


# ---------------------------------------------------------------------------
# nash
# ---------------------------------------------------------------------------

def cmd_nash(args: argparse.Namespace) -> int:
    try:
        problem = problem_from_dict(_load_json(args.input))
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(EXIT_INPUT, "input-error", str(exc))
    psi, cost = problem.psi, problem.cost
    try:
        profile = game.nash_demands(psi, cost, problem.qos, problem.q_total)
        bound = game.welfare_bound(psi, cost, problem.qos)
    except ValueError as exc:
        return _fail(EXIT_DOMAIN, "domain-error", str(exc))
    diag = game.check_ne_conditions(profile, psi, cost, problem.qos, problem.q_total)
    gains = [
        game.deviation_sweep(i, profile, psi, cost, problem.qos, problem.q_total)
        for i in range(problem.n)
    ]
    doc = {
        "demands": [_num(d) for d in profile.demands],
        "total_residual": _num(diag.total_residual),
        "level_spread": _num(diag.level_spread),
        "welfare_bound": _num(bound),
        "max_deviation_gain": _num(max(gains)),
    }
    print(json.dumps(doc, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle-check
# ---------------------------------------------------------------------------

def _random_problem(rng: np.random.Generator, n: int) -> AllocationProblem:
    psi = rng.uniform(0.0, 1.0, n)
    cost = np.maximum(np.abs(rng.normal(psi, np.maximum(psi, 1e-3))), 1e-6)
    demand = rng.uniform(0.0, 1.0, n)
    qos = max(1e-3 * psi.sum(), 1e-6)
    q_total = rng.uniform(0.4, 0.95) * demand.sum()
    return AllocationProblem.from_arrays(
        psi=psi, cost=cost, demand=demand, q_total=q_total, qos=qos
    )


def cmd_oracle_check(args: argparse.Namespace) -> int:
    rng = substream(args.seed, STREAM_SCENARIO, 0)
    checks: list[tuple[str, float, float, bool]] = []

    worst = 0.0
    for _ in range(args.instances):
        n = int(rng.integers(2, 51))
        problem = _random_problem(rng, n)
        if problem.demand.sum() <= problem.q_total:
            continue
        q_main = itf.allocate_itf(problem).quotas
        q_ref = oracle.waterfill_bisection(problem).quotas
        worst = max(worst, float(np.abs(q_main - q_ref).max()))
    checks.append(("fill-level vs bisection (max |dq|)", worst, 1e-8, worst < 1e-8))

    worst = 0.0
    for _ in range(max(args.instances // 4, 0)):
        problem = _random_problem(rng, int(rng.integers(2, 4)))
        w_main = metrics.welfare(itf.allocate_itf(problem), problem)
        _, w_grid = oracle.grid_welfare_max(problem, step=0.05 * problem.q_total)
        worst = max(worst, w_grid - w_main)
    checks.append(("grid search never beats allocator (max gap)", worst, 1e-12, worst <= 1e-12))

    worst = 0.0
    for _ in range(max(args.instances // 4, 0)):
        problem = _random_problem(rng, int(rng.integers(2, 9)))
        w_main = metrics.welfare(itf.allocate_itf(problem), problem)
        w_pga = metrics.welfare(oracle.projected_ascent_welfare(problem), problem)
        worst = max(worst, abs(w_main - w_pga))
    checks.append(("projected ascent agreement (max |dw|)", worst, 1e-6, worst < 1e-6))

    worst = 0.0
    ok = True
    for k in range(max(args.instances // 10, 0)):
        problem = _random_problem(rng, 30)
        if problem.demand.sum() <= problem.q_total:
            continue
        from .idf import allocate_idf

        violations = oracle.maxmin_transfer_search(
            allocate_idf(problem), problem, trials=2000, seed=int(rng.integers(2**32))
        )
        worst = max(worst, float(len(violations)))
        ok = ok and not violations
    checks.append(("demand-fair allocator max-min violations", worst, 0.0, ok))

    failed = False
    for name, value, tol, passed in checks:
        status = "pass" if passed else "FAIL"
        print(f"[{status}] {name}: {value:.3g} (tolerance {tol:g})")
        failed = failed or not passed
    if args.instances == 0:
        print("zero instances requested; nothing checked")
    return EXIT_VERIFICATION if failed else EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quotasim",
        description="Demand-based service-quota allocation and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_alloc = sub.add_parser("allocate", help="run one allocation scheme on a problem file")
    p_alloc.add_argument("--scheme", required=True, choices=sim.SCHEME_IDS)
    p_alloc.add_argument("--input", required=True, help="AllocationProblem JSON path")
    p_alloc.add_argument("--output", help="Allocation JSON path (stdout when omitted)")
    p_alloc.set_defaults(func=cmd_allocate)

    p_sim = sub.add_parser("simulate", help="run a configured experiment")
    p_sim.add_argument("--config", required=True, help="ScenarioConfig JSON path")
    p_sim.add_argument("--mode", choices=("macro", "uncertainty", "micro"), default="macro")
    p_sim.add_argument("--schemes", help="comma-separated scheme ids (mode-specific default)")
    p_sim.add_argument("--method", choices=("evm", "ccp"), help="uncertainty mode method")
    p_sim.add_argument("--burst", action="store_true", help="add the burst phase after ccp")
    p_sim.add_argument("--population", choices=("unwelcome", "welcome"), default="unwelcome")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--rounds", type=int, help="override the config round count")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_nash = sub.add_parser("nash", help="equilibrium demands and diagnostics")
    p_nash.add_argument("--input", required=True, help="AllocationProblem JSON path")
    p_nash.set_defaults(func=cmd_nash)

    p_oracle = sub.add_parser("oracle-check", help="cross-validate allocators against reference solvers")
    p_oracle.add_argument("--instances", type=int, default=200)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
