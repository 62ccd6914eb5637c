"""Command-line interface.

Subcommands
-----------
dare        solve the Riccati equation for a configured plant
simulate    generate one excited trajectory and write it as CSV
solve-ce    simulate and solve the certainty-equivalence program
solve-rp    simulate and solve the regularized program
check-pe    persistency-of-excitation report for a trajectory CSV
experiment  run a full Monte Carlo sweep from a YAML config

``dare``, ``simulate``, ``solve-ce``, and ``solve-rp`` read a plant config
(keys ``system``/``weights`` or presets); ``experiment`` reads the richer
sweep config understood by :func:`ddd_lqr_lab.experiments.parse_config`.
Solve subcommands exit 0 only when the solver reports Optimal; the
experiment subcommand exits 0 when every cell is Optimal or the config sets
``allow_failures: true``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._util import spectral_radius
from .excitation import pe_check
from .experiments import (
    all_cells_ok,
    parse_config,
    run_ce_experiment,
    run_rp_sweep,
    write_outputs,
)
from .lmi import dump_problem
from .lti import (
    benchmark_system,
    identity_weights,
    load_plant_config,
    simulate,
    trajectory_from_csv,
    trajectory_to_csv,
)
from .programs import build_ce, build_rp, solve_ce, solve_rp
from .riccati import closed_loop, solve_dare


def _plant(config_path):
    if config_path is None:
        system = benchmark_system()
        return system, identity_weights(system.n, system.m)
    return load_plant_config(config_path)


def _matrix_lines(name: str, M: np.ndarray) -> str:
    body = np.array2string(M, separator=", ", precision=10, suppress_small=False)
    return f"{name} =\n{body}"


def _cmd_dare(args) -> int:
    system, weights = _plant(args.config)
    sol = solve_dare(system, weights)
    rho_open = spectral_radius(system.A)
    rho_closed = spectral_radius(closed_loop(system, sol.K))
    if args.json:
        payload = {
            "P": sol.P.tolist(),
            "K": sol.K.tolist(),
            "residual": sol.residual,
            "iterations": sol.iterations,
            "spectral_radius_open_loop": rho_open,
            "spectral_radius_closed_loop": rho_closed,
        }
        print(json.dumps(payload, indent=2))
    else:
        print(_matrix_lines("P", sol.P))
        print(_matrix_lines("K", sol.K))
        print(f"residual = {sol.residual:.3e} ({sol.iterations} iterations)")
        print(f"spectral radius: open loop {rho_open:.6f}, closed loop {rho_closed:.6f}")
    return 0


def _cmd_simulate(args) -> int:
    system, _ = _plant(args.config)
    data = simulate(system, T=args.T, seed=args.seed, mode=args.mode)
    out = Path(args.out)
    trajectory_to_csv(data, out)
    print(f"wrote {data.T} steps (n={data.n}, m={data.m}, mode={data.noise_mode}) to {out}")
    return 0


def _solution_payload(sol) -> dict:
    payload = {
        "status": sol.solver_status.value,
        "objective": sol.objective,
        "K": sol.K.tolist() if sol.K is not None else None,
    }
    payload.update(sol.diagnostics)
    return payload


def _cmd_solve_ce(args) -> int:
    system, weights = _plant(args.config)
    data = simulate(system, T=args.T, seed=args.seed)
    if args.dump_problem:
        dump_problem(build_ce(data, weights), args.dump_problem)
    sol = solve_ce(data, weights)
    print(json.dumps(_solution_payload(sol), indent=2, default=float))
    return 0 if sol.solver_status.value == "Optimal" else 1


def _cmd_solve_rp(args) -> int:
    system, weights = _plant(args.config)
    data = simulate(system, T=args.T, seed=args.seed)
    if args.dump_problem:
        dump_problem(build_rp(data, weights, args.eta, form=args.form), args.dump_problem)
    sol = solve_rp(data, weights, args.eta, form=args.form)
    print(json.dumps(_solution_payload(sol), indent=2, default=float))
    return 0 if sol.solver_status.value == "Optimal" else 1


_PE_SIGNALS = {"input", "state", "input-noise"}


def _cmd_check_pe(args) -> int:
    X, U, W = trajectory_from_csv(args.trajectory)
    if args.signal == "input":
        F = U
    elif args.signal == "state":
        F = X
    else:
        F = np.vstack([U, W])
    report = pe_check(F, args.depth)
    print(json.dumps(dataclasses.asdict(report), indent=2, default=float))
    return 0


def _cmd_experiment(args) -> int:
    config = parse_config(
        args.config, overrides={"out_dir": args.out, "base_seed": args.seed}
    )
    if args.kind == "rp-fixed" and config.eta_policy.kind != "fixed":
        raise SystemExit("rp-fixed requires a fixed eta policy (eta: {fixed: ...})")
    if args.kind == "rp-growing" and config.eta_policy.kind != "linear":
        raise SystemExit("rp-growing requires a linear eta policy (eta: {linear: ...})")

    outcomes = None
    if args.kind == "ce":
        records, summary, reports, outcomes = run_ce_experiment(config, jobs=args.jobs)
    else:
        records, summary, reports = run_rp_sweep(
            config, jobs=args.jobs, experiment_id=args.kind
        )

    out_dir = config.out_dir if config.out_dir is not None else Path(f"results-{args.kind}")
    write_outputs(
        out_dir, config, args.kind, records, summary, reports,
        outcomes=outcomes, jobs=args.jobs,
    )

    for row in summary:
        mean_k = "-" if row.mean_norm_K is None else f"{row.mean_norm_K:.6f}"
        print(
            f"{row.experiment_id} T={row.T}: {row.optimal_runs}/{row.runs} optimal, "
            f"mean |K| = {mean_k}"
        )
    if outcomes:
        for o in outcomes:
            print(
                f"{o.case} T={o.T}: max |K - K_lqr| = {o.max_err_vs_lqr:.3e}, "
                f"max |K - prediction| = {o.max_err_vs_prediction:.3e}, "
                f"closed-loop radius >= {o.min_closed_loop_radius:.4f}"
            )
    print(f"outputs in {out_dir}")

    ok = all_cells_ok(records) or config.allow_failures
    if not ok:
        bad = sum(1 for r in records if r.solver_status != "Optimal")
        print(f"{bad} of {len(records)} cells did not reach Optimal", file=sys.stderr)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddd-lqr-lab",
        description="Data-driven LQR programs, their closed-form checks, and sweeps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dare", help="solve the Riccati equation for the configured plant")
    p.add_argument("--config", help="plant config (YAML); defaults to the benchmark plant")
    p.add_argument("--json", action="store_true", help="emit JSON instead of plain text")
    p.set_defaults(func=_cmd_dare)

    p = sub.add_parser("simulate", help="generate one excited trajectory as CSV")
    p.add_argument("--config", help="plant config (YAML)")
    p.add_argument("--T", type=int, required=True, help="trajectory length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["process", "measurement"], default="process")
    p.add_argument("--out", default="trajectory.csv", help="output CSV path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("solve-ce", help="solve the certainty-equivalence program")
    p.add_argument("--config", help="plant config (YAML)")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-problem", help="also write the conic problem as JSON")
    p.set_defaults(func=_cmd_solve_ce)

    p = sub.add_parser("solve-rp", help="solve the regularized program")
    p.add_argument("--config", help="plant config (YAML)")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--eta", type=float, required=True, help="regularization weight")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--form", choices=["full", "epigraph"], default="epigraph")
    p.add_argument("--dump-problem", help="also write the conic problem as JSON")
    p.set_defaults(func=_cmd_solve_rp)

    p = sub.add_parser("check-pe", help="persistency-of-excitation report for a CSV")
    p.add_argument("trajectory", help="trajectory CSV (from `simulate`)")
    p.add_argument("--depth", type=int, required=True, help="Hankel depth k")
    p.add_argument("--signal", choices=sorted(_PE_SIGNALS), default="input")
    p.set_defaults(func=_cmd_check_pe)

    p = sub.add_parser("experiment", help="run a Monte Carlo sweep from a YAML config")
    p.add_argument("kind", choices=["ce", "rp-fixed", "rp-growing"])
    p.add_argument("--config", required=True, help="experiment config (YAML)")
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--seed", type=int, help="override the config base_seed")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
