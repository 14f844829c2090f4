"""Command-line interface: simulate, equilibria, control, fit, sweep.

All outputs are deterministic: identical config and flags produce
byte-identical files.  Floats are written with 9 significant digits.
Exit codes: 0 success, 2 input/validation error, 3 integration blow-up,
4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import calibrate, equilibria
from .integrate import (
    BlowUpError,
    TimeGrid,
    check_invariant_region,
    integrate_forward,
    uptake_term_series,
)
from .optctl import control_end_time, forward_backward_sweep, peak_infective
from .scenarios import ConfigError, ScenarioConfig, load_config, yemen_config_path

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BLOWUP = 3
EXIT_NO_CONVERGENCE = 4

# Horizons used in the published scenario table, keyed by u_max.
CANONICAL_HORIZONS = {0.2: 354.0, 0.55: 100.0, 0.9: 70.0, 0.95: 70.0}


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_scenario(args) -> ScenarioConfig:
    return load_config(args.config)


def _parse_control(spec: str, n_nodes: int):
    """A numeric literal means a constant control; otherwise a schedule file
    with one value per line ('#' comments allowed)."""
    try:
        return float(spec)
    except ValueError:
        pass
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"control schedule file not found: {spec}")
    values = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            values.append(float(stripped))
        except ValueError as exc:
            raise ConfigError(f"{spec}:{lineno}: non-numeric control value") from exc
    if len(values) != n_nodes:
        raise ConfigError(
            f"schedule has {len(values)} values, grid needs {n_nodes}"
        )
    return np.array(values)


def cmd_simulate(args) -> int:
    cfg = _load_scenario(args)
    if args.horizon is not None:
        cfg = dataclasses.replace(cfg, horizon_days=args.horizon)
    if args.density is not None:
        cfg = dataclasses.replace(cfg, grid_density=args.density)
    grid = cfg.grid()
    control = _parse_control(args.control, grid.n_nodes)
    traj = integrate_forward(cfg.params, cfg.initial, control, grid)
    uptake = uptake_term_series(traj, cfg.params)
    rows = np.column_stack([traj.t, traj.states, uptake])
    _write_csv(args.out, ["t", "S", "I", "Q", "R", "B", "uptake"], rows)
    verdict = check_invariant_region(traj, cfg.params)
    if verdict.passed:
        print("invariant region: pass")
    else:
        print(f"invariant region: FAIL at t={_fmt(verdict.time)} ({verdict.reason})")
    return EXIT_OK


def _complex_pairs(values) -> list[list[float]] | None:
    if values is None:
        return None
    return [[float(v.real), float(v.imag)] for v in values]


def cmd_equilibria(args) -> int:
    cfg = _load_scenario(args)
    p = cfg.params
    report = equilibria.classify_stability(p)
    bif = equilibria.bifurcation_coefficients(p)
    doc = {
        "R0": report.R0,
        "a1": p.a1,
        "a2": p.a2,
        "a3": p.a3,
        "dfe": dataclasses.asdict(report.dfe),
        "dfe_eigenvalues": _complex_pairs(report.dfe_eigenvalues),
        "dfe_stable": report.dfe_stable,
        "ee": dataclasses.asdict(report.ee) if report.ee is not None else None,
        "ee_feasible": report.ee_feasible,
        "ee_eigenvalues": _complex_pairs(report.ee_eigenvalues),
        "ee_stable": report.ee_stable,
        "lambda_star": report.composite.lambda_star if report.composite else None,
        "D": report.composite.D if report.composite else None,
        "beta_star": bif.beta_star,
        "a_coeff": bif.a_coeff,
        "b_coeff": bif.b_coeff,
    }
    if args.json:
        text = json.dumps(doc, indent=2, sort_keys=True)
    else:
        lines = [f"{key} = {value}" for key, value in doc.items()]
        text = "\n".join(lines)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def _solution_summary(cfg: ScenarioConfig, solution) -> dict:
    t_peak, i_peak = peak_infective(solution.state_traj)
    first_off = next((r for r in solution.switching if r.direction == "u_max->0"), None)
    return {
        "u_max": cfg.params.u_max,
        "horizon_days": cfg.horizon_days,
        "J": solution.cost,
        "t_s": control_end_time(solution),
        "phi_slope": first_off.phi_slope if first_off else None,
        "switches": [
            {"t": r.t_switch, "slope": r.phi_slope, "direction": r.direction}
            for r in solution.switching
        ],
        "I_peak": i_peak,
        "t_peak": t_peak,
        "converged": solution.converged,
        "iterations": solution.iterations,
    }


def cmd_control(args) -> int:
    cfg = _load_scenario(args)
    if args.umax is not None:
        try:
            cfg = dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, u_max=args.umax))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if args.horizon is not None:
        cfg = dataclasses.replace(cfg, horizon_days=args.horizon)
    if not cfg.params.u_max > 0.0:
        raise ConfigError("u_max must be positive: the control problem is degenerate")
    grid = cfg.grid()
    solution = forward_backward_sweep(cfg.params, cfg.initial, grid)
    rows = np.column_stack([
        solution.state_traj.t,
        solution.control,
        solution.phi,
        solution.state_traj.states,
        solution.adjoint_traj,
    ])
    header = ["t", "u", "phi", "S", "I", "Q", "R", "B", "l1", "l2", "l3", "l4", "l5"]
    _write_csv(args.out, header, rows)
    summary = _solution_summary(cfg, solution)
    text = json.dumps(summary, indent=2, sort_keys=True)
    print(text)
    if args.summary:
        Path(args.summary).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK if solution.converged else EXIT_NO_CONVERGENCE


def cmd_fit(args) -> int:
    cfg = _load_scenario(args)
    try:
        lo, hi = (float(v) for v in args.range.split(","))
    except ValueError as exc:
        raise ConfigError(f"--range must be 'lo,hi', got {args.range!r}") from exc
    if not Path(args.data).exists():
        raise ConfigError(f"data file not found: {args.data}")
    series = calibrate.load_series(args.data)
    grid = None
    if args.density is not None:
        grid = TimeGrid.with_density(float(series.times.max()), args.density)
    try:
        result = calibrate.fit_beta(
            series, cfg.params, cfg.initial, (lo, hi), n_grid=args.grid, grid=grid
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    doc = {
        "beta_hat": result.beta_hat,
        "sse": result.sse,
        "evaluations": result.evaluations,
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_scenario(args)
    try:
        umax_values = sorted(float(v) for v in args.umax_list.split(","))
    except ValueError as exc:
        raise ConfigError(f"--umax-list must be comma-separated numbers") from exc
    if not umax_values:
        raise ConfigError("--umax-list is empty")
    if args.horizon_list:
        horizons = [float(v) for v in args.horizon_list.split(",")]
        if len(horizons) != len(umax_values):
            raise ConfigError("--horizon-list length must match --umax-list")
        horizon_of = dict(zip(umax_values, horizons))
    else:
        horizon_of = {
            u: CANONICAL_HORIZONS.get(u, cfg.horizon_days) for u in umax_values
        }

    rows = []
    all_converged = True
    for u_max in umax_values:
        try:
            params = dataclasses.replace(cfg.params, u_max=u_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not u_max > 0.0:
            raise ConfigError("u_max values must be positive")
        scenario = dataclasses.replace(cfg, params=params, horizon_days=horizon_of[u_max])
        solution = forward_backward_sweep(scenario.params, scenario.initial, scenario.grid())
        all_converged &= solution.converged
        _, i_peak = peak_infective(solution.state_traj)
        rows.append((u_max, scenario.horizon_days, control_end_time(solution), i_peak, solution.cost))
    _write_csv(args.out, ["u_max", "T", "t_s", "I_peak", "J"], rows)
    return EXIT_OK if all_converged else EXIT_NO_CONVERGENCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siqrb",
        description="SIQRB cholera model: simulation, equilibria, optimal control, calibration",
    )
    parser.add_argument(
        "--config", default=str(yemen_config_path()),
        help="scenario JSON (default: bundled Yemen scenario)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate the model, write a CSV trajectory")
    sim.add_argument("--control", default="0", help="constant control value or schedule file")
    sim.add_argument("--horizon", type=float, default=None, help="override horizon (days)")
    sim.add_argument("--density", type=float, default=None, help="override grid nodes per day")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.set_defaults(func=cmd_simulate)

    eq = sub.add_parser("equilibria", help="R0, equilibria, stability, bifurcation")
    eq.add_argument("--json", action="store_true", help="emit JSON instead of key = value lines")
    eq.add_argument("--out", default=None, help="also write the report here")
    eq.set_defaults(func=cmd_equilibria)

    ctl = sub.add_parser("control", help="solve the optimal CWT-distribution problem")
    ctl.add_argument("--umax", type=float, default=None, help="override maximum control fraction")
    ctl.add_argument("--horizon", type=float, default=None, help="override horizon (days)")
    ctl.add_argument("--out", required=True, help="output CSV path (t,u,phi,states,costates)")
    ctl.add_argument("--summary", default=None, help="also write the summary JSON here")
    ctl.set_defaults(func=cmd_control)

    fit = sub.add_parser("fit", help="fit the ingestion rate to weekly case data")
    fit.add_argument("--data", required=True, help="CSV of t_days,cases observations")
    fit.add_argument("--range", required=True, help="search range 'lo,hi'")
    fit.add_argument("--grid", type=int, default=33, help="scan grid size (default 33)")
    fit.add_argument("--density", type=float, default=None, help="integration nodes per day")
    fit.add_argument("--out", default=None, help="also write the result JSON here")
    fit.set_defaults(func=cmd_fit)

    sweep = sub.add_parser("sweep", help="solve several u_max scenarios, write a summary table")
    sweep.add_argument("--umax-list", default="0.2,0.55,0.9,0.95", help="comma-separated u_max values")
    sweep.add_argument("--horizon-list", default=None,
                       help="comma-separated horizons (default: published scenario horizons)")
    sweep.add_argument("--out", required=True, help="output CSV path")
    sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, calibrate.SeriesFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
