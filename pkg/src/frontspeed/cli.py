"""Command-line entry point: ``frontspeed <command> --config FILE [--jobs N] [--out DIR]``.

Exit status: 0 pass, 1 a check failed, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import COMMANDS, RunConfig, config_dict, dump_config, load_config, resolved_with
from .errors import (AssemblyFailure, ConfigError, EvaluationFailure, FrontSpeedError, InvalidSpec,
                     SolverFailure)
from .fields import catalog_defs, sample_fields, validate_fields
from .first_integrals import h_profile, large_drift_limit, mixed_limit
from .grid import CellSpec, build_grid
from .speed import (CSV_COLUMNS, SpeedOptions, curve_rows, drift_sweep, large_diffusion_sweep,
                    minimal_speed, small_reaction_sweep)
from .topology import CONTOUR_COLUMNS, classify_trajectories, contour_rows, positivity_criterion, solve_stream
from .verify import ConsistencyOptions, ansatz_space, consistency_report

log = logging.getLogger("frontspeed")

EXIT_PASS, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def build_problem(cfg: RunConfig):
    c = cfg.cell
    d = 2 if c.geometry == "torus" else 1
    grid = build_grid(CellSpec(d, c.L1_length, c.L2_length, c.nx_nodes, c.ny_nodes, c.geometry))
    f = cfg.field
    defs = catalog_defs(f.name, c.L1_length, c.L2_length, amplitude=f.drift_amplitude,
                        zeta_const=f.zeta_const, zeta_amp=f.zeta_amp, diffusion=f.diffusion_scale,
                        diffusion_offdiag=f.diffusion_offdiag, e=tuple(cfg.direction))
    return grid, sample_fields(grid, defs)


def speed_options(cfg: RunConfig) -> SpeedOptions:
    s = cfg.solver
    return SpeedOptions(tol=s.eigen_tol, rel_width=s.speed_rel_width, max_grid_n=s.max_grid_nodes,
                        peclet_max=s.peclet_max)


def lambda_grid(cfg: RunConfig):
    lad = cfg.ladders
    if lad.lambda_min > 0 and lad.lambda_max > 0:
        return np.logspace(math.log10(lad.lambda_min), math.log10(lad.lambda_max), lad.lambda_points)
    return None


def _curve_payload(curve) -> dict:
    lim = curve.limit
    return {"c_inf": lim.value, "slope": lim.slope, "uncertainty": lim.uncertainty,
            "rms": lim.rms, "stderr": lim.stderr, "model": lim.model, "n_points": lim.n_points}


def cmd_validate(cfg, out, jobs):
    grid, fields = build_problem(cfg)
    rep = validate_fields(fields)
    io.write_json(out / "validation.json", {
        "passed": rep.passed,
        "conditions": [{"name": c.name, "passed": c.passed, "residual": c.residual, "detail": c.detail}
                       for c in rep.conditions],
        "resolved_config": config_dict(cfg),
    })
    for c in rep.failures():
        print(f"FAIL {c.name}: {c.detail}")
    return EXIT_PASS if rep.passed else EXIT_CHECK


def cmd_speed(cfg, out, jobs):
    grid, fields = build_problem(cfg)
    p = minimal_speed(grid, fields, cfg.ladders.M_value, speed_options(cfg))
    io.write_csv(out / "speed.csv", CSV_COLUMNS,
                 [(p.M, p.eps, p.B, p.lambda_star, p.c_star, p.ratio, max(p.grid_n), p.residual)])
    print(f"c*({p.M:g}) = {p.c_star:.10g}  lambda* = {p.lambda_star:.6g}")
    return EXIT_PASS if (p.certified and p.mu_bound_ok) else EXIT_CHECK


def cmd_sweep(cfg, out, jobs):
    grid, fields = build_problem(cfg)
    curve = drift_sweep(grid, fields, cfg.ladders.M_ladder, speed_options(cfg), jobs)
    io.write_csv(out / "sweep.csv", CSV_COLUMNS, curve_rows(curve))
    ok = all(p.certified and p.mu_bound_ok for p in curve.points)
    io.write_json(out / "sweep.json", {"limit": _curve_payload(curve), "all_certified": ok,
                                       "resolved_config": config_dict(cfg)})
    print(f"c_inf = {curve.c_inf:.10g} +- {curve.limit.uncertainty:.3g}")
    return EXIT_PASS if ok else EXIT_CHECK


def cmd_limit(cfg, out, jobs):
    grid, fields = build_problem(cfg)
    space = ansatz_space(grid, fields, cfg.topology.K_elements)
    prof = h_profile(space, lambda_grid(cfg))
    lim = large_drift_limit(prof)
    io.write_csv(out / "h_profile.csv", ("lambda", "g", "h"), prof.rows())
    io.write_json(out / "limit.json", {**lim.as_dict(), "lambda0": lim.lambda0, "ansatz": space.kind,
                                       "dimension": space.dim, "checks": prof.checks,
                                       "resolved_config": config_dict(cfg)})
    print(f"limit = {lim.limit:.10g}  bracket = [{lim.bracket_lo:.6g}, {lim.bracket_hi:.6g}]  ({lim.case})")
    return EXIT_PASS if all(prof.checks.values()) else EXIT_CHECK


def cmd_mixed(cfg, out, jobs):
    grid, fields = build_problem(cfg)
    opts = speed_options(cfg)
    lad = cfg.ladders
    eps = small_reaction_sweep(grid, fields, lad.eps_ladder, lad.regime_M_ladder, opts, jobs)
    big = large_diffusion_sweep(grid, fields, lad.B_ladder, lad.regime_M_ladder, opts, jobs)
    space = ansatz_space(grid, fields, cfg.topology.K_elements)
    var = mixed_limit(space)
    for name, sweep in (("mixed_eps.csv", eps), ("mixed_B.csv", big)):
        io.write_csv(out / name, CSV_COLUMNS, (row for c in sweep.curves for row in curve_rows(c)))
    values = {"eps_sweep": eps.outer.value, "B_sweep": big.outer.value, "variational": var}
    names = list(values)
    tol = cfg.checks.mixed_rel_tol
    ok = all(abs(values[a] - values[b]) <= tol * max(abs(values[a]), abs(values[b]))
             for i, a in enumerate(names) for b in names[i + 1:])
    io.write_json(out / "mixed.json", {
        **values,
        "eps_inner": eps.inner_limits, "B_inner": big.inner_limits,
        "eps_uncertainty": eps.outer.uncertainty, "B_uncertainty": big.outer.uncertainty,
        "pairwise_within_tolerance": ok, "tolerance_rel": tol,
        "resolved_config": config_dict(cfg),
    })
    print("  ".join(f"{k} = {v:.8g}" for k, v in values.items()))
    return EXIT_PASS if ok else EXIT_CHECK


def cmd_topology(cfg, out, jobs):
    grid, fields = build_problem(cfg)
    stream = solve_stream(grid, fields)
    rep = classify_trajectories(stream, cfg.topology.levels_count, grad_threshold=cfg.topology.grad_threshold)
    verdict = positivity_criterion(rep, fields.e)
    io.write_json(out / "topology.json", {
        "has_channel": rep.has_unbounded_periodic,
        "a": list(rep.a) if rep.a is not None else None,
        "channels": [{"t_lo": c.t_lo, "t_hi": c.t_hi, "winding": list(c.winding)} for c in rep.channels],
        "critical_values": rep.critical_values,
        "regular_levels": len(rep.regular_levels),
        "requested_levels": rep.n_requested,
        "shared_primitive": rep.shared_primitive,
        "limit_positive": verdict.limit_positive,
        "stream_residual": stream.residual,
        "resolved_config": config_dict(cfg),
    })
    io.write_csv(out / "contours.csv", CONTOUR_COLUMNS, contour_rows(rep))
    print(f"channel: {rep.has_unbounded_periodic}  a = {rep.a}  positive limit: {verdict.limit_positive}")
    return EXIT_PASS if rep.shared_primitive else EXIT_CHECK


def cmd_verify(cfg, out, jobs):
    grid, fields = build_problem(cfg)
    lad, chk = cfg.ladders, cfg.checks
    opts = ConsistencyOptions(M_ladder=lad.M_ladder, eps_ladder=lad.eps_ladder, B_ladder=lad.B_ladder,
                              regime_M_ladder=lad.regime_M_ladder, limit_rel=chk.limit_rel_tol,
                              mixed_rel=chk.mixed_rel_tol, positivity_fraction=chk.positivity_fraction,
                              level_set_K=cfg.topology.K_elements, run_mixed=chk.mixed)
    rep = consistency_report(grid, fields, None, opts, speed_options(cfg), jobs)
    checks = [c for c in rep.checks if chk.limits or c.name == "mixed_limits_agree"]
    payload = rep.as_dict()
    payload["checks"] = [{"name": c.name, "passed": c.passed, **c.detail} for c in checks]
    payload["passed"] = all(c.passed for c in checks)
    payload["resolved_config"] = config_dict(cfg)
    io.write_json(out / "verify.json", payload)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}")
    print(f"verdict: limit positive = {rep.verdict.limit_positive}")
    return EXIT_PASS if payload["passed"] else EXIT_CHECK


HANDLERS = {"validate": cmd_validate, "speed": cmd_speed, "sweep": cmd_sweep, "limit": cmd_limit,
            "mixed": cmd_mixed, "topology": cmd_topology, "verify": cmd_verify}
assert set(HANDLERS) == set(COMMANDS)


def run(command: str, cfg: RunConfig, jobs: int = 1) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    return HANDLERS[command](cfg, out, jobs)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="frontspeed", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for ladders")
    parser.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = resolved_with(load_config(args.config), args.out)
        return run(args.command, cfg, args.jobs)
    except (ConfigError, InvalidSpec, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailure, AssemblyFailure, EvaluationFailure) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FrontSpeedError as exc:
        print(f"check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
