"""Command-line entry point: ``qmx list | solve | run | terms | compat | bench``."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .calculus import MultiIndex, term_table
from .config import ConfigError, ScenarioConfig, config_from_dict, emit_config, parse_config
from .diagnostics import cone_support_check, continuous_dependence_experiment, divergence_check
from .initial_data import check_compatibility
from .io import NORM_HEADER, RunManifest, csv_text, sha256_file, write_atomic, write_dump
from .linear import EnergyRecord, weighted_energy
from .norms import face_l2_norm, gm_norm, l2_norm, lipschitz_norm
from .quasilinear import SolveOutcome, continue_maximal
from .scenarios import Scenario, build_scenario, list_scenarios, preset_config

EXIT_CODES = {
    "converged": 0,
    "horizon_reached": 0,
    "blowup_lipschitz": 2,
    "left_state_domain": 3,
    "picard_stalled": 4,
    "nonfinite": 5,
}
EXIT_CONFIG = 64


@dataclass
class RunResult:
    status: str
    exit_code: int
    outdir: Path
    outcome: SolveOutcome
    files: dict[str, str]


def _energy_record(sc: Scenario, outcome: SolveOutcome) -> EnergyRecord:
    rec = EnergyRecord()
    tr = outcome.trajectory
    x = sc.grid.coords()
    for i, t in enumerate(tr.times):
        u = tr.values[i]
        rec.append(t, weighted_energy(u, sc.law.chi(u, x), sc.grid),
                   l2_norm(sc.bundle.f_at(float(t)), sc.grid) if sc.bundle.f is not None else 0.0,
                   face_l2_norm(sc.bundle.g_at(float(t)), sc.grid) if sc.bundle.g is not None else 0.0)
    return rec


def execute(cfg: ScenarioConfig, outdir: Path | None = None, log=None) -> RunResult:
    """Run a validated configuration and write its artifacts; progress lines go to ``log`` (stderr)."""
    log = log or sys.stderr
    started = time.perf_counter()
    sc = build_scenario(cfg)
    outdir = Path(outdir or cfg.output.dir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def put(name: str, text: str):
        write_atomic(outdir / name, text)
        written.append(name)

    put("config.toml", emit_config(cfg))
    compat = check_compatibility(sc.law, sc.bundle, sc.m)
    put("compatibility.csv", compat.to_csv())

    def progress(rep, state):
        energy = weighted_energy(state.values, sc.law.chi(state.values, sc.grid.coords()), sc.grid)
        print(f"slab t=[{rep.t_start:.6g}, {rep.t_end:.6g}] iterations={rep.iterations} "
              f"fp={rep.fp_distance:.3e} energy={energy:.6e} lipschitz={lipschitz_norm(state):.6e}", file=log)

    outcome = continue_maximal(sc.law, sc.bundle, sc.m, sc.picard, sc.horizon, progress=progress)
    tr = outcome.trajectory
    d = outcome.diagnostics
    rows = []
    for i, t in enumerate(d["t"]):
        rows.append((t, "lipschitz", 1, 0.0, d["lipschitz"][i]))
        rows.append((t, "sobolev", min(sc.m, 3), 0.0, d["sobolev"][i]))
    if tr is not None and len(tr) > sc.m:
        rows.append((tr.t_end, "gm", sc.m - 1, sc.picard.gamma, gm_norm(tr, sc.m - 1, sc.picard.gamma)))
    put("norms.csv", csv_text(NORM_HEADER, rows))
    put("slabs.csv", csv_text(
        ["t_start", "t_end", "iterations", "fp_distance", "contraction_ratio", "compat_residual"],
        [(r.t_start, r.t_end, r.iterations, r.fp_distance,
          "" if r.contraction_ratio is None else r.contraction_ratio, r.compat_residual) for r in outcome.per_slab]))
    summary = [
        f"scenario: {sc.name}",
        f"version: {__version__}",
        f"status: {outcome.status}",
        f"t_reached: {outcome.t_reached:.17g}",
        f"termination_time: {'' if outcome.termination_time is None else f'{outcome.termination_time:.17g}'}",
        f"slabs: {len(outcome.per_slab)}",
        f"compatibility_at_t0: {'PASS' if compat.passed else 'FAIL'}",
    ]
    if outcome.message:
        summary.append(f"message: {outcome.message}")
    diag = cfg.diagnostics
    if tr is not None and diag.energy:
        rec = _energy_record(sc, outcome)
        put("energy.csv", rec.to_csv())
        summary.append(f"energy_growth_constant: {rec.growth_constant():.6e}")
    if tr is not None and diag.divergence:
        rep = divergence_check(tr, sc.bundle, sc.law)
        put("divergence.csv", csv_text(["t", "div_d_l2", "div_d_max", "div_b_l2", "div_b_max"],
                                       zip(rep.times, rep.div_d_l2, rep.div_d_max, rep.div_b_l2, rep.div_b_max)))
        ok = rep.growth_factor("d") <= 10 and rep.growth_factor("b") <= 10
        summary.append(f"divergence_within_10x: {'PASS' if ok else 'FAIL'}")
    if tr is not None and sc.cone is not None:
        rep = cone_support_check(tr, sc.cone, diag.cone_tolerance)
        put("cone.csv", csv_text(["t", "violation"], zip(rep.times, rep.violation)))
        summary.append(f"cone_support: {'PASS' if rep.passed else 'FAIL'} (max {rep.max_violation:.3e})")
    if tr is not None and diag.continuity and sc.perturbation is not None:
        rep = continuous_dependence_experiment(sc.law, sc.bundle, sc.m, sc.perturbation, diag.deltas,
                                               sc.picard, sc.horizon, base=outcome)
        put("continuity.csv", csv_text(["delta", "difference", "ratio", "weighted_ratio"],
                                       zip(rep.deltas, rep.differences, rep.ratios, rep.weighted_ratios)))
        summary.append(f"continuity_spread: {rep.spread():.4f}" + (f" aborted: {rep.aborted}" if rep.aborted else ""))
    if tr is not None and cfg.output.dump_every > 0:
        for i in range(0, len(tr), cfg.output.dump_every):
            name = f"field_{i:06d}.qmxf"
            write_dump(outdir / name, tr.state(i))
            written.append(name)
    put("summary.txt", "\n".join(summary) + "\n")
    files = {name: sha256_file(outdir / name) for name in written}
    steps = 0 if tr is None else len(tr) - 1
    manifest = RunManifest(cfg.to_dict(), __version__, time.perf_counter() - started, steps, outcome.status, files)
    manifest.write(outdir)
    return RunResult(outcome.status, EXIT_CODES[outcome.status], outdir, outcome, files)


def _solve_config(args) -> ScenarioConfig:
    cfg = preset_config(args.scenario)
    doc: dict = {"solver": {}, "output": {}}
    for key in ("m", "tau", "horizon", "cfl", "penalty", "dissipation"):
        val = getattr(args, key)
        if val is not None:
            doc["solver"][key] = val
    if args.grid is not None:
        doc["grid"] = {"cells": [args.grid] * 3}
    if args.dump_every is not None:
        doc["output"]["dump_every"] = args.dump_every
    if args.out is not None:
        doc["output"]["dir"] = args.out
    return config_from_dict(cfg, doc)


def _parse_alpha(text: str) -> MultiIndex:
    parts = [int(p) for p in text.replace(" ", "").split(",") if p]
    if len(parts) > 4 or any(p < 0 for p in parts):
        raise ValueError("alpha takes up to four nonnegative integers t,x1,x2,x3")
    return MultiIndex(*parts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmx", description="Quasilinear Maxwell laboratory")
    p.add_argument("--version", action="version", version=f"qmx {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list built-in scenarios")
    s = sub.add_parser("solve", help="run a preset with command-line overrides")
    s.add_argument("--scenario", required=True)
    s.add_argument("--m", type=int)
    s.add_argument("--tau", type=float)
    s.add_argument("--horizon", type=float)
    s.add_argument("--grid", type=int, help="cells per axis")
    s.add_argument("--cfl", type=float)
    s.add_argument("--penalty", type=float)
    s.add_argument("--dissipation", type=float)
    s.add_argument("--dump-every", type=int, dest="dump_every")
    s.add_argument("--out")
    r = sub.add_parser("run", help="run a TOML scenario file")
    r.add_argument("config")
    r.add_argument("--out")
    e = sub.add_parser("show", help="print the full configuration of a preset")
    e.add_argument("scenario")
    t = sub.add_parser("terms", help="print the chain-rule term table for a multi-index")
    t.add_argument("--alpha", required=True, help="t,x1,x2,x3")
    c = sub.add_parser("compat", help="print the compatibility table of a preset")
    c.add_argument("--scenario", required=True)
    c.add_argument("--grid", type=int)
    b = sub.add_parser("bench", help="time the numba and numpy kernels")
    b.add_argument("--grid", type=int, default=32)
    b.add_argument("--repeat", type=int, default=5)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            for name, desc in list_scenarios():
                print(f"{name:20s} {desc}")
            return 0
        if args.command == "show":
            print(emit_config(preset_config(args.scenario)), end="")
            return 0
        if args.command == "terms":
            print(term_table(_parse_alpha(args.alpha)))
            return 0
        if args.command == "compat":
            cfg = preset_config(args.scenario)
            if args.grid:
                cfg = config_from_dict(cfg, {"grid": {"cells": [args.grid] * 3}})
            sc = build_scenario(cfg)
            print(check_compatibility(sc.law, sc.bundle, sc.m).table())
            return 0
        if args.command == "bench":
            from .bench import run_benchmark

            print(run_benchmark(args.grid, args.repeat))
            return 0
        if args.command == "solve":
            cfg = _solve_config(args)
        else:
            cfg = parse_config(Path(args.config).read_text())
            if args.out:
                cfg = config_from_dict(cfg, {"output": {"dir": args.out}})
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    res = execute(cfg)
    print((res.outdir / "summary.txt").read_text(), end="")
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
