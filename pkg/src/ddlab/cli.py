"""Command-line front end.

Subcommands: solve, sweep, diagnose, compare, classify.  Exit codes:
0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .grids import (
    Field,
    GridSpec,
    Trajectory,
    lp_norm,
    read_snapshot_csv,
    write_manifest,
    write_snapshot_csv,
)
from .harness import (
    SweepConfig,
    classify_regime,
    compare_to_reference,
    resolve_flux,
    run_sweep,
)
from .model import diffusion_preset
from .solver import SolveParams, initial_preset, solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config file parsing: [section] headers, key=value lines, comma arrays

_CONFIG_SCHEMA = {
    "problem": {
        "flux": str, "diffusion": str, "initial": str,
        "uL": float, "uR": float, "w": float, "amplitude": float,
        "length": float, "dim": int, "t_end": float,
    },
    "sweep": {
        "epsilons": "floats", "grids": "ints", "gamma": float, "coeff": float,
        "deltas": "floats", "ref_n": int, "cfl": float, "samples": int,
        "seed": int, "workers": int,
    },
    "diagnostics": {
        "enabled": "strs", "theta_center": float, "theta_t_center": float,
        "theta_radius": float, "theta_t_radius": float, "kruzkov_k": float,
        "kruzkov_center": float, "kruzkov_t_center": float,
        "kruzkov_radius": float, "kruzkov_t_radius": float,
        "window_center": float, "window_halfwidth": float,
        "window_t_lo": float, "window_t_hi": float,
    },
    "output": {"dir": str},
}


def _coerce(kind, raw: str):
    if kind == "floats":
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if kind == "ints":
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if kind == "strs":
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    return kind(raw)


def parse_config(path) -> dict:
    """Flat key=value config with [section] markers."""
    sections: dict = {}
    section = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _CONFIG_SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown section [{section}]")
            sections.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if section is None:
            raise ConfigError(f"{path}:{lineno}: key outside any [section]")
        key, raw = (s.strip() for s in line.split("=", 1))
        schema = _CONFIG_SCHEMA[section]
        if key not in schema:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r} in [{section}]; "
                f"known keys: {', '.join(sorted(schema))}"
            )
        try:
            sections[section][key] = _coerce(schema[key], raw)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return sections


def sweep_config_from_sections(sections: dict, out_override=None) -> SweepConfig:
    prob = sections.get("problem", {})
    swp = sections.get("sweep", {})
    dia = sections.get("diagnostics", {})
    outp = sections.get("output", {})

    initial_args = []
    for key in ("uL", "uR", "w", "amplitude"):
        if key in prob:
            initial_args.append((key, prob[key]))

    kwargs = {}
    mapping = [
        ("flux", prob, "flux"), ("diffusion", prob, "diffusion"),
        ("initial", prob, "initial"), ("length", prob, "length"),
        ("dim", prob, "dim"), ("t_end", prob, "t_end"),
        ("epsilons", swp, "epsilons"), ("grid_ns", swp, "grids"),
        ("gamma", swp, "gamma"), ("coeff", swp, "coeff"),
        ("delta_ladder", swp, "deltas"), ("ref_n", swp, "ref_n"),
        ("cfl_safety", swp, "cfl"), ("sample_count", swp, "samples"),
        ("seed", swp, "seed"), ("workers", swp, "workers"),
        ("diagnostics", dia, "enabled"),
        ("theta_center", dia, "theta_center"),
        ("theta_t_center", dia, "theta_t_center"),
        ("theta_radius", dia, "theta_radius"),
        ("theta_t_radius", dia, "theta_t_radius"),
        ("kruzkov_k", dia, "kruzkov_k"),
        ("kru_center", dia, "kruzkov_center"),
        ("kru_t_center", dia, "kruzkov_t_center"),
        ("kru_radius", dia, "kruzkov_radius"),
        ("kru_t_radius", dia, "kruzkov_t_radius"),
        ("window_center", dia, "window_center"),
        ("window_halfwidth", dia, "window_halfwidth"),
        ("out_dir", outp, "dir"),
    ]
    for dest, src, key in mapping:
        if key in src:
            kwargs[dest] = src[key]
    if "window_t_lo" in dia or "window_t_hi" in dia:
        kwargs["window_t"] = (dia.get("window_t_lo", 0.0),
                              dia.get("window_t_hi", prob.get("t_end", 0.5)))
    if initial_args:
        kwargs["initial_args"] = tuple(initial_args)
    if out_override:
        kwargs["out_dir"] = str(out_override)
    try:
        return SweepConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


# ---------------------------------------------------------------------------
# solve presets (whole-problem shortcuts for the CLI)

_SOLVE_PRESETS = {
    # name: (flux, diffusion, initial, initial kwargs)
    "heat": ("zero", "linear", "sine", {}),
    "airy": ("zero", "linear", "sine", {}),
    "burgers": ("burgers", "linear", "smoothed_riemann",
                {"uL": 1.0, "uR": 0.0, "w": 0.02}),
    "burgers_bump": ("burgers", "linear", "bump", {}),
    "advection": ("advection", "linear", "sine", {}),
}


def _cmd_solve(args) -> int:
    if args.preset not in _SOLVE_PRESETS:
        print(f"unknown preset {args.preset!r}; have {sorted(_SOLVE_PRESETS)}",
              file=sys.stderr)
        return EXIT_CONFIG
    flux_name, diff_name, init_name, init_kwargs = _SOLVE_PRESETS[args.preset]
    length = args.L if args.L is not None else \
        (2.0 * np.pi if init_name == "sine" else 2.0)
    grid = GridSpec(n=args.N, length=length, dim=1)
    flux = resolve_flux(flux_name)
    diffusion = diffusion_preset(diff_name)
    params = SolveParams(
        flux=flux, diffusion=diffusion, epsilon=args.epsilon,
        delta=args.delta, t_end=args.T, cfl_safety=args.cfl,
        sample_count=args.samples,
    )
    traj = solve(initial_preset(init_name, **init_kwargs), params, grid)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, (t, f) in enumerate(zip(traj.times, traj.fields)):
        write_snapshot_csv(f, out / f"snapshot_{i:04d}.csv")
    write_manifest(out / "manifest.json", {
        "role": "solver",
        "preset": args.preset,
        "times": traj.times,
        "length": length,
        "N": args.N,
        "params": {k: v for k, v in traj.params.items()
                   if isinstance(v, (int, float, str, bool))},
        "blowup": traj.blowup,
        "taint": traj.taint,
    })
    if traj.blowup:
        print("run blew up; partial trajectory written", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {len(traj.times)} snapshots to {out}")
    return EXIT_OK


def _load_trajectory(path) -> Trajectory:
    path = Path(path)
    with open(path / "manifest.json") as fh:
        manifest = json.load(fh)
    traj = Trajectory(
        grid=GridSpec(n=manifest["N"], length=manifest["length"], dim=1),
        params=manifest.get("params", {}),
        blowup=manifest.get("blowup", False),
        taint=manifest.get("taint", False),
    )
    for i, t in enumerate(manifest["times"]):
        f = read_snapshot_csv(path / f"snapshot_{i:04d}.csv",
                              length=manifest["length"])
        traj.append(t, f)
    return traj


def _cmd_diagnose(args) -> int:
    traj = _load_trajectory(args.run)
    eps = float(traj.params.get("epsilon", 0.0))
    diffusion = diffusion_preset(traj.params.get("diffusion", "linear"))
    t = args.t if args.t is not None else traj.t_final
    residual = diag.energy_balance_residual(traj, diffusion, eps, t)
    u0_l2 = lp_norm(traj.fields[0], 2)
    budget = diag.gradient_budget(traj, diffusion, eps, u0_l2)
    rows = [
        ("energy", "balance_residual", t, residual, abs(residual) <= 1e-2),
        ("energy", "gradient_budget_lhs", t, budget["lhs"], budget["holds"]),
        ("energy", "gradient_budget_bound", t, budget["bound"], True),
    ]
    out = Path(args.run) / "diagnostics.csv"
    diag.append_diagnostic_rows(out, rows)
    for row in rows:
        print(",".join(str(v) for v in row))
    return EXIT_OK


def _final_field(path) -> Field:
    path = Path(path)
    if path.is_file():
        return read_snapshot_csv(path)
    snaps = sorted(path.glob("snapshot_*.csv"))
    if not snaps:
        raise ConfigError(f"no snapshots under {path}")
    manifest = path / "manifest.json"
    length = None
    if manifest.exists():
        with open(manifest) as fh:
            length = json.load(fh).get("length")
    return read_snapshot_csv(snaps[-1], length=length)


def _cmd_compare(args) -> int:
    a = _final_field(args.a)
    b = _final_field(args.b)
    p_list = []
    for p in args.p.split(","):
        p = p.strip()
        p_list.append(np.inf if p == "inf" else float(p))
    dists = compare_to_reference(a, b, p_list)
    for key in sorted(dists):
        print(f"{key} {dists[key]!r}")
    return EXIT_OK


def _cmd_classify(args) -> int:
    tag = classify_regime(args.r, args.m, args.gamma, not args.no_h3)
    print(tag)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    sections = parse_config(args.config) if args.config else {}
    cfg = sweep_config_from_sections(sections, out_override=args.out)
    records = run_sweep(cfg)
    out = Path(cfg.out_dir)
    if args.plot_data:
        _emit_plot_data(out, records)
    blowups = sum(r.blowup for r in records)
    print(f"sweep complete: {len(records)} runs, {blowups} blow-ups; "
          f"records in {out / 'records.csv'}")
    return EXIT_OK if blowups < len(records) else EXIT_NUMERICAL


def _emit_plot_data(out: Path, records):
    """Two-column (eps or delta, metric) files, gnuplot-ready."""
    for metric in ("L1", "L2", "Linf", "mu1", "mu2", "mu3",
                   "kruzkov_pos", "young_var"):
        with open(out / f"plot_{metric}.dat", "w") as fh:
            for rec in records:
                x = rec.epsilon if rec.epsilon > 0 else rec.delta
                fh.write(f"{x!r} {getattr(rec, metric)!r}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ddlab",
        description="diffusive-dispersive conservation-law laboratory",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one regularized solve")
    s.add_argument("--preset", required=True)
    s.add_argument("--epsilon", type=float, default=0.0)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--N", type=int, default=256)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--L", type=float, default=None)
    s.add_argument("--cfl", type=float, default=0.4)
    s.add_argument("--samples", type=int, default=17)
    s.add_argument("--out", default="solve_out")
    s.set_defaults(func=_cmd_solve)

    s = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None)
    s.add_argument("--plot-data", action="store_true")
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("diagnose", help="evaluate diagnostics on a stored run")
    s.add_argument("--run", required=True)
    s.add_argument("--t", type=float, default=None)
    s.set_defaults(func=_cmd_diagnose)

    s = sub.add_parser("compare", help="Lp distances between two snapshot sets")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--p", default="1,2,inf")
    s.set_defaults(func=_cmd_compare)

    s = sub.add_parser("classify", help="map (r, m, gamma) to a regime tag")
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--m", type=float, required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--no-h3", action="store_true")
    s.set_defaults(func=_cmd_classify)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
