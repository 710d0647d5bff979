"""Experiment harness: regime classification, parameter sweeps against an
entropy-solution reference, record persistence, and sweep summaries.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .grids import (
    Field,
    GridSpec,
    Trajectory,
    lp_norm,
    read_snapshot_binary,
    write_snapshot_binary,
    write_snapshot_csv,
    write_manifest,
)
from .model import (
    DiffusionSpec,
    EntropyPair,
    FluxSpec,
    diffusion_preset,
    flux_preset,
)
from .reference import reference_solve
from .solver import InitialData, SolveParams, initial_preset, solve

__all__ = [
    "ScalingLaw",
    "SweepConfig",
    "RunRecord",
    "classify_regime",
    "run_sweep",
    "compare_to_reference",
    "quadratic_entropy_pair",
    "zero_flux",
]

RECORD_COLUMNS = [
    "epsilon", "delta", "gamma", "N", "dx", "dt_min", "steps", "blowup",
    "taint", "L1", "L2", "Linf", "mu1", "mu2", "mu3", "kruzkov_pos",
    "young_var",
]


def zero_flux(dim: int = 1) -> FluxSpec:
    """Fluxless transport, for pure diffusion / dispersion analytic runs."""
    def ev(u):
        u = np.asarray(u, dtype=float)
        return np.stack([np.zeros_like(u)] * dim)

    def dv(u):
        u = np.asarray(u, dtype=float)
        return np.stack([np.zeros_like(u)] * dim)

    return FluxSpec(eval=ev, deriv=dv, m=1.0, c1=1e-12, c1p=1e-12, dim=dim,
                    name="zero")


def resolve_flux(name: str, dim: int = 1) -> FluxSpec:
    if name == "zero":
        return zero_flux(dim=dim)
    return flux_preset(name, dim=dim)


def quadratic_entropy_pair(flux: FluxSpec) -> EntropyPair:
    """eta = u^2/2 with its derivatives; q is unused by the pairings."""
    return EntropyPair(
        eta=lambda u: 0.5 * np.asarray(u, dtype=float) ** 2,
        eta_prime=lambda u: np.asarray(u, dtype=float),
        eta_second=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        q=lambda u: np.asarray(flux.eval(u)),
        eta_third=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        kind="quadratic",
        dim=flux.dim,
    )


# ---------------------------------------------------------------------------
# regime classification


@dataclass(frozen=True)
class ScalingLaw:
    """Dispersion-diffusion coupling delta = coeff * eps^gamma."""

    gamma: float
    coeff: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0 or self.coeff <= 0:
            raise ValueError("gamma and coeff must be positive")

    def delta(self, eps: float) -> float:
        return self.coeff * eps**self.gamma


def classify_regime(r: float, m: float, gamma: float, has_h3: bool = True) -> str:
    """Strongest convergence regime a configuration satisfies.

    Strict exponent inequality gamma > threshold stands in for the
    asymptotic smallness condition on delta relative to eps.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    # quadratic-or-stronger diffusion: any m is admissible (the working
    # integrability exponent can be raised arbitrarily when r > 1)
    if r >= 2 and gamma > 3.0 / (r + 1.0):
        return "thm31"
    if r == 1 and m <= 1 and has_h3 and gamma > 2.0:
        return "thm32"
    if r >= 1 and m <= 2.0 * r / (r + 1.0) and has_h3 and \
            gamma > (r + 3.0) / (r + 1.0):
        return "thm33"
    return "unsupported"


# ---------------------------------------------------------------------------
# comparison to reference


def _restrict_to(values: np.ndarray, n_coarse: int, dim: int) -> np.ndarray:
    n_fine = values.shape[0]
    if n_fine == n_coarse:
        return values
    if n_fine % n_coarse != 0:
        raise ValueError(f"grids are incommensurate: {n_fine} vs {n_coarse}")
    k = n_fine // n_coarse
    if dim == 1:
        return values.reshape(n_coarse, k).mean(axis=1)
    return values.reshape(n_coarse, k, n_coarse, k).mean(axis=(1, 3))


def compare_to_reference(run, ref: Field, p_list=(1, 2, np.inf)) -> dict:
    """L^p distances at final time, after cell-averaging the finer field
    down to the coarser grid."""
    f = run.final() if isinstance(run, Trajectory) else run
    if abs(f.grid.length - ref.grid.length) > 1e-12 * ref.grid.length or \
            f.grid.dim != ref.grid.dim:
        raise ValueError("domains do not match")
    n = min(f.grid.n, ref.grid.n)
    a = _restrict_to(f.values, n, f.grid.dim)
    b = _restrict_to(ref.values, n, f.grid.dim)
    grid = GridSpec(n=n, length=ref.grid.length, dim=ref.grid.dim)
    d = Field(grid, a - b)
    out = {}
    for p in p_list:
        key = "Linf" if p == np.inf or p == "inf" else f"L{p:g}"
        out[key] = lp_norm(d, p)
    return out


# ---------------------------------------------------------------------------
# sweep configuration and execution


@dataclass(frozen=True)
class SweepConfig:
    """A (eps, delta=c*eps^gamma, grid) experiment matrix.

    epsilons and grid_ns are paired entry by entry (same length); eps=0
    entries run the pure dispersive regime with delta read from delta_ladder.
    """

    # problem
    flux: str = "burgers"
    diffusion: str = "linear"
    initial: str = "smoothed_riemann"
    initial_args: tuple = ()        # (key, value) pairs, kept hashable
    length: float = 2.0
    dim: int = 1
    t_end: float = 0.5
    # ladder
    epsilons: tuple = (0.04, 0.02, 0.01, 0.005)
    grid_ns: tuple = (512, 1024, 2048, 4096)
    gamma: float = 2.5
    coeff: float = 1.0
    delta_ladder: tuple = ()        # used only when the eps entry is 0
    # numerics
    ref_n: int = 8192
    cfl_safety: float = 0.4
    sample_count: int = 65
    seed: int = 0
    workers: int = 1
    # diagnostics
    diagnostics: tuple = ("production", "kruzkov", "young")
    # bump support [0.55, 1.45] x [0.05, 0.45]: the default shock path
    # 1.1 + t/2 stays right of center, so the grad-theta pairings keep one sign
    theta_center: float = 1.0
    theta_t_center: float = 0.25
    theta_radius: float = 0.45
    theta_t_radius: float = 0.2
    kruzkov_k: float = 0.5
    # the Kruzkov pairing watches the region just ahead of the entropy
    # shock, where dispersive fronts overrun it; support [1.2, 1.6]
    kru_center: float = 1.4
    kru_t_center: float = 0.25
    kru_radius: float = 0.2
    kru_t_radius: float = 0.2
    window_center: float = 1.3
    window_halfwidth: float = 0.06
    window_t: tuple = (0.4, 0.5)
    # output
    out_dir: str = "sweep_out"

    def scaling(self) -> ScalingLaw:
        return ScalingLaw(gamma=self.gamma, coeff=self.coeff)

    def initial_data(self) -> InitialData:
        return initial_preset(self.initial, **dict(self.initial_args))

    def problem_key(self) -> dict:
        return {
            "flux": self.flux,
            "diffusion": self.diffusion,
            "initial": self.initial,
            "initial_args": list(self.initial_args),
            "length": self.length,
            "dim": self.dim,
            "t_end": self.t_end,
            "ref_n": self.ref_n,
        }


@dataclass
class RunRecord:
    epsilon: float
    delta: float
    gamma: float
    N: int
    dx: float
    dt_min: float
    steps: int
    blowup: bool
    taint: bool
    L1: float
    L2: float
    Linf: float
    mu1: float
    mu2: float
    mu3: float
    kruzkov_pos: float
    young_var: float

    def csv_row(self) -> str:
        vals = []
        for col in RECORD_COLUMNS:
            v = getattr(self, col)
            if isinstance(v, bool):
                vals.append(str(int(v)))
            elif isinstance(v, (int, np.integer)):
                vals.append(str(int(v)))
            else:
                vals.append(repr(float(v)))
        return ",".join(vals)


def _hash_payload(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def ensure_reference(cfg: SweepConfig) -> Field:
    """Entropy-solution reference at the fine grid, cached on disk by a
    content hash of the problem."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    key = _hash_payload(cfg.problem_key())
    path = out / f"reference_{key}.ddl"
    if path.exists():
        return read_snapshot_binary(path)
    grid = GridSpec(n=cfg.ref_n, length=cfg.length, dim=cfg.dim)
    u0 = cfg.initial_data().build(grid)
    flux = resolve_flux(cfg.flux, dim=cfg.dim)
    ref = reference_solve(u0, flux, cfg.t_end)
    write_snapshot_binary(ref, path)
    return ref


def _run_theta(cfg: SweepConfig) -> diag.TestFunction:
    return diag.bump_over(cfg.theta_center, cfg.theta_t_center,
                          cfg.theta_radius, cfg.theta_t_radius, dim=cfg.dim)


def _kru_theta(cfg: SweepConfig) -> diag.TestFunction:
    return diag.bump_over(cfg.kru_center, cfg.kru_t_center,
                          cfg.kru_radius, cfg.kru_t_radius, dim=cfg.dim)


def _run_window(cfg: SweepConfig) -> diag.Window:
    lo = cfg.window_center - cfg.window_halfwidth
    hi = cfg.window_center + cfg.window_halfwidth
    return diag.Window(space=((lo, hi),) * cfg.dim, t=tuple(cfg.window_t))


def _window_variance(traj: Trajectory, window: diag.Window) -> float:
    coords = traj.grid.meshgrid()
    mask = np.ones(traj.grid.shape, dtype=bool)
    for ax, (lo, hi) in enumerate(window.space):
        mask &= (coords[ax] >= lo) & (coords[ax] <= hi)
    vals = [f.values[mask] for t, f in zip(traj.times, traj.fields)
            if window.t[0] <= t <= window.t[1]]
    if not vals or not np.any(mask):
        return float("nan")
    return float(np.var(np.concatenate(vals)))


def execute_run(cfg: SweepConfig, idx: int) -> RunRecord:
    """Solve one ladder entry and evaluate its per-run diagnostics."""
    eps = cfg.epsilons[idx]
    n = cfg.grid_ns[idx]
    delta = _delta_at(cfg, idx)
    grid = GridSpec(n=n, length=cfg.length, dim=cfg.dim)
    flux = resolve_flux(cfg.flux, dim=cfg.dim)
    diffusion = diffusion_preset(cfg.diffusion, dim=cfg.dim)
    params = SolveParams(
        flux=flux, diffusion=diffusion, epsilon=eps, delta=delta,
        t_end=cfg.t_end, cfl_safety=cfg.cfl_safety,
        sample_count=cfg.sample_count,
    )
    traj = solve(cfg.initial_data(), params, grid)

    ref = ensure_reference(cfg)
    if traj.blowup:
        dists = {"L1": float("nan"), "L2": float("nan"), "Linf": float("nan")}
    else:
        dists = compare_to_reference(traj, ref)

    mu1 = mu2 = mu3 = float("nan")
    kru = float("nan")
    young = float("nan")
    if not traj.blowup:
        theta = _run_theta(cfg)
        if "production" in cfg.diagnostics:
            pair = quadratic_entropy_pair(flux)
            rep = diag.entropy_production(traj, pair, theta, eps, delta, diffusion)
            mu1, mu2, mu3 = rep.mu1, rep.mu2, rep.mu3
        if "kruzkov" in cfg.diagnostics:
            val = diag.kruzkov_residual(traj, flux, cfg.kruzkov_k, grid.dx,
                                        _kru_theta(cfg))
            kru = max(0.0, val)
        if "young" in cfg.diagnostics:
            young = _window_variance(traj, _run_window(cfg))

    return RunRecord(
        epsilon=eps, delta=delta, gamma=cfg.gamma, N=n, dx=grid.dx,
        dt_min=traj.params.get("dt_min", 0.0),
        steps=traj.params.get("steps", 0),
        blowup=traj.blowup, taint=traj.taint,
        L1=dists["L1"], L2=dists["L2"], Linf=dists["Linf"],
        mu1=mu1, mu2=mu2, mu3=mu3, kruzkov_pos=kru, young_var=young,
    )


def _delta_at(cfg: SweepConfig, idx: int) -> float:
    eps = cfg.epsilons[idx]
    return cfg.scaling().delta(eps) if eps > 0 else cfg.delta_ladder[idx]


def _record_path(cfg: SweepConfig, idx: int) -> Path:
    payload = dict(cfg.problem_key())
    payload.update({
        "epsilon": cfg.epsilons[idx],
        "delta": _delta_at(cfg, idx),
        "N": cfg.grid_ns[idx],
        "gamma": cfg.gamma,
        "coeff": cfg.coeff,
        "delta_ladder": list(cfg.delta_ladder),
        "cfl": cfg.cfl_safety,
        "samples": cfg.sample_count,
        "diagnostics": list(cfg.diagnostics),
        "theta": [cfg.theta_center, cfg.theta_t_center,
                  cfg.theta_radius, cfg.theta_t_radius],
        "kruzkov_k": cfg.kruzkov_k,
        "kru_theta": [cfg.kru_center, cfg.kru_t_center,
                      cfg.kru_radius, cfg.kru_t_radius],
        "window": [cfg.window_center, cfg.window_halfwidth,
                   list(cfg.window_t)],
    })
    return Path(cfg.out_dir) / f"run_{_hash_payload(payload)}.json"


def _worker(args):
    cfg_dict, idx = args
    cfg = SweepConfig(**cfg_dict)
    rec = execute_run(cfg, idx)
    return idx, asdict(rec)


def run_sweep(cfg: SweepConfig) -> list:
    """Run every ladder entry, persist records, and write the summary.

    Already-completed records (matching manifest hash on disk) are reused.
    Individual blow-ups are recorded and the sweep continues; if every run
    fails, raises RuntimeError.
    """
    if len(cfg.epsilons) != len(cfg.grid_ns):
        raise ValueError("epsilons and grid_ns ladders must pair up")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ensure_reference(cfg)

    pending = []
    records: dict = {}
    for idx in range(len(cfg.epsilons)):
        path = _record_path(cfg, idx)
        if path.exists():
            with open(path) as fh:
                records[idx] = RunRecord(**json.load(fh))
        else:
            pending.append(idx)

    workers = int(os.environ.get("DDL_WORKERS", cfg.workers))
    if workers > 1 and len(pending) > 1:
        cfg_dict = asdict(cfg)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, rec_dict in pool.map(_worker, [(cfg_dict, i) for i in pending]):
                records[idx] = RunRecord(**rec_dict)
    else:
        for idx in pending:
            records[idx] = execute_run(cfg, idx)

    for idx in pending:
        path = _record_path(cfg, idx)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            json.dump(asdict(records[idx]), fh, sort_keys=True, indent=2)
        os.replace(tmp, path)

    ordered = [records[i] for i in range(len(cfg.epsilons))]
    if all(r.blowup for r in ordered):
        raise RuntimeError("every run in the sweep blew up")

    _write_records_csv(out / "records.csv", ordered)
    summary = summarize(cfg, ordered)
    write_manifest(out / "summary.json", summary)
    return ordered


def _write_records_csv(path, records):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


def _monotone_decreasing(vals) -> bool:
    vals = [v for v in vals if np.isfinite(v)]
    return len(vals) >= 2 and all(b < a for a, b in zip(vals, vals[1:]))


def _fit_slope(eps, vals):
    eps = np.asarray(eps, dtype=float)
    vals = np.abs(np.asarray(vals, dtype=float))
    keep = np.isfinite(vals) & (vals > 1e-14) & (eps > 0)
    if np.sum(keep) < 2:
        return None
    x = np.log(eps[keep])
    y = np.log(vals[keep])
    coef, cov = np.polyfit(x, y, 1, cov=True) if np.sum(keep) > 2 else \
        (np.polyfit(x, y, 1), np.full((2, 2), np.nan))
    return {"slope": float(coef[0]),
            "ci95": float(2.0 * np.sqrt(cov[0, 0])) if np.isfinite(cov[0, 0])
            else None}


def summarize(cfg: SweepConfig, records) -> dict:
    eps = [r.epsilon for r in records]
    diffusion = diffusion_preset(cfg.diffusion, dim=cfg.dim)
    flux = resolve_flux(cfg.flux, dim=cfg.dim)
    tag = classify_regime(diffusion.r, flux.m, cfg.gamma, diffusion.claims_h3) \
        if all(e > 0 for e in eps) else "dispersive"
    summary = {
        "config": cfg.problem_key() | {
            "epsilons": list(cfg.epsilons),
            "grid_ns": list(cfg.grid_ns),
            "gamma": cfg.gamma,
            "coeff": cfg.coeff,
            "delta_ladder": list(cfg.delta_ladder),
        },
        "theorem_tag": tag,
        "monotone": {
            col: _monotone_decreasing([getattr(r, col) for r in records])
            for col in ("L1", "L2", "Linf", "kruzkov_pos", "young_var")
        },
        "slopes": {
            col: _fit_slope(eps, [getattr(r, col) for r in records])
            for col in ("L1", "mu1", "mu3")
        },
        "blowups": sum(r.blowup for r in records),
    }
    return summary
