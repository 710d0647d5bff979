"""Quantitative checks of the regularized equation's energy identities,
a-priori norm bounds, entropy-production decomposition, and oscillation
(weak-limit) diagnostics.

All distributional pairings move derivatives onto an analytic test function;
the only discrete derivative entering a pairing is grad u itself where it
appears explicitly in the production terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grids import Field, Trajectory, gradient, lp_norm, spacetime_integral
from .model import DiffusionSpec, EntropyPair, FluxSpec, kruzkov_entropy

__all__ = [
    "TestFunction",
    "EntropyProductionReport",
    "HnBoundParams",
    "YoungHistogram",
    "Window",
    "energy_balance_residual",
    "gradient_budget",
    "power_energy_identity",
    "hn_bound",
    "lp_bound_check",
    "h_regularity_check",
    "entropy_production",
    "production_scaling_fit",
    "kruzkov_residual",
    "young_histogram",
    "initial_trace_check",
    "bootstrap_bound",
]


# ---------------------------------------------------------------------------
# analytic test functions

# (1 - s^2)^4 and its derivatives, highest-power-first coefficients
_B_POLY = np.array([1.0, 0.0, -4.0, 0.0, 6.0, 0.0, -4.0, 0.0, 1.0][::-1])
_B_DERIVS = [np.polynomial.polynomial.polyder(_B_POLY, m) for m in range(4)]


def _bump(s, order: int = 0):
    s = np.asarray(s, dtype=float)
    if order == 0:
        # direct form keeps the value exactly nonnegative at the edges
        return np.where(np.abs(s) < 1.0, (1.0 - s**2) ** 4, 0.0)
    return np.where(np.abs(s) < 1.0,
                    np.polynomial.polynomial.polyval(s, _B_DERIVS[order]), 0.0)


@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported space-time bump, a product of
    (1 - s^2)^4 factors in each scaled coordinate."""

    center: tuple        # spatial center, one entry per axis
    t_center: float
    radius: tuple        # spatial radii, one entry per axis
    t_radius: float
    nonneg: bool = True

    def _space_factors(self, coords, order_axis: Optional[int] = None,
                       order: int = 0):
        prod = 1.0
        for ax, x in enumerate(coords):
            s = (x - self.center[ax]) / self.radius[ax]
            m = order if ax == order_axis else 0
            prod = prod * _bump(s, m) / self.radius[ax] ** m
        return prod

    def value(self, coords, t):
        return self._space_factors(coords) * _bump((t - self.t_center) / self.t_radius)

    def dt(self, coords, t):
        st = (t - self.t_center) / self.t_radius
        return self._space_factors(coords) * _bump(st, 1) / self.t_radius

    def dx(self, coords, t, axis: int):
        st = (t - self.t_center) / self.t_radius
        return self._space_factors(coords, axis, 1) * _bump(st)

    def dxx(self, coords, t, axis: int):
        st = (t - self.t_center) / self.t_radius
        return self._space_factors(coords, axis, 2) * _bump(st)

    def dxxx_sum(self, coords, t):
        st = (t - self.t_center) / self.t_radius
        out = 0.0
        for ax in range(len(self.center)):
            out = out + self._space_factors(coords, ax, 3)
        return out * _bump(st)

    def supported_inside(self, grid, t_end: float) -> bool:
        for ax in range(len(self.center)):
            if self.center[ax] - self.radius[ax] < 0 or \
               self.center[ax] + self.radius[ax] > grid.length:
                return False
        return 0 < self.t_center - self.t_radius and \
            self.t_center + self.t_radius < t_end


def bump_over(center, t_center, radius, t_radius, dim: int = 1) -> TestFunction:
    """Convenience constructor with scalar radii."""
    center = tuple(np.atleast_1d(center).astype(float))
    radius = tuple(np.atleast_1d(radius).astype(float)) if np.ndim(radius) else \
        (float(radius),) * dim
    if len(radius) != len(center):
        radius = (radius[0],) * len(center)
    return TestFunction(center=center, t_center=float(t_center),
                        radius=radius, t_radius=float(t_radius))


# ---------------------------------------------------------------------------
# helpers


def _restrict(traj: Trajectory, t: float) -> Trajectory:
    """Sub-trajectory of samples with time <= t (t must be near a sample)."""
    times = np.asarray(traj.times)
    idx = np.where(times <= t + 1e-12 * max(t, 1.0))[0]
    if len(idx) < 2:
        raise ValueError(f"t={t} leaves fewer than two samples")
    if abs(times[idx[-1]] - t) > 1e-9 * max(t, 1.0):
        raise ValueError(f"t={t} is not a stored sample time")
    sub = Trajectory(grid=traj.grid, params=traj.params,
                     blowup=traj.blowup, taint=traj.taint)
    for i in idx:
        sub.append(traj.times[i], traj.fields[i])
    return sub


def _dissipation_density(f: Field, diff: DiffusionSpec) -> np.ndarray:
    """Pointwise grad u . b(grad u)."""
    lam = np.stack([g.values for g in gradient(f)])
    b = np.asarray(diff.eval(lam))
    return np.sum(lam * b, axis=0)


def _grad_mag(f: Field) -> np.ndarray:
    lam = np.stack([g.values for g in gradient(f)])
    return np.sqrt(np.sum(lam**2, axis=0))


def _hessian_sq(f: Field) -> np.ndarray:
    """|D^2 u|^2 from composed centered differences."""
    out = np.zeros(f.grid.shape)
    for gi in gradient(f):
        for gij in gradient(gi):
            out += gij.values**2
    return out


# ---------------------------------------------------------------------------
# energy identities and norm budgets


def energy_balance_residual(traj: Trajectory, diff: DiffusionSpec,
                            eps: float, t: float) -> float:
    """Residual of the quadratic energy balance at time t:

        ||u(t)||_2^2 + 2 eps int_0^t int grad u . b(grad u) - ||u0||_2^2.

    Vanishes under refinement; the dispersive term integrates away on the
    periodic box.
    """
    sub = _restrict(traj, t)
    dissipation = spacetime_integral(sub, lambda s, f: _dissipation_density(f, diff))
    return (lp_norm(sub.final(), 2) ** 2
            + 2.0 * eps * dissipation
            - lp_norm(sub.fields[0], 2) ** 2)


def gradient_budget(traj: Trajectory, diff: DiffusionSpec, eps: float,
                    u0_l2: float) -> dict:
    """Check eps int int |grad u|^(r+1) <= ||u0||_2^2 / (2 c2)."""
    lhs = eps * spacetime_integral(
        traj, lambda s, f: _grad_mag(f) ** (diff.r + 1.0))
    bound = u0_l2**2 / (2.0 * diff.c2)
    return {"lhs": lhs, "bound": bound, "holds": bool(lhs <= bound + 1e-2)}


def power_energy_identity(traj: Trajectory, alpha: float, diff: DiffusionSpec,
                          eps: float, delta: float, form: str = "auto") -> dict:
    """Both sides of the |u|^(alpha+1) energy identity.

    lhs = int |u(t)|^(a+1)/(a+1) + a*eps int int |u|^(a-1) grad u . b(grad u)
    rhs = int |u0|^(a+1)/(a+1) + dispersive term, where for alpha >= 2 the
    dispersive term uses the cubed-gradient form
    (a(a-1)/2) delta int int sgn(u)|u|^(a-2) sum_j (d_j u)^3.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    use_cubed = alpha >= 2 if form == "auto" else form == "cubed"
    if use_cubed and alpha < 2:
        raise ValueError("the cubed-gradient dispersive form needs alpha >= 2")

    a = float(alpha)
    u_t = traj.final()
    u_0 = traj.fields[0]
    vol_term = lambda f: np.abs(f.values) ** (a + 1.0) / (a + 1.0)
    lhs_mass = float(np.sum(vol_term(u_t))) * traj.grid.cell_volume
    rhs_mass = float(np.sum(vol_term(u_0))) * traj.grid.cell_volume
    diss = spacetime_integral(
        traj,
        lambda s, f: np.abs(f.values) ** (a - 1.0) * _dissipation_density(f, diff),
    )

    if use_cubed:
        def disp_density(s, f):
            grads = gradient(f)
            cubes = sum((g.values**3 for g in grads))
            return np.sign(f.values) * np.abs(f.values) ** (a - 2.0) * cubes
        dispersive = 0.5 * a * (a - 1.0) * delta * spacetime_integral(
            traj, disp_density)
    else:
        def disp_density(s, f):
            out = np.zeros(f.grid.shape)
            for ax, g in enumerate(gradient(f)):
                sq = Field(f.grid, g.values**2)
                d_sq = gradient(sq)[ax]
                out += d_sq.values
            return np.abs(f.values) ** (a - 1.0) * out
        dispersive = -0.5 * a * delta * spacetime_integral(traj, disp_density)

    lhs = lhs_mass + a * eps * diss
    rhs = rhs_mass + dispersive
    return {
        "lhs_terms": {"mass": lhs_mass, "dissipation": a * eps * diss},
        "dispersive_term": dispersive,
        "rhs_mass": rhs_mass,
        "imbalance": lhs - rhs,
    }


# ---------------------------------------------------------------------------
# a-priori L^p machinery


@dataclass(frozen=True)
class HnBoundParams:
    """Inputs of the recursive a-priori L^p bound.

    u0_norms[k] is the L^(k(r-1)+2) norm of the initial data, needed for
    every level up to n.  delta_ratio is the coupling delta * eps^(-3/(r+1)).
    """

    r: float
    n: int
    u0_norms: Sequence[float]
    t: float
    delta_ratio: float
    c: float = 1.0

    def __post_init__(self):
        if self.r < 2:
            raise ValueError("the recursion requires r >= 2")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if len(self.u0_norms) < self.n + 1:
            raise ValueError(f"need {self.n + 1} initial norms, "
                             f"got {len(self.u0_norms)}")
        if any(v < 0 for v in self.u0_norms):
            raise ValueError("norms must be nonnegative")


def hn_bound(p: HnBoundParams) -> float:
    """Recursive bound H_n on the L^(n(r-1)+2) energy of the solution.

    H_0 is the squared L^2 norm of the data; each level wraps the previous
    one with the coupling factor (1 + delta_ratio * max{1, [...]^((r-2)/3)}).
    """
    r, dr, t, c = p.r, p.delta_ratio, p.t, p.c
    e3 = 3.0 / (r + 1.0)

    h_prev = p.u0_norms[0] ** 2
    if p.n == 0:
        return h_prev
    for k in range(1, p.n + 1):
        pk = k * (r - 1.0) + 2.0
        pk_prev = (k - 1) * (r - 1.0) + 2.0
        combinatorial = (
            pk / pk_prev**e3
            * (pk - 1.0) / (pk_prev - 1.0) ** e3
            * k * (r - 1.0) / 2.0
        )
        ck = max(p.u0_norms[k] ** pk, combinatorial * (c * h_prev) ** e3)
        h_prev = ck * (1.0 + dr * max(1.0, (t * ck * (1.0 + dr)) ** ((r - 2.0) / 3.0)))
    return h_prev


def lp_bound_check(traj: Trajectory, r: float, n: int, hn: float) -> dict:
    """Compare max_t int |u(t)|^(n(r-1)+2) dx against the recursive bound."""
    p = n * (r - 1.0) + 2.0
    max_norm_power = max(lp_norm(f, p) ** p for f in traj.fields)
    return {"max_norm_power": max_norm_power, "bound": hn,
            "holds": bool(max_norm_power <= hn)}


def bootstrap_bound(k: float, delta_ratio: float, theta: float, r: float) -> float:
    """Closed-form consequence of X <= K (1 + Delta X^(theta/(r+1))):
    X <= max{1, [K(1+Delta)]^((r+1)/(r+1-theta))}."""
    if not 0 <= theta < r + 1:
        raise ValueError("need 0 <= theta < r+1")
    return max(1.0, (k * (1.0 + delta_ratio)) ** ((r + 1.0) / (r + 1.0 - theta)))


def h_regularity_check(traj: Trajectory, eps: float, r: float,
                       delta: float = 0.0) -> dict:
    """Weighted gradient/Hessian energies and the intermediate L^p budget.

    grad_term   = eps^((r+3)/(r+1)) * max_t int |grad u(t)|^2
    hessian_term= eps^(2(r+2)/(r+1)) * int int |D^2 u|^2
    lp_term     = max_t int |u(t)|^(2+(r-1)/r)
    mixed_term  = eps * int int |u|^((r-1)/r) |grad u|^(r+1)
    lp_factor   = 1 + delta^((r+1)/r) * eps^(-(r+3)/r)
    """
    if r < 1:
        raise ValueError("requires r >= 1")
    w_grad = eps ** ((r + 3.0) / (r + 1.0))
    w_hess = eps ** (2.0 * (r + 2.0) / (r + 1.0))
    grad_sq_max = max(
        float(np.sum(_grad_mag(f) ** 2)) * traj.grid.cell_volume
        for f in traj.fields
    )
    hess_int = spacetime_integral(traj, lambda s, f: _hessian_sq(f))
    p_mid = 2.0 + (r - 1.0) / r
    lp_max = max(lp_norm(f, p_mid) ** p_mid for f in traj.fields)
    mixed = eps * spacetime_integral(
        traj,
        lambda s, f: np.abs(f.values) ** ((r - 1.0) / r) * _grad_mag(f) ** (r + 1.0),
    )
    lp_factor = 1.0 + abs(delta) ** ((r + 1.0) / r) * eps ** (-(r + 3.0) / r) \
        if eps > 0 else np.inf
    return {
        "grad_term": w_grad * grad_sq_max,
        "hessian_term": w_hess * hess_int,
        "lp_term": lp_max,
        "mixed_term": mixed,
        "lp_factor": lp_factor,
    }


# ---------------------------------------------------------------------------
# entropy production


@dataclass(frozen=True)
class EntropyProductionReport:
    mu1: float
    mu2: float
    mu3: float
    epsilon: float
    delta: float
    sign_checked: bool = True

    @property
    def total(self) -> float:
        return self.mu1 + self.mu2 + self.mu3


def _eta_third(pair: EntropyPair):
    if getattr(pair, "eta_third", None) is not None:
        return pair.eta_third
    h = 1e-5

    def fd(u):
        u = np.asarray(u, dtype=float)
        return (np.asarray(pair.eta_second(u + h)) -
                np.asarray(pair.eta_second(u - h))) / (2.0 * h)

    return fd


def entropy_production(traj: Trajectory, pair: EntropyPair, theta: TestFunction,
                       eps: float, delta: float,
                       diff: DiffusionSpec) -> EntropyProductionReport:
    """Pair the three production terms of the entropy identity with theta.

    mu1: the eps-divergence flux term, integrated by parts onto grad theta.
    mu2: -eps int int theta eta''(u) grad u . b(grad u)  (<= 0 for convex eta).
    mu3: the delta-terms with all derivatives of theta analytic.
    """
    grid = traj.grid
    coords = grid.meshgrid()
    eta3 = _eta_third(pair)
    sign_checked = theta.nonneg

    def mu1_density(t, f):
        lam = np.stack([g.values for g in gradient(f)])
        b = np.asarray(diff.eval(lam))
        etap = np.asarray(pair.eta_prime(f.values))
        out = np.zeros(grid.shape)
        for ax in range(grid.dim):
            out -= etap * b[ax] * theta.dx(coords, t, ax)
        return eps * out

    def mu2_density(t, f):
        return -eps * theta.value(coords, t) * \
            np.asarray(pair.eta_second(f.values)) * _dissipation_density(f, diff)

    def mu3_density(t, f):
        grads = [g.values for g in gradient(f)]
        etap = np.asarray(pair.eta_prime(f.values))
        etapp = np.asarray(pair.eta_second(f.values))
        etappp = np.asarray(eta3(f.values))
        th = theta.value(coords, t)
        out = np.zeros(grid.shape)
        for ax in range(grid.dim):
            du = grads[ax]
            out += etappp * du**3 * th
            out += 3.0 * etapp * du**2 * theta.dx(coords, t, ax)
            out += 2.0 * etap * du * theta.dxx(coords, t, ax)
        return 0.5 * delta * out

    mu1 = spacetime_integral(traj, mu1_density)
    mu2 = spacetime_integral(traj, mu2_density)
    mu3 = spacetime_integral(traj, mu3_density)
    return EntropyProductionReport(mu1=mu1, mu2=mu2, mu3=mu3,
                                   epsilon=eps, delta=delta,
                                   sign_checked=sign_checked)


def production_scaling_fit(reports: Sequence[EntropyProductionReport]) -> dict:
    """Least-squares slopes of log|mu_i| against log eps across a sweep.

    Pairings below 1e-14 in magnitude are numerically zero and excluded.
    """
    eps = np.array([r.epsilon for r in reports], dtype=float)
    if len(eps) < 4:
        raise ValueError("need at least 4 sweep points")
    # 0.9 decades admits the canonical 2x-halving ladder 0.04..0.005
    if np.log10(np.max(eps) / np.min(eps)) < 0.9 - 1e-9:
        raise ValueError("sweep must span close to a decade in eps")

    def slope(values):
        v = np.abs(np.array(values, dtype=float))
        keep = v > 1e-14
        if np.sum(keep) < 2:
            return float("nan")
        return float(np.polyfit(np.log(eps[keep]), np.log(v[keep]), 1)[0])

    return {
        "mu1_slope": slope([r.mu1 for r in reports]),
        "mu3_slope": slope([r.mu3 for r in reports]),
    }


# ---------------------------------------------------------------------------
# Kruzkov residual and weak-limit diagnostics


def _tabulated_entropy_flux(flux: FluxSpec, eta_prime, lo: float, hi: float,
                            n_table: int = 8193):
    """Cumulative-trapezoid table of q(u) = int_0^u eta'(v) f'(v) dv."""
    lo = min(lo, 0.0) - 1e-9
    hi = max(hi, 0.0) + 1e-9
    u_tab = np.linspace(lo, hi, n_table)
    g = np.asarray(eta_prime(u_tab)) * np.asarray(flux.deriv(u_tab))[0]
    cum = np.concatenate([[0.0], np.cumsum((g[1:] + g[:-1]) * 0.5 * np.diff(u_tab))])
    q0 = np.interp(0.0, u_tab, cum)
    cum -= q0
    return lambda u: np.interp(u, u_tab, cum)


def kruzkov_residual(traj: Trajectory, flux: FluxSpec, k: float, rho: float,
                     theta: TestFunction) -> float:
    """Pairing of the smoothed |u-k| entropy residual with theta:

        - int int [ eta_rho(u) dtheta/dt + q_rho(u) . grad theta ] dx dt.

    Nonpositive (up to discretization and O(rho) smoothing slack) for
    entropy-dissipating solutions; persistently positive on oscillatory
    dispersive runs.
    """
    eta, eta_p, _ = kruzkov_entropy(k, rho)
    umin = min(float(np.min(f.values)) for f in traj.fields)
    umax = max(float(np.max(f.values)) for f in traj.fields)
    q_fun = _tabulated_entropy_flux(flux, eta_p, umin, umax)
    coords = traj.grid.meshgrid()

    def density(t, f):
        out = -np.asarray(eta(f.values)) * theta.dt(coords, t)
        q_vals = q_fun(f.values)
        for ax in range(traj.grid.dim):
            out -= q_vals * theta.dx(coords, t, ax)
        return out

    return spacetime_integral(traj, density)


@dataclass(frozen=True)
class Window:
    """Axis-aligned space-time box for sample pooling."""

    space: tuple   # ((lo, hi), ...) one pair per axis
    t: tuple       # (lo, hi)


@dataclass(frozen=True)
class YoungHistogram:
    edges: np.ndarray
    counts: np.ndarray
    per_run: list          # (label, mean, var) per pooled run
    concentration_score: float
    n_samples: int


def young_histogram(runs: Sequence[Trajectory], window: Window,
                    bins: int = 32, pool_fraction: float = 0.5) -> YoungHistogram:
    """Empirical one-point distribution of u pooled over a window.

    Runs are ordered by (epsilon, delta) and only the finest ``pool_fraction``
    tail contributes samples; the concentration score is the pooled variance,
    which tends to zero exactly when the limit is deterministic.
    """
    if len(runs) < 3:
        raise ValueError("need at least 3 runs")
    ordered = sorted(
        runs,
        key=lambda tr: (tr.params.get("epsilon", 0.0), tr.params.get("delta", 0.0)),
        reverse=True,
    )
    n_pool = max(1, int(math.ceil(len(ordered) * pool_fraction)))
    pooled = []
    per_run = []
    for tr in ordered[-n_pool:]:
        coords = tr.grid.meshgrid()
        mask = np.ones(tr.grid.shape, dtype=bool)
        for ax, (lo, hi) in enumerate(window.space):
            mask &= (coords[ax] >= lo) & (coords[ax] <= hi)
        if not np.any(mask):
            raise ValueError("window contains no grid cells")
        vals = []
        for t, f in zip(tr.times, tr.fields):
            if window.t[0] <= t <= window.t[1]:
                vals.append(f.values[mask])
        if not vals:
            raise ValueError("window contains no time samples")
        vals = np.concatenate(vals)
        label = (tr.params.get("epsilon", 0.0), tr.params.get("delta", 0.0))
        per_run.append((label, float(np.mean(vals)), float(np.var(vals))))
        pooled.append(vals)
    pooled = np.concatenate(pooled)
    counts, edges = np.histogram(pooled, bins=bins)
    return YoungHistogram(
        edges=edges,
        counts=counts,
        per_run=per_run,
        concentration_score=float(np.var(pooled)),
        n_samples=int(pooled.size),
    )


def initial_trace_check(traj: Trajectory, u0: Field, t_small: Sequence[float]):
    """Averaged initial-layer deviation (1/t) int_0^t int |u - u0| for each t.

    Must decrease toward zero as t -> 0 on convergent-regime runs.
    """
    out = []
    for t in t_small:
        sub = _restrict(traj, t)
        val = spacetime_integral(sub, lambda s, f: np.abs(f.values - u0.values))
        out.append(val / t)
    return out


# ---------------------------------------------------------------------------
# CSV report rows


def append_diagnostic_rows(path, rows):
    """Append (diag, name, param, value, holds) rows to a run's CSV report."""
    import os

    new = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        if new:
            fh.write("diag,name,param,value,holds\n")
        for diag, name, param, value, holds in rows:
            fh.write(f"{diag},{name},{param},{value!r},{int(bool(holds))}\n")
