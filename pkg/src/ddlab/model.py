"""Continuous-problem definitions: fluxes, diffusions, entropy pairs,
and sampling-based checks of the structural hypotheses (H1)-(H3).

All callables are vectorized over numpy arrays.  Flux evaluations return an
array with a leading component axis of length d; diffusions map gradient
vectors (component axis first) to vectors of the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "FluxSpec",
    "DiffusionSpec",
    "EntropyPair",
    "make_entropy_pair",
    "kruzkov_entropy",
    "check_growth_H1",
    "check_coercivity_H2",
    "check_H3",
    "burgers_flux",
    "advection_flux",
    "bounded_flux",
    "linear_diffusion",
    "power_diffusion",
    "flux_preset",
    "diffusion_preset",
    "tabulated_flux_from_csv",
]


@dataclass(frozen=True)
class FluxSpec:
    """A flux u -> f(u) in R^d with its derivative and growth metadata.

    ``eval`` and ``deriv`` take a scalar array and return an array with a
    leading axis of length ``dim``.  ``m``, ``c1``, ``c1p`` declare the
    growth bound |f'(u)| <= c1 + c1p |u|^(m-1).
    """

    eval: Callable
    deriv: Callable
    m: float
    c1: float
    c1p: float
    dim: int = 1
    name: str = "custom"

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("growth exponent m must be >= 0")
        if self.c1 <= 0 or self.c1p <= 0:
            raise ValueError("growth constants must be positive")


@dataclass(frozen=True)
class DiffusionSpec:
    """A diffusion lambda -> b(lambda) with Jacobian and coercivity metadata.

    ``r``, ``c2``, ``c3`` declare the sandwich
    c2 |l|^(r+1) <= l . b(l) <= c3 |l|^(r+1); ``claims_h3`` marks uniform
    positive-definiteness of the Jacobian.
    """

    eval: Callable
    jacobian: Callable
    r: float
    c2: float
    c3: float
    claims_h3: bool = False
    h3_constant: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("exponent r must be >= 0")
        if self.c2 <= 0 or self.c3 < self.c2:
            raise ValueError("need 0 < c2 <= c3")


@dataclass(frozen=True)
class EntropyPair:
    """Convex entropy eta with compatible flux q (q_j' = eta' f_j')."""

    eta: Callable
    eta_prime: Callable
    eta_second: Callable
    q: Callable
    eta_third: Callable | None = None
    kind: str = "custom"
    dim: int = 1


def _simpson_antiderivative(g, u, n_quad: int):
    """Composite-Simpson antiderivative of g from 0 to each entry of u."""
    u = np.asarray(u, dtype=float)
    out = np.empty(u.shape)
    it = np.nditer(u, flags=["multi_index"])
    for val in it:
        a = float(val)
        if a == 0.0:
            out[it.multi_index] = 0.0
            continue
        n = n_quad if n_quad % 2 == 0 else n_quad + 1
        s = np.linspace(0.0, a, n + 1)
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        h = a / n
        out[it.multi_index] = h / 3.0 * np.sum(w * g(s))
    return out


def make_entropy_pair(eta, eta_prime, eta_second, flux: FluxSpec,
                      u_range=(-2.0, 2.0), n_quad: int = 512,
                      eta_third=None, kind: str = "custom") -> EntropyPair:
    """Build an entropy pair with q_j(u) = int_0^u eta'(v) f_j'(v) dv.

    The flux q is anchored at q(0)=0 and computed by composite Simpson
    quadrature with n_quad panels.  Rejects eta that fails convexity on the
    sampled range.
    """
    if n_quad < 2:
        raise ValueError("n_quad must be >= 2")
    lo, hi = u_range
    samples = np.linspace(lo, hi, 257)
    curv = np.asarray(eta_second(samples), dtype=float)
    bad = np.where(curv < -1e-12)[0]
    if bad.size:
        raise ValueError(
            f"eta is not convex on the sampled range: eta''({samples[bad[0]]:g}) "
            f"= {curv[bad[0]]:g}"
        )

    dim = flux.dim

    def q(u):
        u = np.asarray(u, dtype=float)
        comps = []
        for j in range(dim):
            def gj(v, j=j):
                return np.asarray(eta_prime(v)) * np.asarray(flux.deriv(v))[j]
            comps.append(_simpson_antiderivative(gj, u, n_quad))
        return np.stack(comps)

    return EntropyPair(eta=eta, eta_prime=eta_prime, eta_second=eta_second,
                       q=q, eta_third=eta_third, kind=kind, dim=dim)


def kruzkov_entropy(k: float, rho: float):
    """Smoothed |u - k| entropy: eta(u) = sqrt((u-k)^2 + rho^2) - rho.

    Returns (eta, eta', eta'') in closed form.  eta'' > 0 everywhere and
    eta -> |u-k| uniformly as rho -> 0.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")

    def eta(u):
        return np.sqrt((np.asarray(u, dtype=float) - k) ** 2 + rho**2) - rho

    def eta_prime(u):
        w = np.asarray(u, dtype=float) - k
        return w / np.sqrt(w**2 + rho**2)

    def eta_second(u):
        w = np.asarray(u, dtype=float) - k
        return rho**2 / (w**2 + rho**2) ** 1.5

    return eta, eta_prime, eta_second


# ---------------------------------------------------------------------------
# hypothesis checks (sampling-based)


def check_growth_H1(flux: FluxSpec, u_range=(-10.0, 10.0), n_samples: int = 256) -> dict:
    """Check |f'(u)| <= c1 + c1p |u|^(m-1) on sampled u.

    Returns {holds, worst_ratio, witness}.  For m < 1 the bound blows up at
    u=0 and holds trivially there.
    """
    if n_samples < 16:
        raise ValueError("need at least 16 samples")
    u = np.linspace(u_range[0], u_range[1], n_samples)
    fp = np.asarray(flux.deriv(u))
    mag = np.sqrt(np.sum(fp**2, axis=0))
    with np.errstate(divide="ignore"):
        bound = flux.c1 + flux.c1p * np.abs(u) ** (flux.m - 1)
    ratio = np.where(np.isinf(bound), 0.0, mag / bound)
    i = int(np.argmax(ratio))
    return {
        "holds": bool(ratio[i] <= 1.0 + 1e-12),
        "worst_ratio": float(ratio[i]),
        "witness": float(u[i]),
    }


def check_coercivity_H2(diff: DiffusionSpec, lambda_samples) -> dict:
    """Check c2 <= l.b(l)/|l|^(r+1) <= c3 on the sampled gradient vectors."""
    worst_lower = np.inf
    worst_upper = -np.inf
    holds = True
    for lam in lambda_samples:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        mag = np.linalg.norm(lam)
        if mag == 0.0:
            continue
        dot = float(np.dot(lam, np.atleast_1d(diff.eval(lam))))
        if dot < 0:
            return {"holds": False, "worst_lower": dot, "worst_upper": dot,
                    "anti_dissipative": True}
        ratio = dot / mag ** (diff.r + 1)
        worst_lower = min(worst_lower, ratio)
        worst_upper = max(worst_upper, ratio)
        if ratio < diff.c2 - 1e-12 or ratio > diff.c3 + 1e-12:
            holds = False
    return {"holds": holds, "worst_lower": float(worst_lower),
            "worst_upper": float(worst_upper), "anti_dissipative": False}


def check_H3(diff: DiffusionSpec, lambda_samples, probe_vectors) -> dict:
    """Probe uniform positive-definiteness of sym(Db) along unit vectors."""
    min_proxy = np.inf
    for lam in lambda_samples:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        J = np.atleast_2d(diff.jacobian(lam))
        S = 0.5 * (J + J.T)
        for v in probe_vectors:
            v = np.atleast_1d(np.asarray(v, dtype=float))
            if abs(np.linalg.norm(v) - 1.0) > 1e-10:
                raise ValueError("probe vectors must be unit vectors")
            min_proxy = min(min_proxy, float(v @ S @ v))
    return {
        "min_eigen_proxy": float(min_proxy),
        "holds": bool(diff.claims_h3 and min_proxy >= diff.h3_constant - 1e-12),
    }


# ---------------------------------------------------------------------------
# built-in libraries


def burgers_flux(dim: int = 1) -> FluxSpec:
    """f(u) = u^2/2 in every component; m = 2."""
    def ev(u):
        u = np.asarray(u, dtype=float)
        return np.stack([0.5 * u**2] * dim)

    def dv(u):
        u = np.asarray(u, dtype=float)
        return np.stack([u] * dim)

    return FluxSpec(eval=ev, deriv=dv, m=2.0, c1=1.0, c1p=1.0, dim=dim,
                    name="burgers")


def advection_flux(a: float = 1.0, dim: int = 1) -> FluxSpec:
    """Linear advection f(u) = a u; m = 1."""
    def ev(u):
        u = np.asarray(u, dtype=float)
        return np.stack([a * u] * dim)

    def dv(u):
        u = np.asarray(u, dtype=float)
        return np.stack([np.full_like(u, a)] * dim)

    return FluxSpec(eval=ev, deriv=dv, m=1.0, c1=abs(a) + 1e-12, c1p=abs(a) + 1e-12,
                    dim=dim, name="advection")


def bounded_flux(dim: int = 1) -> FluxSpec:
    """f(u) = sqrt(1+u^2) - 1: nonlinear with |f'| <= 1, so m = 1."""
    def ev(u):
        u = np.asarray(u, dtype=float)
        return np.stack([np.sqrt(1.0 + u**2) - 1.0] * dim)

    def dv(u):
        u = np.asarray(u, dtype=float)
        return np.stack([u / np.sqrt(1.0 + u**2)] * dim)

    return FluxSpec(eval=ev, deriv=dv, m=1.0, c1=1.0, c1p=1.0, dim=dim,
                    name="bounded")


def linear_diffusion(dim: int = 1) -> DiffusionSpec:
    """b(l) = l: r = 1, exact sandwich constants 1, uniformly elliptic."""
    def ev(lam):
        return np.asarray(lam, dtype=float)

    def jac(lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        return np.eye(lam.shape[0])

    return DiffusionSpec(eval=ev, jacobian=jac, r=1.0, c2=1.0, c3=1.0,
                         claims_h3=True, h3_constant=1.0, name="linear")


def power_diffusion(r: float, dim: int = 1) -> DiffusionSpec:
    """b(l) = |l|^(r-1) l: exact sandwich with c2 = c3 = 1.

    The Jacobian degenerates at l = 0 for r > 1, so no uniform ellipticity
    is claimed there.
    """
    if r < 1:
        raise ValueError("power diffusion requires r >= 1")

    def ev(lam):
        # axis 0 is the component axis, as everywhere else
        lam = np.asarray(lam, dtype=float)
        mag = np.sqrt(np.sum(lam**2, axis=0, keepdims=True))
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(mag > 0, mag ** (r - 1), 0.0)
        return scale * lam

    def jac(lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        d = lam.shape[0]
        mag = np.linalg.norm(lam)
        if mag == 0.0:
            return np.zeros((d, d))
        outer = np.outer(lam, lam)
        return mag ** (r - 1) * np.eye(d) + (r - 1) * mag ** (r - 3) * outer

    return DiffusionSpec(eval=ev, jacobian=jac, r=float(r), c2=1.0, c3=1.0,
                         claims_h3=(r == 1), h3_constant=1.0 if r == 1 else 0.0,
                         name=f"power{r:g}")


_FLUXES = {
    "burgers": burgers_flux,
    "advection": advection_flux,
    "bounded": bounded_flux,
}


def flux_preset(name: str, dim: int = 1, **kwargs) -> FluxSpec:
    if name not in _FLUXES:
        raise KeyError(f"unknown flux preset {name!r}; have {sorted(_FLUXES)}")
    return _FLUXES[name](dim=dim, **kwargs)


def diffusion_preset(name: str, dim: int = 1) -> DiffusionSpec:
    if name == "linear":
        return linear_diffusion(dim=dim)
    if name.startswith("power"):
        return power_diffusion(float(name[5:]), dim=dim)
    raise KeyError(f"unknown diffusion preset {name!r}")


def tabulated_flux_from_csv(path, m: float, c1: float, c1p: float,
                            dim: int = 1) -> FluxSpec:
    """Build a flux from a CSV of rows u, f(u), f'(u) by linear interpolation."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    u_tab, f_tab, fp_tab = data[:, 0], data[:, 1], data[:, 2]
    order = np.argsort(u_tab)
    u_tab, f_tab, fp_tab = u_tab[order], f_tab[order], fp_tab[order]

    def ev(u):
        u = np.asarray(u, dtype=float)
        return np.stack([np.interp(u, u_tab, f_tab)] * dim)

    def dv(u):
        u = np.asarray(u, dtype=float)
        return np.stack([np.interp(u, u_tab, fp_tab)] * dim)

    return FluxSpec(eval=ev, deriv=dv, m=m, c1=c1, c1p=c1p, dim=dim,
                    name="tabulated")
