"""Flux/diffusion presets, entropy pairs, and hypothesis checks."""

import numpy as np
import pytest

from ddlab.model import (
    advection_flux,
    bounded_flux,
    burgers_flux,
    check_H3,
    check_coercivity_H2,
    check_growth_H1,
    diffusion_preset,
    flux_preset,
    kruzkov_entropy,
    linear_diffusion,
    make_entropy_pair,
    power_diffusion,
    tabulated_flux_from_csv,
    DiffusionSpec,
)


def test_burgers_flux_values():
    f = burgers_flux()
    u = np.array([-2.0, 0.0, 3.0])
    assert np.allclose(f.eval(u)[0], 0.5 * u**2)
    assert np.allclose(f.deriv(u)[0], u)
    assert f.m == 2.0


def test_growth_check_passes_presets():
    for flux in (burgers_flux(), advection_flux(a=0.5), bounded_flux()):
        rep = check_growth_H1(flux)
        assert rep["holds"], flux.name


def test_growth_check_catches_violation():
    # cubic flux declared with linear growth metadata
    f = burgers_flux()
    bad = type(f)(eval=lambda u: np.stack([np.asarray(u) ** 3]),
                  deriv=lambda u: np.stack([3.0 * np.asarray(u) ** 2]),
                  m=2.0, c1=1.0, c1p=1.0, name="cubic")
    rep = check_growth_H1(bad)
    assert not rep["holds"]
    assert abs(rep["witness"]) > 1.0


def test_coercivity_linear_diffusion():
    diff = linear_diffusion()
    samples = [np.array([v]) for v in np.linspace(-3, 3, 21) if v != 0]
    rep = check_coercivity_H2(diff, samples)
    assert rep["holds"]
    assert rep["worst_lower"] == pytest.approx(1.0)
    assert rep["worst_upper"] == pytest.approx(1.0)


def test_coercivity_power_diffusion_2d():
    diff = power_diffusion(2.0, dim=2)
    rng = np.random.default_rng(3)
    samples = rng.standard_normal((40, 2))
    rep = check_coercivity_H2(diff, samples)
    assert rep["holds"]


def test_coercivity_flags_anti_dissipative():
    diff = DiffusionSpec(
        eval=lambda lam: -np.asarray(lam, dtype=float),
        jacobian=lambda lam: -np.eye(np.atleast_1d(lam).shape[0]),
        r=1.0, c2=1.0, c3=1.0, name="backward")
    rep = check_coercivity_H2(diff, [np.array([1.0])])
    assert not rep["holds"]
    assert rep["anti_dissipative"]


def test_h3_linear_holds_power_degenerates():
    samples = [np.array([v]) for v in (-1.0, 0.5, 2.0)]
    probes = [np.array([1.0])]
    assert check_H3(linear_diffusion(), samples, probes)["holds"]
    rep = check_H3(power_diffusion(2.0), samples + [np.array([1e-8])], probes)
    # Jacobian collapses near the origin: no uniform lower bound
    assert not rep["holds"]
    assert rep["min_eigen_proxy"] < 0.5


def test_h3_rejects_non_unit_probe():
    with pytest.raises(ValueError):
        check_H3(linear_diffusion(), [np.array([1.0])], [np.array([2.0])])


def test_entropy_pair_quadrature_matches_closed_form():
    # eta = u^2, Burgers: q(u) = int_0^u 2v * v dv = 2 u^3 / 3
    pair = make_entropy_pair(
        eta=lambda u: np.asarray(u) ** 2,
        eta_prime=lambda u: 2.0 * np.asarray(u),
        eta_second=lambda u: np.full_like(np.asarray(u, dtype=float), 2.0),
        flux=burgers_flux(),
    )
    u = np.array([-1.5, -0.3, 0.0, 0.7, 2.0])
    assert np.allclose(pair.q(u)[0], 2.0 * u**3 / 3.0, atol=1e-10)


def test_entropy_pair_rejects_nonconvex():
    with pytest.raises(ValueError, match="not convex"):
        make_entropy_pair(
            eta=lambda u: np.asarray(u) ** 3,
            eta_prime=lambda u: 3.0 * np.asarray(u) ** 2,
            eta_second=lambda u: 6.0 * np.asarray(u),
            flux=burgers_flux(),
        )


def test_entropy_pair_rejects_bad_quadrature():
    with pytest.raises(ValueError):
        make_entropy_pair(
            eta=lambda u: np.asarray(u) ** 2,
            eta_prime=lambda u: 2.0 * np.asarray(u),
            eta_second=lambda u: np.full_like(np.asarray(u, dtype=float), 2.0),
            flux=burgers_flux(), n_quad=1,
        )


def test_kruzkov_entropy_limits():
    k = 0.4
    eta, ep, es = kruzkov_entropy(k, rho=1e-6)
    u = np.array([-1.0, 0.4, 2.0])
    assert np.allclose(eta(u), np.abs(u - k), atol=1e-5)
    assert ep(np.array([2.0])) == pytest.approx(1.0, abs=1e-6)
    assert ep(np.array([-1.0])) == pytest.approx(-1.0, abs=1e-6)
    assert np.all(es(u) >= 0.0)
    with pytest.raises(ValueError):
        kruzkov_entropy(0.0, rho=0.0)


def test_presets_lookup():
    assert flux_preset("burgers").name == "burgers"
    assert diffusion_preset("linear").r == 1.0
    assert diffusion_preset("power2").r == 2.0
    with pytest.raises(KeyError):
        flux_preset("nope")
    with pytest.raises(KeyError):
        diffusion_preset("nope")


def test_power_diffusion_requires_r_ge_1():
    with pytest.raises(ValueError):
        power_diffusion(0.5)


def test_power_diffusion_vectorized_matches_pointwise():
    diff = power_diffusion(3.0, dim=2)
    rng = np.random.default_rng(11)
    lam = rng.standard_normal((2, 5, 5))
    out = diff.eval(lam)
    for i in range(5):
        for j in range(5):
            v = lam[:, i, j]
            assert np.allclose(out[:, i, j],
                               np.linalg.norm(v) ** 2 * v)


def test_tabulated_flux(tmp_path):
    u = np.linspace(-2, 2, 401)
    path = tmp_path / "flux.csv"
    rows = np.column_stack([u, 0.5 * u**2, u])
    np.savetxt(path, rows, delimiter=",", header="u,f,fp", comments="")
    flux = tabulated_flux_from_csv(path, m=2.0, c1=1.0, c1p=1.0)
    probe = np.array([-1.0, 0.25, 1.5])
    assert np.allclose(flux.eval(probe)[0], 0.5 * probe**2, atol=1e-4)
    assert np.allclose(flux.deriv(probe)[0], probe, atol=1e-12)
