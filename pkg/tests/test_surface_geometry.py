import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cmcspheres import metric_models as mm
from cmcspheres import surface_geometry as sg
from cmcspheres.convergence import loglog_slope
from cmcspheres.errors import ContainmentError, DegenerateSurfaceError, DomainError
from cmcspheres.sphere_spectral import SphereField, get_grid, random_band_limited

G = get_grid(16)
CAT = mm.catalog()
FLAT = mm.flat()
SCHW = mm.schwarzschild(1.0)


def round_surface(lam, model, xi=(0.0, 0.0, 0.0), u=None):
    return sg.GraphSurface.round(G, np.asarray(xi, dtype=float), lam, model, u)


def test_flat_round_sphere():
    S = round_surface(10.0, FLAT)
    ext = sg.compute_extrinsic(S)
    assert np.abs(ext.H - 0.2).max() < 1e-13
    assert np.abs(ext.phys.hcirc_norm2).max() < 1e-26
    assert sg.area(S) == pytest.approx(400 * np.pi, rel=1e-13)
    assert sg.area(round_surface(3.0, FLAT)) == pytest.approx(36 * np.pi, rel=1e-13)


def test_schwarzschild_coordinate_sphere_oracle():
    S = round_surface(10.0, SCHW)
    ext = sg.compute_extrinsic(S)
    H0 = oracles.sphere_mean_curvature(10.0, 1.0)
    assert np.abs(ext.H - H0).max() < 1e-10 * H0
    assert sg.area(S) == pytest.approx(oracles.sphere_area(10.0, 1.0), rel=1e-12)
    assert sg.area(S) == pytest.approx(4 * np.pi * 100 * (1 + 1 / 20) ** 4, rel=1e-12)


def test_small_wobble_matches_flat_linearization():
    lam, eps = 10.0, 1e-4
    Y = SphereField.harmonic(G, 2, 1)
    ext = sg.compute_extrinsic(round_surface(lam, FLAT, u=Y * eps))
    predicted = 2 / lam + eps * (6 - 2) / lam**2 * Y.values
    assert np.abs(ext.H - predicted).max() < 10 * eps**2


def test_mean_curvature_jacobian_matches_fd():
    rng = np.random.default_rng(5)
    model = CAT["rt_tau08"]
    u = random_band_limited(G, rng, lmax=5, decay=2.0) * 0.3
    S = sg.GraphSurface(np.array([0.1, 0.2, -0.1]), 30.0, u, model)
    v = random_band_limited(G, rng, lmax=6, decay=2.0)
    J = sg.linearize_mean_curvature(S, v)
    h = 1e-4
    fd = (sg.compute_extrinsic(S.with_u(u + v * h)).H - sg.compute_extrinsic(S.with_u(u - v * h)).H) / (2 * h)
    assert np.abs(fd - J).max() < 1e-6 * np.abs(J).max()


def test_translation_variation_matches_fd():
    S = round_surface(25.0, SCHW, xi=(0.2, 0.0, 0.1))
    a = np.array([0.3, -0.4, 0.5])
    dH = sg.translation_variation_H(sg.compute_extrinsic(S), a)
    h = 1e-3

    def H_at(s):
        return sg.compute_extrinsic(round_surface(25.0, SCHW, xi=S.xi + s * a / 25.0)).H

    fd = (H_at(h) - H_at(-h)) / (2 * h)
    assert np.abs(fd - dH).max() < 1e-7 * np.abs(dH).max()


@pytest.mark.parametrize("name", ["flat", "schwarzschild_m1", "perturbed_tau08", "rt_tau08"])
def test_trace_identities(name):
    rng = np.random.default_rng(2)
    u = random_band_limited(G, rng, lmax=4, decay=2.0) * 1.0
    S = sg.GraphSurface(np.array([0.1, -0.2, 0.05]), 30.0, u, CAT[name])
    ph = sg.compute_extrinsic(S).phys
    scale = np.abs(ph.H).max()
    assert np.abs(np.einsum("nab,nab->n", ph.gamma_inv, ph.h) - ph.H).max() < 1e-11 * scale
    assert np.abs(np.einsum("nab,nab->n", ph.gamma_inv, ph.hcirc)).max() < 1e-11 * scale


def test_volume_normalization():
    for lam in (5.0, 20.0):
        assert sg.enclosed_volume_relative(round_surface(lam, FLAT)) == pytest.approx(
            oracles.flat_shell_volume(lam), rel=1e-13)
        shifted = round_surface(lam, FLAT, xi=(0.3, 0.0, 0.0))
        assert sg.enclosed_volume_relative(shifted) == pytest.approx(oracles.flat_shell_volume(lam), rel=1e-12)
    got = sg.enclosed_volume_relative(round_surface(10.0, SCHW))
    assert got == pytest.approx(oracles.region_volume(10.0, 20.0, 1.0), rel=1e-12)


def test_containment_and_degeneracy_errors():
    u = SphereField(G, values=np.full(G.size, 15.0))
    with pytest.raises(ContainmentError):
        sg.enclosed_volume_relative(round_surface(10.0, FLAT, u=u))
    with pytest.raises(DegenerateSurfaceError):
        round_surface(10.0, FLAT, u=SphereField(G, values=np.full(G.size, -10.0)))
    with pytest.raises(DomainError):
        round_surface(10.0, FLAT, xi=(1.0, 0.0, 0.0))


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["schwarzschild_m1", "perturbed_tau06", "rt_tau08"]))
def test_first_variations_of_area_and_volume(seed, name):
    rng = np.random.default_rng(seed)
    lam = 30.0
    u = random_band_limited(G, rng, lmax=5, decay=2.0) * 0.5
    v = random_band_limited(G, rng, lmax=5, decay=2.0)
    S = sg.GraphSurface(rng.uniform(-0.3, 0.3, 3), lam, u, CAT[name])
    ext = sg.compute_extrinsic(S)
    h = 1e-3
    A = lambda s: sg.area(S.with_u(u + v * s))
    V = lambda s: sg.enclosed_volume_relative(S.with_u(u + v * s))
    fdA = (8 * (A(h) - A(-h)) - (A(2 * h) - A(-2 * h))) / (12 * h)
    fdV = (8 * (V(h) - V(-h)) - (V(2 * h) - V(-2 * h))) / (12 * h)
    exA = sg.area_variation_u(ext, v)
    exV = sg.volume_variation_u(ext, v)
    assert abs(fdA - exA) < 1e-6 * abs(exA)
    assert abs(fdV - exV) < 1e-6 * abs(exV)
    assert exV == pytest.approx(float(np.sum(sg.volume_gradient_u(ext) * v.values)), rel=1e-12)


def test_divergence_theorem():
    rng = np.random.default_rng(8)
    u = random_band_limited(G, rng, lmax=6, decay=1.5)
    S = sg.GraphSurface(np.array([0.2, 0.1, 0.0]), 20.0, u, SCHW)
    assert np.abs(sg.divergence_check(S)).max() < 1e-10 * sg.euclidean_area(S)


def test_hawking_mass_examples():
    assert abs(sg.hawking_mass(round_surface(10.0, FLAT))) < 1e-13
    S = round_surface(20.0, SCHW)
    assert sg.hawking_mass(S) == pytest.approx(oracles.hawking_mass(20.0, 1.0), rel=1e-12)
    d = sg.surface_diagnostics(S)
    # m_H = sqrt(A/16pi) * deficit / 16pi
    A = 4 * np.pi * d.area_radius**2
    assert d.hawking_mass == pytest.approx(np.sqrt(A / (16 * np.pi)) * d.cy_deficit / (16 * np.pi), rel=1e-12)


def test_hawking_mass_nondecreasing_on_schwarzschild_family():
    vals = [sg.hawking_mass(round_surface(lam, SCHW)) for lam in (5.0, 10.0, 20.0, 40.0)]
    assert all(b >= a - 1e-13 for a, b in zip(vals, vals[1:]))


def test_diagnostics_fields():
    S = round_surface(20.0, SCHW, xi=(0.3, 0.0, 0.0))
    d = sg.surface_diagnostics(S)
    assert d.inner_radius == pytest.approx(np.linalg.norm(S.positions, axis=1).min())
    assert d.cy_slack >= -1e-8
    js = json.loads(sg.diagnostics_json(S))
    assert set(js) >= {"area_radius", "inner_radius", "hawking_mass", "cy_deficit", "hcirc_l2"}


def test_inverse_power_ratio_is_scale_stable():
    vals = [sg.inverse_power_ratio(round_surface(lam, SCHW, xi=(0.4, 0.0, 0.0))) for lam in (25.0, 100.0, 400.0)]
    c = vals[0]
    assert max(abs(v - c) for v in vals) < 1e-3 * c


def test_expansion_residuals_flat_vanish():
    r = sg.expansion_residuals(round_surface(20.0, FLAT))
    assert r["normal"] == r["area_element"] == r["mean_curvature"] == 0.0


def _residual_orders(model, lams=(20.0, 40.0, 80.0)):
    rows = [sg.expansion_residuals(round_surface(lam, model)) for lam in lams]
    out = {}
    for key in ("normal", "area_element", "mean_curvature"):
        vals = [r[key] for r in rows]
        out[key] = (-loglog_slope(lams, vals) if min(vals) > 1e-14 else np.inf, rows[0][key + "_order"])
    return out


def test_expansion_residual_order_schwarzschild():
    fitted, predicted = _residual_orders(SCHW)["mean_curvature"]
    assert fitted >= predicted - 0.2


def test_expansion_residual_orders_tau06():
    # perturbation strong enough to dominate the Schwarzschild quadratic terms at these radii
    model = mm.perturbed_schwarzschild(1.0, mm.lie_derivative_terms(0.6, amplitude=1.0), tau=0.6)
    for key, (fitted, predicted) in _residual_orders(model).items():
        assert abs(fitted - predicted) <= 0.25, key


def test_nodes_must_stay_outside_inner_ball():
    with pytest.raises(DomainError):
        sg.compute_extrinsic(round_surface(1.05, FLAT))
    sg.compute_extrinsic(round_surface(1.2, FLAT))
