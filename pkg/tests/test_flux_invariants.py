import numpy as np
import pytest

import oracles
from cmcspheres import flux_invariants as fx
from cmcspheres import ls_solver as ls
from cmcspheres import metric_models as mm
from cmcspheres import surface_geometry as sg
from cmcspheres.convergence import fit_order, richardson
from cmcspheres.errors import DomainError, MassZeroError, NotCmcError
from cmcspheres.sphere_spectral import SphereField, get_grid

CAT = mm.catalog()
G = get_grid(16)


@pytest.mark.parametrize("r", [25.0, 100.0, 400.0])
def test_adm_mass_matches_radial_oracle(r):
    assert fx.adm_mass(CAT["schwarzschild_m1"], r) == pytest.approx(oracles.adm_mass_at(r, 1.0), rel=1e-13)


def test_adm_mass_flat_and_domain():
    assert fx.adm_mass(mm.flat(), 50.0) == 0.0
    with pytest.raises(DomainError):
        fx.adm_mass(CAT["schwarzschild_m1"], 1.5)


def test_mass_limits_and_translation_invariance():
    assert fx.mass_limit(CAT["schwarzschild_m1"]) == pytest.approx(1.0, abs=1e-6)
    shifted = mm.translated_schwarzschild(2.0, (3.0, -1.0, 0.5))
    assert fx.mass_limit(shifted) == pytest.approx(2.0, abs=1e-6)
    assert abs(fx.mass_limit(shifted) - fx.mass_limit(CAT["schwarzschild_m2"])) < 1e-6


def test_hamiltonian_com():
    c = fx.hamiltonian_com(CAT["schwarzschild_m1"], 100.0)
    assert np.linalg.norm(c) < 1e-10
    seq = fx.flux_sequence(CAT["translated_m1"])
    assert seq["com_converged"]
    assert np.linalg.norm(np.asarray(seq["com_limit"]) - [1.0, -0.5, 0.25]) < 1e-3
    with pytest.raises(MassZeroError):
        fx.hamiltonian_com(mm.flat(), 50.0)


def test_com_equivariance():
    c = np.array([0.5, 0.25, -1.0])
    base = CAT["translated_m1"]
    moved = mm.translated_schwarzschild(1.0, np.asarray(base.chart_shift) + c)
    a = np.asarray(fx.flux_sequence(base)["com_limit"])
    b = np.asarray(fx.flux_sequence(moved)["com_limit"])
    assert np.linalg.norm(b - a - c) < 1e-3


def test_non_rt_com_is_flagged():
    seq = fx.flux_sequence(CAT["non_rt_odd"])
    assert not seq["rt_conformant"]
    assert not seq["com_converged"] and seq["com_limit"] is None


def test_flux_forms():
    mf, cf = fx.flux_forms(mm.flat(), 30.0)
    assert mf == 0.0 and not np.any(cf)
    seq = fx.flux_sequence(CAT["schwarzschild_m1"])
    assert seq["mass_flux_form_limit"] == pytest.approx(1.0, abs=1e-6)
    seq06 = fx.flux_sequence(CAT["perturbed_tau06"])
    assert abs(seq06["mass_flux_form_limit"] - seq06["mass_limit"]) < 1e-4


@pytest.mark.parametrize("name", sorted(CAT))
def test_second_combination_decays(name):
    seq = fx.flux_sequence(CAT[name])
    mags = np.linalg.norm(seq["com_flux_form"], axis=1)
    assert np.all(mags < 1e-9) or seq["com_flux_form_order"] > 0


@pytest.mark.parametrize("name", sorted(CAT))
def test_ibp_identities_at_lmax16(name):
    model = CAT[name]
    lam = 50.0
    assert fx.ibp_residual_sphere(model, [0.3, 0.0, 0.0], lam, [1.0, 0.0, 0.0]) < 1e-9 * lam
    u = SphereField.harmonic(G, 2, 1, 0.05 * lam)
    S = sg.GraphSurface(np.array([0.1, 0.2, 0.0]), lam, u, model)
    assert fx.ibp_residual_surface(S, [0.6, 0.8, 0.0]) < 1e-8 * lam


def test_ibp_surface_reduces_to_sphere_and_flat():
    model = CAT["perturbed_tau08"]
    S = sg.GraphSurface.round(G, np.array([0.3, 0.0, 0.0]), 50.0, model)
    lhs, rhs = fx.ibp_sides_surface(S, [1.0, 0.0, 0.0])
    assert abs(lhs - rhs) < 1e-10
    Sf = sg.GraphSurface(np.array([0.1, 0.0, 0.0]), 20.0, SphereField.harmonic(G, 3, 2, 1.0), mm.flat())
    assert fx.ibp_sides_surface(Sf, [0.0, 0.0, 1.0]) == (0.0, 0.0)


def test_ibp_spectral_decay():
    model = CAT["rt_tau08"]
    res = [fx.ibp_residual_sphere(model, [0.5, 0.0, 0.0], 4.0, [1.0, 0.0, 0.0], grid=get_grid(L))
           for L in (4, 8, 12)]
    assert res[0] > res[1] > res[2]
    assert np.log2(res[0] / res[1]) > 4


def test_drift_obstruction_off_center():
    leaf = ls.solve_graph(np.array([0.5, 0.0, 0.0]), 200.0, CAT["schwarzschild_m1"], with_derivative=False)
    val, xh = fx.drift_obstruction(leaf.surface, [1.0, 0.0, 0.0], cmc_tol=2e-2, return_point=True)
    assert 0.85 <= val / (16 * np.pi * xh[0]) <= 1.15
    perp = fx.drift_obstruction(leaf.surface, [0.0, 1.0, 0.0], cmc_tol=2e-2)
    assert abs(perp) < 0.15 * 16 * np.pi
    with pytest.raises(NotCmcError):
        fx.drift_obstruction(leaf.surface, [1.0, 0.0, 0.0])


def test_drift_obstruction_centered_sphere_tracks_drift_point():
    # the drift point sits at the node nearest the origin, so it is O(1/lam) but not zero
    gaps = []
    for lam in (100.0, 400.0):
        S = sg.GraphSurface.round(G, np.zeros(3), lam, CAT["schwarzschild_m1"])
        val, xh = fx.drift_obstruction(S, [1.0, 0.0, 0.0], return_point=True)
        gaps.append(abs(val / (16 * np.pi * xh[0]) - 1))
    assert gaps[1] < gaps[0] < 0.05


def test_cmc_center_of_mass_translated():
    leaves, _ = ls.foliation_sweep(CAT["translated_m1"], [50.0, 100.0, 200.0])
    rep = fx.cmc_center_of_mass(leaves)
    c = np.array([1.0, -0.5, 0.25])
    assert np.linalg.norm(rep.C_cmc - c) < 1e-2
    assert np.linalg.norm(rep.C_hamiltonian - c) < 1e-3
    assert rep.differences[0] > rep.differences[1] > rep.differences[2]


def test_richardson_and_fit_order():
    r = np.array([25.0, 50.0, 100.0, 200.0, 400.0])
    v = 3.0 + 2.0 / r**0.6 - 1.0 / r**1.6
    assert fit_order(r, v) == pytest.approx(0.6, abs=0.05)
    L, p = richardson(r, v)
    assert p == pytest.approx(0.6)
    assert L == pytest.approx(3.0, abs=1e-10)
    L1, _ = richardson(r, np.column_stack([v, 2 * v]), order=0.6)
    assert np.allclose(L1, [3.0, 6.0], atol=1e-10)
