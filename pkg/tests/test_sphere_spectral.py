import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmcspheres import sphere_spectral as ss
from cmcspheres.errors import ShapeError
from cmcspheres.sphere_spectral import (LAMBDA0, LAMBDA01, LAMBDA1, HarmonicSubspace, SphereField,
                                        get_grid)

G16 = get_grid(16)


def test_grid_invariants():
    for lmax in (4, 16, 32):
        g = get_grid(lmax)
        assert abs(g.weights.sum() - 4 * np.pi) < 1e-13
        assert g.n_lat >= lmax + 1 and g.n_lon >= 2 * lmax + 1
    assert G16.Lmax == 16


def test_constant_coefficient():
    f = SphereField(G16, values=np.ones(G16.size))
    c = f.coeffs
    assert c[0] == pytest.approx(np.sqrt(4 * np.pi), rel=1e-14)
    assert np.abs(c[1:]).max() < 1e-13


def test_z_coordinate_is_single_l1_mode():
    z = G16.unit_normals[:, 2]
    c = G16.analyze(z)
    k = ss.lm_index(1, 0)
    assert np.abs(np.delete(c, k)).max() < 1e-14
    assert c[k] == pytest.approx(np.sqrt(4 * np.pi / 3), rel=1e-14)


def test_orthonormality():
    G = G16.Y.T @ (G16.weights[:, None] * G16.Y)
    assert np.abs(G - np.eye(G.shape[0])).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_and_parseval(seed):
    rng = np.random.default_rng(seed)
    f = ss.random_band_limited(G16, rng, decay=0.0)
    v = f.values
    assert np.abs(G16.synthesize(G16.analyze(v)) - v).max() < 1e-12
    assert abs(G16.integrate(v * v) - np.sum(f.coeffs**2)) <= 1e-10 * np.sum(f.coeffs**2)


def test_laplacian_eigenvalues():
    ell = G16.degrees
    for k in range(ell.size):
        Y = SphereField(G16, coeffs=np.eye(ell.size)[k])
        lap = ss.laplacian(Y)
        assert np.allclose(lap.coeffs, -ell[k] * (ell[k] + 1) * Y.coeffs, rtol=1e-10, atol=1e-14)


def test_laplacian_examples():
    Y2 = SphereField.harmonic(G16, 2, 1)
    assert np.allclose(ss.laplacian(Y2).values, -6 * Y2.values, atol=1e-12)
    one = SphereField(G16, values=np.ones(G16.size))
    assert np.abs(ss.laplacian(one, radius=7.0).values).max() < 1e-13
    Y1 = SphereField.harmonic(G16, 1, -1)
    lam = 30.0
    assert np.allclose(ss.laplacian(Y1, lam).values, -2 / lam**2 * Y1.values, atol=1e-15)


def test_laplacian_matches_spectral_derivatives():
    # the theta/phi derivative tables give the same Laplacian as the eigenvalue rule
    rng = np.random.default_rng(1)
    f = ss.random_band_limited(G16, rng)
    t = G16.theta
    lap = (f.derivative("tt") + np.cos(t) / np.sin(t) * f.derivative("t")
           + f.derivative("pp") / np.sin(t) ** 2)
    assert np.abs(lap - ss.laplacian(f).values).max() < 1e-10


def test_projection_examples():
    f = (SphereField(G16, values=np.ones(G16.size)) + SphereField.harmonic(G16, 1, 0)
         + SphereField.harmonic(G16, 2, -2))
    p = ss.project(f, LAMBDA01)
    expected = SphereField(G16, values=np.ones(G16.size)) + SphereField.harmonic(G16, 1, 0)
    assert np.abs(p.values - expected.values).max() < 1e-13
    assert np.abs(ss.project(p, LAMBDA01).coeffs - p.coeffs).max() == 0.0
    whole = ss.project(f, LAMBDA1) + ss.project(f, LAMBDA1.perp())
    assert np.abs(whole.coeffs - f.coeffs).max() < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sets(st.integers(0, 16), min_size=1, max_size=6))
def test_projection_is_self_adjoint(seed, degs):
    rng = np.random.default_rng(seed)
    sub = HarmonicSubspace(frozenset(degs))
    f = ss.random_band_limited(G16, rng)
    g = ss.random_band_limited(G16, rng)
    lhs = ss.project(f, sub).dot(g)
    rhs = f.dot(ss.project(g, sub))
    assert abs(lhs - rhs) < 1e-12 * (1 + abs(lhs))


def test_flat_stability_form_examples():
    Y2 = SphereField.harmonic(G16, 2, 0)
    assert ss.flat_stability_quadratic_form(Y2) == pytest.approx(4.0, abs=1e-12)
    one = SphereField(G16, values=np.full(G16.size, 1 / np.sqrt(4 * np.pi)))
    assert ss.flat_stability_quadratic_form(one) == pytest.approx(-2.0, abs=1e-12)
    assert ss.flat_stability_quadratic_form(SphereField.harmonic(G16, 1, 1)) == pytest.approx(0.0, abs=1e-12)


def test_flat_stability_bound_on_random_fields():
    rng = np.random.default_rng(11)
    for _ in range(200):
        f = ss.random_band_limited(G16, rng, decay=0.5, exclude=(0, 1))
        assert ss.flat_stability_quadratic_form(f) >= 4 * f.norm() ** 2 - 1e-9


def test_subspace_dimensions():
    assert LAMBDA0.dimension(16) == 1
    assert LAMBDA1.dimension(16) == 3
    assert LAMBDA01.perp().dimension(16) == 17**2 - 4


def test_shape_mismatch():
    a = SphereField.harmonic(G16, 2, 0)
    b = SphereField.harmonic(get_grid(8), 2, 0)
    with pytest.raises(ShapeError):
        a + b


def test_csv_export(tmp_path):
    f = SphereField.harmonic(get_grid(4), 2, 0)
    p = tmp_path / "f.csv"
    f.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "theta,phi,value"
    assert len(lines) == f.grid.size + 1
