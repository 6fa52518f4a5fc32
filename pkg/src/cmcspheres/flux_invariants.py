"""Asymptotic flux integrals: mass, center of mass, and their IBP identities.

All integrals over coordinate spheres use the sphere quadrature of
:mod:`sphere_spectral` scaled to the sphere radius.  Sign and normalization
of the center-of-mass flux:

    com_flux_form(r) = int_{S_r(0)} [ (D_nu tr s - div s(nu)) nu
                                      + s(nu, .)/r - tr s nu / r ] dmu_bar
    hamiltonian_com(r) = -r * com_flux_form(r) / (16 pi m)

which is the pointwise identity between the two integrands on S_r(0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import metric_models as mm
from . import surface_geometry as sg
from .convergence import fit_order, richardson
from .errors import DomainError, MassZeroError, NotCmcError
from .sphere_spectral import SphereGrid, get_grid

DEFAULT_LADDER = (25.0, 50.0, 100.0, 200.0, 400.0)


def _sphere(model, radius, grid, center=(0.0, 0.0, 0.0)):
    if radius <= 2.0:
        raise DomainError("flux spheres need radius > 2")
    n = grid.unit_normals
    x = np.asarray(center, dtype=float) + radius * n
    g, dg, _ = mm.eval_metric_jet(model, x)
    return x, n, g - np.eye(3), dg, grid.weights * radius**2


def _flux_pieces(sigma, dsig, nu):
    tr = np.einsum("nii->n", sigma)
    d_tr = np.einsum("nkii->nk", dsig)
    div = np.einsum("niij->nj", dsig)
    return tr, d_tr, div, np.einsum("nk,nk->n", nu, d_tr), np.einsum("nj,nj->n", div, nu)


def adm_mass(model, radius, grid: SphereGrid | None = None) -> float:
    """Coordinate-flux mass on S_radius(0)."""
    grid = grid or get_grid(16)
    x, n, sigma, dg, w = _sphere(model, radius, grid)
    # sum_ij x^i [d_j g_ij - d_i g_jj]
    integrand = np.einsum("ni,njij->n", x, dg) - np.einsum("ni,nijj->n", x, dg)
    return float(np.dot(w, integrand)) / (16.0 * np.pi * radius)


def hamiltonian_com_raw(model, radius, grid=None) -> np.ndarray:
    """16 pi m C(radius): the unnormalized center-of-mass flux."""
    grid = grid or get_grid(16)
    x, n, sigma, dg, w = _sphere(model, radius, grid)
    g = sigma + np.eye(3)
    t1 = np.einsum("nl,nj,niij->nl", x, x, dg) - np.einsum("nl,nj,njii->nl", x, x, dg)
    t2 = np.einsum("ni,nil->nl", x, g) - x * np.einsum("nii->n", g)[:, None]
    return (w @ (t1 - t2)) / radius


def hamiltonian_com(model, radius, mass=None, grid=None) -> np.ndarray:
    """Center-of-mass flux at one radius, normalized by the (extrapolated) mass."""
    if mass is None:
        mass = mass_limit(model, grid=grid)
    if abs(mass) < 1e-12:
        raise MassZeroError("center of mass needs nonzero mass")
    return hamiltonian_com_raw(model, radius, grid) / (16.0 * np.pi * mass)


def flux_forms(model, radius, grid=None):
    """(mass flux form, center-of-mass flux combination) on S_radius(0)."""
    grid = grid or get_grid(16)
    x, n, sigma, dg, w = _sphere(model, radius, grid)
    tr, d_tr, div, Dnu_tr, div_nu = _flux_pieces(sigma, dg, n)
    mass_form = float(np.dot(w, div_nu - Dnu_tr)) / (16.0 * np.pi)
    vec = ((Dnu_tr - div_nu)[:, None] * n
           + np.einsum("nij,nj->ni", sigma, n) / radius - (tr / radius)[:, None] * n)
    return mass_form, w @ vec


def mass_limit(model, radii=DEFAULT_LADDER, grid=None) -> float:
    vals = [adm_mass(model, r, grid) for r in radii]
    return richardson(radii, vals, order=None)[0]


@dataclass
class FluxReport:
    radius: float
    mass_estimate: float
    com_estimate: np.ndarray | None
    mass_flux_form: float
    com_flux_form: np.ndarray
    sequence: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


def flux_report(model, radius, grid=None, mass=None) -> FluxReport:
    mf, cf = flux_forms(model, radius, grid)
    m = adm_mass(model, radius, grid)
    com = None
    ref = mass if mass is not None else m
    if abs(ref) >= 1e-12:
        com = hamiltonian_com_raw(model, radius, grid) / (16.0 * np.pi * ref)
    return FluxReport(radius, m, com, mf, cf)


def flux_sequence(model, radii=DEFAULT_LADDER, grid=None, order=None) -> dict:
    """Flux values across a radius ladder with extrapolated limits and fitted orders.

    The mass series is extrapolated with leading order ``order``, fitted from
    the data when not given.  The center of mass is flagged as not converged
    when its successive differences do not shrink.
    """
    radii = [float(r) for r in radii]
    masses = np.array([adm_mass(model, r, grid) for r in radii])
    m_lim, p = richardson(radii, masses, order=order)
    forms = [flux_forms(model, r, grid) for r in radii]
    mforms = np.array([f[0] for f in forms])
    second = np.array([f[1] for f in forms])
    mf_lim, _ = richardson(radii, mforms, order=p)
    out = {
        "radii": radii,
        "mass": masses, "mass_limit": m_lim, "mass_order": p,
        "mass_flux_form": mforms, "mass_flux_form_limit": mf_lim,
        "com_flux_form": second,
        "com_flux_form_order": _decay_order(radii, second),
        "rt_conformant": model.rt_conformant,
    }
    if abs(m_lim) >= 1e-12:
        com = np.array([hamiltonian_com_raw(model, r, grid) for r in radii]) / (16 * np.pi * m_lim)
        diffs = np.linalg.norm(np.diff(com, axis=0), axis=1)
        order_c = fit_order(radii, com)
        scale = 1e-9 * max(1.0, float(np.max(np.abs(com))))
        shrinking = bool(np.all(diffs[1:] <= diffs[:-1] * 1.0001 + 1e-13)) and order_c > 0
        converged = bool(np.all(diffs < scale)) or shrinking
        out["com"] = com
        out["com_order"] = order_c
        out["com_converged"] = converged
        out["com_limit"] = richardson(radii, com, order=1.0)[0] if converged else None
    else:
        out["com"] = None
        out["com_converged"] = False
        out["com_limit"] = None
    return out


def _decay_order(radii, vals) -> float:
    mag = np.linalg.norm(np.asarray(vals).reshape(len(radii), -1), axis=1)
    if np.all(mag < 1e-300):
        return float("inf")
    keep = mag > 0
    return float(-np.polyfit(np.log(np.asarray(radii)[keep]), np.log(mag[keep]), 1)[0])


# ---------------------------------------------------------------------------
# integration-by-parts identities


def _ibp_terms(ext: sg.ExtrinsicData, a):
    a = np.asarray(a, dtype=float)
    sigma = ext.g - np.eye(3)
    dsig = ext.dg
    nb = ext.nu_bar
    tr, d_tr, div, Dnu_tr, div_nu = _flux_pieces(sigma, dsig, nb)
    Da_tr = d_tr @ a
    Da_snn = np.einsum("k,nkij,ni,nj->n", a, dsig, nb, nb)
    a_nu = nb @ a
    s_nu_a = np.einsum("ni,nij,j->n", nb, sigma, a)
    return sigma, tr, Da_tr, Da_snn, a_nu, s_nu_a, Dnu_tr, div_nu


def ibp_residual_sphere(model, xi, lam, a, grid=None) -> float:
    """|LHS - RHS| of the round-sphere integration-by-parts identity on S_{xi,lam}."""
    grid = grid or get_grid(16)
    S = sg.GraphSurface.round(grid, xi, lam, model)
    ext = sg.compute_extrinsic(S)
    sigma, tr, Da_tr, Da_snn, a_nu, s_nu_a, Dnu_tr, div_nu = _ibp_terms(ext, a)
    w = ext.dmu_bar
    lhs = np.dot(w, Da_tr - Da_snn - 2.0 / lam * tr * a_nu)
    rel = ext.X - S.center
    rhs = np.dot(w, (rel @ np.asarray(a, float)) / lam * (Dnu_tr - div_nu)
                 + s_nu_a / lam - a_nu * tr / lam)
    return float(abs(lhs - rhs))


def ibp_sides_surface(surface: sg.GraphSurface, a):
    """Both sides of the general closed-surface identity (Euclidean quantities)."""
    ext = sg.compute_extrinsic(surface)
    a = np.asarray(a, dtype=float)
    sigma, tr, Da_tr, Da_snn, a_nu, s_nu_a, Dnu_tr, div_nu = _ibp_terms(ext, a)
    bar = ext.bar
    w = ext.dmu_bar
    lhs = np.dot(w, Da_tr - Da_snn)
    Xa = ext.Xa
    gi = bar.gamma_inv
    hc = bar.hcirc
    a_t = np.einsum("anI,I->na", Xa, a)                       # a(X_b)
    s_nu_t = np.einsum("ni,nij,anj->na", ext.nu_bar, sigma, Xa)  # sigma(nu, X_b)
    s_tt = np.einsum("anI,nIJ,bnJ->nab", Xa, sigma, Xa)
    up = lambda T: np.einsum("nac,nbd,ncd->nab", gi, gi, T)
    hc_up = up(hc)
    t1 = np.einsum("nab,na,nb->n", hc_up, a_t, s_nu_t)
    t2 = a_nu * np.einsum("nab,nab->n", hc_up, s_tt)
    rhs = np.dot(w, a_nu * (Dnu_tr - div_nu) + 0.5 * bar.H * (s_nu_a + a_nu * tr) + t1 - t2)
    return float(lhs), float(rhs)


def ibp_residual_surface(surface: sg.GraphSurface, a) -> float:
    lhs, rhs = ibp_sides_surface(surface, a)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# drift obstruction


def drift_point(ext: sg.ExtrinsicData, H: float) -> np.ndarray:
    """xi_hat = H z / 2 - nu_bar(z) at the node z closest to the origin."""
    k = int(np.argmin(np.linalg.norm(ext.X, axis=1)))
    return 0.5 * H * ext.X[k] - ext.nu_bar[k]


def drift_obstruction(surface: sg.GraphSurface, a, cmc_tol: float = 1e-4, return_point=False):
    """Flux combination whose vanishing forces the drift xi_hat to balance the mass.

    For CMC surfaces it equals 16 pi m <a, xi_hat> to leading order.  The
    surface must be CMC up to a relative sup variation ``cmc_tol`` of H.
    """
    ext = sg.compute_extrinsic(surface)
    H = float(np.sum(ext.dmu * ext.H) / np.sum(ext.dmu))
    var = float(np.max(np.abs(ext.H - H)) / abs(H))
    if var > cmc_tol:
        raise NotCmcError(f"relative H variation {var:.3e} exceeds {cmc_tol:.1e}")
    a = np.asarray(a, dtype=float)
    xi_hat = drift_point(ext, H)
    sigma, tr, Da_tr, Da_snn, a_nu, s_nu_a, Dnu_tr, div_nu = _ibp_terms(ext, a)
    w = ext.dmu_bar
    lever = (0.5 * H * ext.X - xi_hat) @ a
    val = float(np.dot(w, (Dnu_tr - div_nu) * lever) + 0.5 * H * np.dot(w, s_nu_a - a_nu * tr))
    if return_point:
        return val, xi_hat
    return val


# ---------------------------------------------------------------------------
# geometric center of mass


@dataclass
class CmcCenterReport:
    lambdas: list
    barycenters: np.ndarray
    C_cmc: np.ndarray
    hamiltonian: np.ndarray | None
    C_hamiltonian: np.ndarray | None
    differences: list
    difference_limit: float | None

    def to_dict(self):
        return dict(self.__dict__)


def barycenter(surface: sg.GraphSurface) -> np.ndarray:
    ext = sg.compute_extrinsic(surface)
    return (ext.dmu @ ext.X) / np.sum(ext.dmu)


def cmc_center_of_mass(leaves, grid=None) -> CmcCenterReport:
    """Metric barycenters of foliation leaves with their extrapolation, next to the flux center."""
    lams = [lf.lam for lf in leaves]
    bary = np.array([barycenter(lf.surface) for lf in leaves])
    C_cmc = richardson(lams, bary, order=1.0)[0] if len(lams) > 1 else bary[-1]
    model = leaves[0].metric
    m = mass_limit(model, grid=grid)
    if abs(m) < 1e-12:
        raise MassZeroError("center of mass needs nonzero mass")
    ham = np.array([hamiltonian_com(model, lam, mass=m, grid=grid) for lam in lams])
    C_ham = richardson(lams, ham, order=1.0)[0] if len(lams) > 1 else ham[-1]
    diffs = [float(np.linalg.norm(b - h)) for b, h in zip(bary, ham)]
    return CmcCenterReport(lams, bary, C_cmc, ham, C_ham, diffs, float(np.linalg.norm(C_cmc - C_ham)))
