"""Extrinsic geometry of graphs over round spheres.

A :class:`GraphSurface` is the set  X = lam*xi + (lam + u(n)) n  for unit
vectors n.  Geometry is evaluated node-wise in the ambient Cartesian frame
from the analytic theta/phi derivatives of this embedding, in both the
Euclidean metric and the physical metric of the model.

Conventions: the normal points outward, the second fundamental form is
h(X, Y) = -g(D_X Y, nu), so round spheres in flat space have H = +2/r.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from . import metric_models as mm
from .errors import ContainmentError, DegenerateSurfaceError, DomainError
from .sphere_spectral import SphereField, SphereGrid

# Derivative slots of the embedding.  Second derivatives are stored as
# [tt, tp, pp]; PAIRS maps them to (a, b).
PAIRS = ((0, 0), (0, 1), (1, 1))


# keep a margin above the unit chart ball so the inner radius stays meaningful
MIN_NODE_RADIUS = 1.1


@dataclass
class GraphSurface:
    xi: np.ndarray
    lam: float
    u: SphereField
    metric: mm.MetricModel
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(3)
        self.lam = float(self.lam)
        if self.lam <= 1.0:
            raise DomainError("radius scale must exceed 1")
        if np.linalg.norm(self.xi) >= 1.0:
            raise DomainError("|xi| must be < 1")
        if np.any(self.u.values <= -self.lam):
            raise DegenerateSurfaceError("graph function must satisfy u > -lambda at every node")

    @classmethod
    def round(cls, grid: SphereGrid, xi, lam, metric, u=None):
        if u is None:
            u = SphereField.zeros(grid)
        return cls(np.asarray(xi, dtype=float), lam, u, metric)

    @property
    def grid(self) -> SphereGrid:
        return self.u.grid

    @property
    def center(self) -> np.ndarray:
        return self.lam * self.xi

    @property
    def radial(self) -> np.ndarray:
        """Node values of lam + u (distance from the center along each ray)."""
        return self.lam + self.u.values

    def with_u(self, u: SphereField) -> "GraphSurface":
        return GraphSurface(self.xi.copy(), self.lam, u, self.metric)

    def embedding_jet(self):
        """X, X_a (2, N, 3) and X_ab (3, N, 3)."""
        if "jet" in self._cache:
            return self._cache["jet"]
        g = self.grid
        n = g.unit_normals
        n_t, n_p, n_tt, n_tp, n_pp = g.normal_derivatives
        rho = self.radial[:, None]
        u = self.u
        ut, up = u.derivative("t")[:, None], u.derivative("p")[:, None]
        utt, utp, upp = (u.derivative(k)[:, None] for k in ("tt", "tp", "pp"))
        X = self.center + rho * n
        Xa = np.stack([ut * n + rho * n_t, up * n + rho * n_p])
        Xab = np.stack([
            utt * n + 2 * ut * n_t + rho * n_tt,
            utp * n + ut * n_p + up * n_t + rho * n_tp,
            upp * n + 2 * up * n_p + rho * n_pp,
        ])
        self._cache["jet"] = (X, Xa, Xab)
        return self._cache["jet"]

    @property
    def positions(self) -> np.ndarray:
        return self.embedding_jet()[0]


@dataclass
class SideGeometry:
    """Fundamental forms of the surface with respect to one ambient metric."""

    gamma: np.ndarray       # (N, 2, 2) induced metric
    gamma_inv: np.ndarray
    h: np.ndarray           # (N, 2, 2)
    H: np.ndarray           # (N,)
    normal: np.ndarray      # (N, 3) unit normal vector
    area_element: np.ndarray  # sqrt(det gamma)/sin(theta); integrate as sum(w * this * f)
    hcirc: np.ndarray       # (N, 2, 2) traceless part h - H gamma / 2
    hcirc_norm2: np.ndarray  # |hcirc|^2
    h_norm2: np.ndarray     # |h|^2
    s: np.ndarray           # |N|_g for the Euclidean cross product N = X_t x X_p
    W: np.ndarray           # g^-1 N
    Q: np.ndarray           # (N, 2, 2) unnormalized second form so that h = -Q / s


@dataclass
class ExtrinsicData:
    surface: GraphSurface
    X: np.ndarray
    Xa: np.ndarray
    Xab: np.ndarray
    cross: np.ndarray       # X_t x X_p
    g: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray
    ginv: np.ndarray
    chris: np.ndarray       # Christoffel symbols of the first kind [l, i, j]
    bar: SideGeometry
    phys: SideGeometry

    # convenience aliases
    @property
    def H(self):
        return self.phys.H

    @property
    def H_bar(self):
        return self.bar.H

    @property
    def nu(self):
        return self.phys.normal

    @property
    def nu_bar(self):
        return self.bar.normal

    @property
    def weights(self) -> np.ndarray:
        return self.surface.grid.weights

    def integrate(self, f, euclidean=False) -> float:
        side = self.bar if euclidean else self.phys
        return float(np.sum(self.weights * side.area_element * f))

    @property
    def dmu(self) -> np.ndarray:
        return self.weights * self.phys.area_element

    @property
    def dmu_bar(self) -> np.ndarray:
        return self.weights * self.bar.area_element

    def to_dict(self) -> dict:
        return {
            "H": self.phys.H, "H_bar": self.bar.H, "nu": self.phys.normal,
            "nu_bar": self.bar.normal, "positions": self.X,
            "hcirc_norm2": self.phys.hcirc_norm2, "dmu": self.dmu, "dmu_bar": self.dmu_bar,
        }

    def to_csv(self, path):
        g = self.surface.grid
        cols = ["theta", "phi", "x", "y", "z", "H", "H_bar", "hcirc_norm2", "dmu", "dmu_bar"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for k in range(g.size):
                row = [g.theta[k], g.phi[k], *self.X[k], self.phys.H[k], self.bar.H[k],
                       self.phys.hcirc_norm2[k], self.dmu[k], self.dmu_bar[k]]
                w.writerow([repr(float(v)) for v in row])


def _side(Xa, Xab, cross, g, ginv, chris, sin_t):
    gamma = np.einsum("anI,nIJ,bnJ->nab", Xa, g, Xa)
    det = gamma[:, 0, 0] * gamma[:, 1, 1] - gamma[:, 0, 1] ** 2
    if np.any(det / sin_t**2 < 1e-14):
        raise DegenerateSurfaceError("induced metric is degenerate at some node")
    gi = np.empty_like(gamma)
    gi[:, 0, 0] = gamma[:, 1, 1] / det
    gi[:, 1, 1] = gamma[:, 0, 0] / det
    gi[:, 0, 1] = gi[:, 1, 0] = -gamma[:, 0, 1] / det
    W = np.einsum("nij,nj->ni", ginv, cross)
    s = np.sqrt(np.einsum("ni,ni->n", cross, W))
    if chris is None:
        contracted = None
    else:
        contracted = np.einsum("nl,nlij->nij", W, chris)
    Q = np.empty_like(gamma)
    for k, (a, b) in enumerate(PAIRS):
        q = np.einsum("ni,ni->n", cross, Xab[k])
        if contracted is not None:
            q = q + np.einsum("ni,nij,nj->n", Xa[a], contracted, Xa[b])
        Q[:, a, b] = q
        Q[:, b, a] = q
    h = -Q / s[:, None, None]
    H = np.einsum("nab,nab->n", gi, h)
    hc = h - 0.5 * H[:, None, None] * gamma
    # |T|^2 = gamma^ac gamma^bd T_ab T_cd
    hc2 = np.einsum("nac,nbd,nab,ncd->n", gi, gi, hc, hc)
    h2 = np.einsum("nac,nbd,nab,ncd->n", gi, gi, h, h)
    normal = W / s[:, None]
    return SideGeometry(gamma, gi, h, H, normal, np.sqrt(det) / sin_t, hc, hc2, h2, s, W, Q)


def compute_extrinsic(surface: GraphSurface) -> ExtrinsicData:
    if "extrinsic" in surface._cache:
        return surface._cache["extrinsic"]
    X, Xa, Xab = surface.embedding_jet()
    if np.any(np.linalg.norm(X, axis=1) <= MIN_NODE_RADIUS):
        raise DomainError(f"surface nodes must satisfy |x| > {MIN_NODE_RADIUS}")
    cross = np.cross(Xa[0], Xa[1])
    g, dg, ddg = mm.eval_metric_jet(surface.metric, X)
    ginv = np.linalg.inv(g)
    chris = mm.christoffel_first(dg)
    sin_t = np.sin(surface.grid.theta)
    eye = np.broadcast_to(np.eye(3), g.shape)
    bar = _side(Xa, Xab, cross, eye, eye, None, sin_t)
    phys = _side(Xa, Xab, cross, g, ginv, chris, sin_t)
    ext = ExtrinsicData(surface, X, Xa, Xab, cross, g, dg, ddg, ginv, chris, bar, phys)
    surface._cache["extrinsic"] = ext
    return ext


def area(surface: GraphSurface) -> float:
    ext = compute_extrinsic(surface)
    return float(np.sum(ext.dmu))


def euclidean_area(surface: GraphSurface) -> float:
    ext = compute_extrinsic(surface)
    return float(np.sum(ext.dmu_bar))


# ---------------------------------------------------------------------------
# volume

_GAUSS_RADIAL = 64


def enclosed_volume_relative(surface: GraphSurface, n_radial: int = _GAUSS_RADIAL) -> float:
    """Metric volume of the region between the surface and |x| = 2*lam.

    Integrated along rays from the center lam*xi, on which the region is the
    interval from the surface out to the big sphere.
    """
    lam = surface.lam
    X = surface.positions
    if np.any(np.linalg.norm(X, axis=1) >= 2.0 * lam):
        raise ContainmentError("surface is not contained in the ball of radius 2*lambda")
    c = surface.center
    n = surface.grid.unit_normals
    cn = n @ c
    r_out = -cn + np.sqrt(cn**2 + 4.0 * lam**2 - c @ c)
    r_in = surface.radial
    t, wt = roots_legendre(n_radial)
    half = 0.5 * (r_out - r_in)
    mid = 0.5 * (r_out + r_in)
    r = mid[:, None] + half[:, None] * t[None, :]
    pts = c + r[..., None] * n[:, None, :]
    g = mm.eval_metric(surface.metric, pts)
    vol_form = np.sqrt(mm.det3(g)) * r**2
    ray = half * (vol_form @ wt)
    return float(np.dot(surface.grid.weights, ray))


def volume_variation(ext: ExtrinsicData, dX) -> float:
    """First variation of the relative volume under the displacement field dX."""
    sqrt_det = np.sqrt(mm.det3(ext.g))
    flux = np.einsum("ni,ni->n", dX, ext.cross) * sqrt_det
    return -float(np.sum(ext.weights / np.sin(ext.surface.grid.theta) * flux))


def volume_gradient_u(ext: ExtrinsicData) -> np.ndarray:
    """Node weights c with  d vol = sum(c * v)  for u -> u + v."""
    rho = ext.surface.radial
    return -ext.weights * rho**2 * np.sqrt(mm.det3(ext.g))


def area_variation_u(ext: ExtrinsicData, v) -> float:
    """First variation of the metric area for u -> u + v: the integral of H v g(n, nu)."""
    v = v.values if isinstance(v, SphereField) else np.asarray(v, dtype=float)
    n = ext.surface.grid.unit_normals
    speed = np.einsum("ni,nij,nj->n", n, ext.g, ext.nu)
    return float(np.sum(ext.dmu * ext.H * v * speed))


def volume_variation_u(ext: ExtrinsicData, v) -> float:
    """Same for the relative volume: minus the integral of v g(n, nu)."""
    v = v.values if isinstance(v, SphereField) else np.asarray(v, dtype=float)
    n = ext.surface.grid.unit_normals
    speed = np.einsum("ni,nij,nj->n", n, ext.g, ext.nu)
    return -float(np.sum(ext.dmu * v * speed))


# ---------------------------------------------------------------------------
# linearization of the mean curvature


def _seed_jets(grid: SphereGrid):
    """Embedding-jet variations for the six u-jet seeds (v, v_t, v_p, v_tt, v_tp, v_pp)."""
    n = grid.unit_normals
    n_t, n_p, n_tt, n_tp, n_pp = grid.normal_derivatives
    z = np.zeros_like(n)
    seeds = [
        (n, (n_t, n_p), (n_tt, n_tp, n_pp)),
        (z, (n, z), (2 * n_t, n_p, z)),
        (z, (z, n), (z, n_t, 2 * n_p)),
        (z, (z, z), (n, z, z)),
        (z, (z, z), (z, n, z)),
        (z, (z, z), (z, z, n)),
    ]
    return seeds


SEED_BASIS = (None, "t", "p", "tt", "tp", "pp")


def mean_curvature_variation(ext: ExtrinsicData, dX, dXa, dXab) -> np.ndarray:
    """Directional derivative of the node values of H for an embedding variation.

    ``dX`` is (N, 3), ``dXa`` a pair and ``dXab`` a triple of (N, 3) arrays
    giving the variation of X, X_a, X_ab.  The result is exact (forward mode).
    """
    Xa, Xab, cross = ext.Xa, ext.Xab, ext.cross
    ph = ext.phys
    ginv = ext.ginv
    dgv = np.einsum("nkij,nk->nij", ext.dg, dX)
    ddgv = np.einsum("nlkij,nl->nkij", ext.ddg, dX)
    dchris = mm.christoffel_first(ddgv)
    dginv = -np.einsum("nia,nab,nbj->nij", ginv, dgv, ginv)
    dcross = np.cross(dXa[0], Xa[1]) + np.cross(Xa[0], dXa[1])
    dW = np.einsum("nij,nj->ni", dginv, cross) + np.einsum("nij,nj->ni", ginv, dcross)
    ds2 = 2.0 * np.einsum("ni,ni->n", dcross, ph.W) + np.einsum("ni,nij,nj->n", cross, dginv, cross)
    ds = ds2 / (2.0 * ph.s)
    Wc = np.einsum("nl,nlij->nij", ph.W, ext.chris)
    dWc = np.einsum("nl,nlij->nij", dW, ext.chris) + np.einsum("nl,nlij->nij", ph.W, dchris)
    dgamma = np.empty_like(ph.gamma)
    dQ = np.empty_like(ph.gamma)
    for a in range(2):
        for b in range(a, 2):
            v = (np.einsum("ni,nij,nj->n", dXa[a], ext.g, Xa[b])
                 + np.einsum("ni,nij,nj->n", Xa[a], ext.g, dXa[b])
                 + np.einsum("ni,nij,nj->n", Xa[a], dgv, Xa[b]))
            dgamma[:, a, b] = dgamma[:, b, a] = v
    for k, (a, b) in enumerate(PAIRS):
        q = (np.einsum("ni,ni->n", dcross, Xab[k]) + np.einsum("ni,ni->n", cross, dXab[k])
             + np.einsum("ni,nij,nj->n", Xa[a], dWc, Xa[b])
             + np.einsum("ni,nij,nj->n", dXa[a], Wc, Xa[b])
             + np.einsum("ni,nij,nj->n", Xa[a], Wc, dXa[b]))
        dQ[:, a, b] = dQ[:, b, a] = q
    s = ph.s[:, None, None]
    dh = -dQ / s + ph.Q * (ds[:, None, None] / s**2)
    gi = ph.gamma_inv
    dH = (-np.einsum("nac,ncd,ndb,nab->n", gi, dgamma, gi, ph.h)
          + np.einsum("nab,nab->n", gi, dh))
    return dH


def mean_curvature_jacobian(ext: ExtrinsicData) -> np.ndarray:
    """Matrix J (n_nodes x n_coeffs) with  dH = J @ dcoeffs  for u -> u + v."""
    grid = ext.surface.grid
    J = np.zeros((grid.size, grid.Y.shape[1]))
    for (dX, dXa, dXab), name in zip(_seed_jets(grid), SEED_BASIS):
        c = mean_curvature_variation(ext, dX, dXa, dXab)
        B = grid.Y if name is None else grid.basis_derivative(name)
        J += c[:, None] * B
    return J


def linearize_mean_curvature(surface: GraphSurface, v: SphereField) -> np.ndarray:
    """Node values of dH in direction v of the graph function."""
    ext = compute_extrinsic(surface)
    return mean_curvature_jacobian(ext) @ v.coeffs


def translation_variation_H(ext: ExtrinsicData, a) -> np.ndarray:
    """dH when the whole surface is translated by the constant vector a."""
    N = ext.X.shape[0]
    dX = np.broadcast_to(np.asarray(a, dtype=float), (N, 3))
    z = np.zeros((N, 3))
    return mean_curvature_variation(ext, dX, (z, z), (z, z, z))


# ---------------------------------------------------------------------------
# diagnostics


def hawking_mass(surface: GraphSurface) -> float:
    ext = compute_extrinsic(surface)
    A = float(np.sum(ext.dmu))
    w = float(np.sum(ext.dmu * ext.H**2))
    return np.sqrt(A / (16.0 * np.pi)) * (1.0 - w / (16.0 * np.pi))


@dataclass
class SurfaceDiagnostics:
    area_radius: float
    inner_radius: float
    hawking_mass: float
    cy_deficit: float
    hcirc_l2: float
    scalar_curvature_integral: float
    cy_slack: float  # cy_deficit - (2/3)(hcirc_l2 + int R)

    def to_dict(self):
        return dict(self.__dict__)


def surface_diagnostics(surface: GraphSurface) -> SurfaceDiagnostics:
    ext = compute_extrinsic(surface)
    A = float(np.sum(ext.dmu))
    r = np.linalg.norm(ext.X, axis=1)
    R = mm.scalar_curvature(surface.metric, ext.X) if surface.metric.kind is not mm.Kind.FLAT else 0.0 * r
    intR = float(np.sum(ext.dmu * R))
    deficit = 16.0 * np.pi - float(np.sum(ext.dmu * ext.H**2))
    hc = float(np.sum(ext.dmu * ext.phys.hcirc_norm2))
    return SurfaceDiagnostics(
        area_radius=float(np.sqrt(A / (4.0 * np.pi))),
        inner_radius=float(r.min()),
        hawking_mass=hawking_mass(surface),
        cy_deficit=deficit,
        hcirc_l2=hc,
        scalar_curvature_integral=intR,
        cy_slack=deficit - 2.0 / 3.0 * (hc + intR),
    )


def inverse_power_ratio(surface: GraphSurface, q: float = 3.0) -> float:
    """rho^(q-2) int |x|^-q dmu_bar  divided by  int H_bar^2 dmu_bar."""
    ext = compute_extrinsic(surface)
    r = np.linalg.norm(ext.X, axis=1)
    lhs = r.min() ** (q - 2) * float(np.sum(ext.dmu_bar * r**-q))
    return lhs / float(np.sum(ext.dmu_bar * ext.H_bar**2))


def first_order_expansions(ext: ExtrinsicData):
    """First-order-in-sigma predictions for nu - nu_bar, dmu/dmu_bar - 1, H - H_bar."""
    nb = ext.bar.normal
    sigma = ext.g - np.eye(3)
    dsig = ext.dg
    snn = np.einsum("ni,nij,nj->n", nb, sigma, nb)
    s_nu = np.einsum("nij,nj->ni", sigma, nb)
    tangential = s_nu - snn[:, None] * nb
    dnu = -0.5 * snn[:, None] * nb - tangential
    tr = np.einsum("nii->n", sigma)
    darea = 0.5 * (tr - snn)
    d_tr = np.einsum("nkii->nk", dsig)
    div_sigma = np.einsum("niij->nj", dsig)
    Dnu_tr = np.einsum("nk,nk->n", nb, d_tr)
    Dnu_snn = np.einsum("nk,nkij,ni,nj->n", nb, dsig, nb, nb)
    div_nu = np.einsum("nj,nj->n", div_sigma, nb)
    lam = ext.surface.lam
    dH = (2.0 * snn - tr) / lam + 0.5 * (Dnu_tr + Dnu_snn - 2.0 * div_nu)
    return dnu, darea, dH


def expansion_residuals(surface: GraphSurface) -> dict:
    """Sup-norm gaps between exact perturbations of nu, dmu, H and their first-order forms."""
    if np.max(np.abs(surface.u.values)) > 0:
        raise ValueError("expansions are stated on round spheres (u = 0)")
    ext = compute_extrinsic(surface)
    dnu, darea, dH = first_order_expansions(ext)
    tau = surface.metric.decay_rate
    r_nu = np.max(np.linalg.norm(ext.nu - ext.nu_bar - dnu, axis=1))
    r_mu = np.max(np.abs(ext.phys.area_element / ext.bar.area_element - 1.0 - darea))
    r_H = np.max(np.abs(ext.H - ext.H_bar - dH))
    return {
        "lambda": surface.lam,
        "normal": float(r_nu), "normal_order": 2 * tau,
        "area_element": float(r_mu), "area_element_order": 2 * tau,
        "mean_curvature": float(r_H), "mean_curvature_order": 1 + 2 * tau,
    }


def divergence_check(surface: GraphSurface) -> np.ndarray:
    """Euclidean flux of each constant basis vector through the closed surface."""
    ext = compute_extrinsic(surface)
    return ext.dmu_bar @ ext.nu_bar


def diagnostics_json(surface: GraphSurface) -> str:
    d = surface_diagnostics(surface).to_dict()
    return json.dumps(d, sort_keys=True)
