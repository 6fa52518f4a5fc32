"""Lyapunov-Schmidt reduction for large CMC spheres.

For a center offset ``xi`` and radius ``lam`` we solve for a graph function
``u`` orthogonal to the degree-1 harmonics such that the mean curvature of
the graph has no component of degree >= 2 and the volume between the graph
and |x| = 2*lam equals 28*pi/3 * lam^3.  The remaining degree-1 part of H is
the gradient of the reduced area  G(xi) = |Sigma|/lam; its critical points are
the CMC spheres.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.linalg as sla

from . import metric_models as mm
from . import surface_geometry as sg
from .errors import (DomainError, EigenFailure, FoliationOrderViolation, GradientMismatchError,
                     NewtonDivergenceError, NoCriticalPointError, SmallnessViolation)
from .sphere_spectral import SphereField, SphereGrid, get_grid

log = logging.getLogger(__name__)

VOLUME_CONSTANT = 28.0 * np.pi / 3.0


@dataclass(frozen=True)
class SolverOptions:
    lmax: int = 16
    tol_H: float = 1e-10       # times 1/lam
    tol_V: float = 1e-8        # times lam^3
    max_iters: int = 30
    delta: float = 0.1
    lambda_min_factor: float = 10.0
    epsilon: float = 0.25
    check_smallness: bool = True
    tol_crit: float = 1e-8
    tol_cmc: float = 1e-7
    cross_tol: float = 1e-5
    fd_step: float = 1e-4
    check_gradient: bool = False
    stability_tol: float = 1e-12
    max_xi: float = 0.5
    crit_iters: int = 25

    def grid(self) -> SphereGrid:
        return get_grid(self.lmax)


DEFAULT_OPTIONS = SolverOptions()


@dataclass
class LSLeaf:
    xi: np.ndarray
    lam: float
    u: SphereField
    metric: mm.MetricModel
    G_value: float = float("nan")
    G_gradient: np.ndarray = field(default_factory=lambda: np.full(3, np.nan))
    residual_H_perp: float = float("nan")
    residual_volume: float = float("nan")
    newton_iters: int = 0
    gradient_fd: np.ndarray | None = None
    gradient_discrepancy: float | None = None
    du_dxi: np.ndarray | None = field(default=None, repr=False)
    smallness: float = float("nan")

    @property
    def surface(self) -> sg.GraphSurface:
        # one cached surface per leaf
        if not hasattr(self, "_surface"):
            self._surface = sg.GraphSurface(self.xi, self.lam, self.u, self.metric)
        return self._surface

    @property
    def extrinsic(self) -> sg.ExtrinsicData:
        return sg.compute_extrinsic(self.surface)

    @property
    def H_mean(self) -> float:
        ext = self.extrinsic
        return float(np.sum(ext.dmu * ext.H) / np.sum(ext.dmu))

    @property
    def cmc_residual(self) -> float:
        """RMS of H - mean(H) over the surface, relative to mean(H)."""
        ext = self.extrinsic
        A = np.sum(ext.dmu)
        Hm = np.sum(ext.dmu * ext.H) / A
        return float(np.sqrt(np.sum(ext.dmu * (ext.H - Hm) ** 2) / A) / abs(Hm))

    @property
    def center(self) -> np.ndarray:
        return self.lam * self.xi

    def to_dict(self) -> dict:
        return {
            "xi": self.xi, "lambda": self.lam, "lmax": self.u.grid.lmax,
            "u_coeffs": self.u.coeffs, "G_value": self.G_value, "G_gradient": self.G_gradient,
            "gradient_fd": self.gradient_fd, "gradient_discrepancy": self.gradient_discrepancy,
            "residual_H_perp": self.residual_H_perp, "residual_volume": self.residual_volume,
            "newton_iters": self.newton_iters, "H_mean": self.H_mean,
            "cmc_residual": self.cmc_residual, "smallness": self.smallness,
        }


# ---------------------------------------------------------------------------
# graph solve


def _masks(grid):
    ell = grid.degrees
    return ell >= 2, ell != 1


def smallness_norm(u: SphereField) -> float:
    """|u| + lam|grad u| + lam^2|Hess u| (sup norms), measured on the unit sphere.

    On a sphere of radius lam the gradient and Hessian scale like 1/lam and
    1/lam^2, so these are the unit-sphere derivative norms.
    """
    t = u.grid.theta
    st, ct = np.sin(t), np.cos(t)
    ut, up = u.derivative("t"), u.derivative("p")
    utt, utp, upp = u.derivative("tt"), u.derivative("tp"), u.derivative("pp")
    grad = np.sqrt(ut**2 + (up / st) ** 2)
    h_tp = (utp - ct / st * up) / st
    h_pp = (upp + st * ct * ut) / st**2
    hess = np.sqrt(utt**2 + 2 * h_tp**2 + h_pp**2)
    return float(np.max(np.abs(u.values)) + np.max(grad) + np.max(hess))


def _check_inputs(xi, lam, model, opts):
    xi = np.asarray(xi, dtype=float).reshape(3)
    if np.linalg.norm(xi) > 1.0 - opts.delta:
        raise DomainError(f"|xi| = {np.linalg.norm(xi):.3g} exceeds 1 - delta = {1 - opts.delta}")
    lam_min = opts.lambda_min_factor * (1.0 + abs(model.mass_param))
    if lam < lam_min:
        raise DomainError(f"lambda = {lam} is below lambda_min = {lam_min}")
    return xi


def _residuals(surface, lam, perp):
    ext = sg.compute_extrinsic(surface)
    Hc = surface.grid.analyze(ext.H)
    vol = sg.enclosed_volume_relative(surface)
    defect = vol - VOLUME_CONSTANT * lam**3
    return ext, Hc, defect


def _system_matrix(ext, grid, perp, free):
    """Square Jacobian: rows = (H coeffs of degree >= 2, volume); cols = free coeffs."""
    J = sg.mean_curvature_jacobian(ext)
    A = grid.analysis_matrix @ J
    cv = sg.volume_gradient_u(ext) @ grid.Y
    M = np.vstack([A[perp][:, free], cv[free][None, :]])
    return M, A, cv


def solve_graph(xi, lam, model: mm.MetricModel, opts: SolverOptions = DEFAULT_OPTIONS,
                u0: SphereField | None = None, with_derivative: bool = True) -> LSLeaf:
    """Solve the projected CMC problem on S_{xi,lam} by Newton's method."""
    xi = _check_inputs(xi, lam, model, opts)
    grid = opts.grid() if u0 is None else u0.grid
    perp, free = _masks(grid)
    i00 = 0
    y00 = 1.0 / np.sqrt(4.0 * np.pi)
    tol_H = opts.tol_H / lam
    tol_V = opts.tol_V * lam**3

    c = np.zeros(grid.degrees.size) if u0 is None else u0.coeffs.copy()
    c[grid.degrees == 1] = 0.0

    def surf(coeffs):
        return sg.GraphSurface(xi, lam, SphereField(grid, coeffs=coeffs), model)

    S = surf(c)
    ext, Hc, defect = _residuals(S, lam, perp)
    it = 0
    while True:
        rH = float(np.linalg.norm(Hc[perp]))
        if rH <= tol_H and abs(defect) <= tol_V:
            break
        if it >= opts.max_iters:
            raise NewtonDivergenceError(
                f"no convergence after {it} iterations: |H_perp| = {rH:.3e}, vol defect = {defect:.3e}")
        it += 1
        # (a) scalar line solve of the volume constraint along the constant mode
        for _ in range(3):
            dv = float(np.sum(sg.volume_gradient_u(ext))) * y00
            c[i00] -= defect / dv
            S = surf(c)
            ext, Hc, defect = _residuals(S, lam, perp)
            if abs(defect) <= 0.1 * tol_V:
                break
        # (b) linearized solve on the complement of degrees 0 and 1
        M, _, _ = _system_matrix(ext, grid, perp, free)
        rhs = -np.concatenate([Hc[perp], [defect]])
        step = np.zeros_like(c)
        try:
            step[free] = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergenceError(f"singular linearization: {exc}") from None
        old = np.hypot(np.linalg.norm(Hc[perp]) / tol_H, defect / tol_V)
        t = 1.0
        for _ in range(12):
            trial = c + t * step
            # (c) keep u orthogonal to the degree-1 harmonics
            trial[grid.degrees == 1] = 0.0
            try:
                S_t = surf(trial)
                ext_t, Hc_t, d_t = _residuals(S_t, lam, perp)
            except (sg.DegenerateSurfaceError, mm.DomainError, sg.ContainmentError):
                t *= 0.5
                continue
            new = np.hypot(np.linalg.norm(Hc_t[perp]) / tol_H, d_t / tol_V)
            if new < old or new <= 1.0:
                break
            t *= 0.5
        else:
            raise NewtonDivergenceError("line search failed to reduce the residual")
        c, S, ext, Hc, defect = trial, S_t, ext_t, Hc_t, d_t

    u = SphereField(grid, coeffs=c)
    leaf = LSLeaf(xi=xi, lam=lam, u=u, metric=model, residual_H_perp=float(np.linalg.norm(Hc[perp])),
                  residual_volume=float(abs(defect)), newton_iters=it)
    leaf._surface = S
    leaf.smallness = smallness_norm(u)
    if opts.check_smallness and leaf.smallness >= opts.epsilon * lam:
        raise SmallnessViolation(
            f"converged u has norm {leaf.smallness:.3g} >= epsilon*lambda = {opts.epsilon * lam:.3g}; "
            "lambda is too small for the asymptotic regime")
    area = float(np.sum(ext.dmu))
    leaf.G_value = area / lam
    if with_derivative:
        _attach_gradient(leaf, opts)
    return leaf


def _attach_gradient(leaf: LSLeaf, opts: SolverOptions):
    """Gradient of G from the first-variation formula with implicit du/dxi."""
    ext = leaf.extrinsic
    grid = leaf.u.grid
    lam = leaf.lam
    perp, free = _masks(grid)
    M, _, cv = _system_matrix(ext, grid, perp, free)
    n = grid.unit_normals
    nu = ext.nu
    Hm2 = ext.H - 2.0 / lam
    lu, piv = sla.lu_factor(M)
    grad = np.zeros(3)
    dus = np.zeros((3, grid.degrees.size))
    for a in range(3):
        e = np.zeros(3)
        e[a] = lam
        dH = sg.translation_variation_H(ext, e)
        dV = sg.volume_variation(ext, np.broadcast_to(e, n.shape))
        rhs = -np.concatenate([grid.analyze(dH)[perp], [dV]])
        du = np.zeros(grid.degrees.size)
        du[free] = sla.lu_solve((lu, piv), rhs)
        dus[a] = du
        du_nodes = grid.Y @ du
        field_ = np.zeros_like(n)
        field_[:, a] = 1.0
        field_ += (du_nodes / lam)[:, None] * n
        g_an = np.einsum("ni,nij,nj->n", field_, ext.g, nu)
        grad[a] = float(np.sum(ext.dmu * Hm2 * g_an))
    leaf.G_gradient = grad
    leaf.du_dxi = dus


def _du_guess(leaf: LSLeaf, dxi):
    if leaf.du_dxi is None:
        return leaf.u
    return SphereField(leaf.u.grid, coeffs=leaf.u.coeffs + dxi @ leaf.du_dxi)


def reduced_leaf(xi, lam, model, opts: SolverOptions = DEFAULT_OPTIONS, u0=None,
                 check_gradient: bool | None = None) -> LSLeaf:
    """Solve at xi and evaluate G with its gradient, optionally cross-checked by finite differences."""
    leaf = solve_graph(xi, lam, model, opts, u0=u0)
    check = opts.check_gradient if check_gradient is None else check_gradient
    if check:
        h = opts.fd_step
        fd = np.zeros(3)
        for a in range(3):
            e = np.zeros(3)
            e[a] = h
            Gp = solve_graph(leaf.xi + e, lam, model, opts, u0=_du_guess(leaf, e),
                             with_derivative=False).G_value
            Gm = solve_graph(leaf.xi - e, lam, model, opts, u0=_du_guess(leaf, -e),
                             with_derivative=False).G_value
            fd[a] = (Gp - Gm) / (2 * h)
        leaf.gradient_fd = fd
        diff = float(np.linalg.norm(leaf.G_gradient - fd))
        leaf.gradient_discrepancy = diff
        if diff > opts.cross_tol * (1.0 + np.linalg.norm(leaf.G_gradient)):
            raise GradientMismatchError(
                f"first-variation gradient {leaf.G_gradient} vs finite differences {fd}")
    return leaf


def reduced_function(xi, lam, model, opts: SolverOptions = DEFAULT_OPTIONS, u0=None):
    """(G, grad G) at xi; the gradient is checked against central differences."""
    leaf = reduced_leaf(xi, lam, model, opts, u0=u0, check_gradient=True)
    return leaf.G_value, leaf.G_gradient


def find_critical_point(lam, model, xi0=(0.0, 0.0, 0.0), opts: SolverOptions = DEFAULT_OPTIONS,
                        u0=None) -> LSLeaf:
    """Newton iteration on grad G with a finite-difference Hessian and a trust radius."""
    if abs(model.mass_param) == 0.0 and model.kind is not mm.Kind.CUSTOM:
        raise NoCriticalPointError("the reduced function is flat to leading order when m = 0")
    xi = np.zeros(3) if xi0 is None else np.asarray(xi0, dtype=float).copy()
    leaf = reduced_leaf(xi, lam, model, opts, u0=u0, check_gradient=False)
    h = 1e-3
    radius = 0.1
    Hs = None
    for _ in range(opts.crit_iters):
        if np.linalg.norm(leaf.G_gradient) < opts.tol_crit:
            break
        if Hs is None:
            # the Hessian of G changes slowly in xi; one finite-difference
            # evaluation followed by Broyden updates is enough
            Hs = np.zeros((3, 3))
            for a in range(3):
                e = np.zeros(3)
                e[a] = h
                gp = reduced_leaf(leaf.xi + e, lam, model, opts, u0=_du_guess(leaf, e)).G_gradient
                gm = reduced_leaf(leaf.xi - e, lam, model, opts, u0=_du_guess(leaf, -e)).G_gradient
                Hs[:, a] = (gp - gm) / (2 * h)
            Hs = 0.5 * (Hs + Hs.T)
        try:
            step = -np.linalg.solve(Hs, leaf.G_gradient)
        except np.linalg.LinAlgError:
            step = -leaf.G_gradient / max(np.abs(np.diag(Hs)).max(), 1e-12)
        if np.linalg.norm(step) > radius:
            step *= radius / np.linalg.norm(step)
        new_xi = leaf.xi + step
        if np.linalg.norm(new_xi) >= opts.max_xi:
            raise NoCriticalPointError(f"critical point search left the ball |xi| < {opts.max_xi}")
        new = reduced_leaf(new_xi, lam, model, opts, u0=_du_guess(leaf, step), check_gradient=False)
        y = new.G_gradient - leaf.G_gradient
        if np.linalg.norm(new.G_gradient) > np.linalg.norm(leaf.G_gradient):
            Hs = None
            radius *= 0.5
        else:
            Hs = Hs + np.outer(y - Hs @ step, step) / (step @ step)
        leaf = new
    else:
        if np.linalg.norm(leaf.G_gradient) >= opts.tol_crit:
            raise NoCriticalPointError(
                f"|grad G| = {np.linalg.norm(leaf.G_gradient):.3e} after {opts.crit_iters} steps")
    # final certificate
    if opts.check_gradient:
        leaf = reduced_leaf(leaf.xi, lam, model, opts, u0=leaf.u, check_gradient=True)
    if leaf.cmc_residual >= opts.tol_cmc:
        log.warning("leaf at lambda=%s misses the CMC certificate: %.3e", lam, leaf.cmc_residual)
    return leaf


# ---------------------------------------------------------------------------
# stability


class Verdict(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"


@dataclass
class StabilityReport:
    lowest_meanzero_eigenvalue: float
    translation_block: np.ndarray
    verdict: Verdict
    tol: float
    eigenvalues: np.ndarray = field(repr=False, default=None)

    @property
    def is_stable(self) -> bool:
        return self.lowest_meanzero_eigenvalue >= -self.tol

    def to_dict(self):
        return {"lowest_meanzero_eigenvalue": self.lowest_meanzero_eigenvalue,
                "translation_block": self.translation_block, "verdict": self.verdict.value,
                "tol": self.tol, "lowest_eigenvalues": self.eigenvalues[:8]}


def stability_forms(ext: sg.ExtrinsicData):
    """Dirichlet form K and mass matrix M of the stability operator on the harmonic basis."""
    grid = ext.surface.grid
    ric = mm.ricci_tensor(ext.g, ext.dg, ext.ddg)
    ric_nn = np.einsum("ni,nij,nj->n", ext.nu, ric, ext.nu)
    V = ext.phys.h_norm2 + ric_nn
    dmu = ext.dmu
    B = grid.Y
    Bt, Bp = grid.basis_derivative("t"), grid.basis_derivative("p")
    gi = ext.phys.gamma_inv
    K = (Bt.T @ ((dmu * gi[:, 0, 0])[:, None] * Bt)
         + Bt.T @ ((dmu * gi[:, 0, 1])[:, None] * Bp)
         + Bp.T @ ((dmu * gi[:, 1, 0])[:, None] * Bt)
         + Bp.T @ ((dmu * gi[:, 1, 1])[:, None] * Bp)
         - B.T @ ((dmu * V)[:, None] * B))
    M = B.T @ (dmu[:, None] * B)
    return 0.5 * (K + K.T), 0.5 * (M + M.T)


def stability_spectrum(leaf: LSLeaf, tol: float | None = None) -> StabilityReport:
    ext = leaf.extrinsic
    grid = leaf.u.grid
    tol = DEFAULT_OPTIONS.stability_tol if tol is None else tol
    K, M = stability_forms(ext)
    b = grid.Y.T @ ext.dmu
    Z = sla.null_space(b[None, :])
    try:
        evals = sla.eigh(Z.T @ K @ Z, Z.T @ M @ Z, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from None
    low = float(evals[0])
    # translation modes: f_a = <nu_bar, e_a> / lam, expanded in harmonics
    C = np.stack([grid.analyze(ext.nu_bar[:, a] / leaf.lam) for a in range(3)], axis=1)
    T = C.T @ K @ C
    if low > tol:
        verdict = Verdict.STABLE
    elif low < -tol:
        verdict = Verdict.UNSTABLE
    else:
        verdict = Verdict.MARGINAL
    return StabilityReport(low, 0.5 * (T + T.T), verdict, tol, evals)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class FoliationReport:
    lambdas: list
    H: list
    lambda_H: list
    h_decreasing: bool
    remainder_order: float
    ordering_gaps: list
    ordered: bool
    lambda0: float | None
    centered_mode: bool

    def to_dict(self):
        return dict(self.__dict__)


def _containment_gap(inner: LSLeaf, outer: LSLeaf) -> float:
    """min over inner nodes of (outer radial function - distance), about the outer center."""
    d = inner.surface.positions - outer.center
    r = np.linalg.norm(d, axis=1)
    n = d / r[:, None]
    theta = np.arccos(np.clip(n[:, 2], -1.0, 1.0))
    phi = np.arctan2(n[:, 1], n[:, 0]) % (2 * np.pi)
    r_outer = outer.lam + outer.u.evaluate(theta, phi)
    return float(np.min(r_outer - r))


def remainder_order(lambdas, H) -> float:
    """Log-log slope of |H - 2/lam| against lam (sign flipped)."""
    lam = np.asarray(lambdas, dtype=float)
    rem = np.abs(np.asarray(H) - 2.0 / lam)
    if np.all(rem < 1e-300):
        return np.inf
    return float(-np.polyfit(np.log(lam), np.log(np.maximum(rem, 1e-300)), 1)[0])


def foliation_sweep(model, lambdas, opts: SolverOptions = DEFAULT_OPTIONS, xi0=(0.0, 0.0, 0.0),
                    raise_on_violation=False):
    """Critical-point leaves along an increasing lambda ladder, warm-started."""
    lambdas = [float(v) for v in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda ladder must be strictly increasing")
    centered = model.mass_param == 0.0 and not model.perturbation_terms
    leaves = []
    xi = np.asarray(xi0, dtype=float)
    u = None
    for lam in lambdas:
        if centered:
            leaf = solve_graph(np.zeros(3), lam, model, opts, u0=u)
        else:
            # lam * xi is roughly constant along the foliation
            guess = xi * (leaves[-1].lam / lam) if leaves else xi
            leaf = find_critical_point(lam, model, guess, opts, u0=u)
            xi = leaf.xi
        u = leaf.u
        leaves.append(leaf)
    H = [lf.H_mean for lf in leaves]
    dec = all(b < a for a, b in zip(H, H[1:]))
    gaps = [_containment_gap(a, b) for a, b in zip(leaves, leaves[1:])]
    ordered = all(gp > 0 for gp in gaps)
    lam0 = None
    for k in range(len(gaps)):
        if all(gp > 0 for gp in gaps[k:]):
            lam0 = lambdas[k]
            break
    rep = FoliationReport(lambdas, H, [l * h for l, h in zip(lambdas, H)], dec,
                          remainder_order(lambdas, H), gaps, ordered, lam0, centered)
    if raise_on_violation and not ordered:
        k = next(i for i, gp in enumerate(gaps) if gp <= 0)
        raise FoliationOrderViolation(f"leaves at lambda={lambdas[k]} and {lambdas[k + 1]} intersect",
                                      pair=(lambdas[k], lambdas[k + 1]))
    return leaves, rep


def parity_diagnostics(leaf: LSLeaf) -> dict:
    """Sup norms of the even and odd parts of u under reflection through the leaf center."""
    grid = leaf.u.grid
    odd = grid.degrees % 2 == 1
    c = leaf.u.coeffs
    u_odd = grid.Y @ np.where(odd, c, 0.0)
    u_even = grid.Y @ np.where(odd, 0.0, c)
    return {
        "lambda": leaf.lam,
        "u_odd_sup": float(np.max(np.abs(u_odd))),
        "u_even_sup": float(np.max(np.abs(u_even))),
        "rt_conformant": leaf.metric.rt_conformant,
    }


def parity_scaling(leaves) -> dict:
    """Fitted growth orders of the odd and even sup norms across leaves."""
    rows = [parity_diagnostics(lf) for lf in leaves]
    lam = np.log([r["lambda"] for r in rows])
    fit = lambda key: float(np.polyfit(lam, np.log(np.maximum([r[key] for r in rows], 1e-300)), 1)[0])
    return {"rows": rows, "odd_order": fit("u_odd_sup"), "even_order": fit("u_even_sup"),
            "rt_conformant": rows[0]["rt_conformant"] if rows else True}


def with_options(opts: SolverOptions, **kw) -> SolverOptions:
    return replace(opts, **kw)
