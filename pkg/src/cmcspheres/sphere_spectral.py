"""Real spherical harmonics on a Gauss-Legendre x uniform-longitude grid.

Coefficients are stored flat with index ``k = l*l + l + m`` for
``-l <= m <= l``.  The basis is real and orthonormal on the unit sphere:

    Y_l0  = P_l0(cos t)
    Y_lm  = sqrt(2) P_lm(cos t) cos(m p)      m > 0
    Y_l-m = sqrt(2) P_lm(cos t) sin(m p)      m > 0

with P_lm the orthonormal associated Legendre functions (no Condon-Shortley
phase).  Transforms are dense matrix products, which is plenty at lmax <= 48.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ShapeError


def n_coeffs(lmax: int) -> int:
    return (lmax + 1) ** 2


def lm_index(l: int, m: int) -> int:
    return l * l + l + m


def degrees(lmax: int) -> np.ndarray:
    """Degree l of every flat coefficient slot."""
    return np.concatenate([np.full(2 * l + 1, l) for l in range(lmax + 1)])


def orders(lmax: int) -> np.ndarray:
    return np.concatenate([np.arange(-l, l + 1) for l in range(lmax + 1)])


def _legendre_table(lmax, theta):
    """Orthonormal P_lm(cos theta) and its first two theta derivatives.

    Returns arrays of shape (lmax+1, lmax+1, n) indexed [l, m]; entries with
    m > l are zero.  Theta must avoid the poles (Gauss nodes always do).
    """
    x = np.cos(theta)
    s = np.sin(theta)
    n = theta.size
    P = np.zeros((lmax + 1, lmax + 1, n))
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, lmax + 1):
        P[m, m] = np.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(lmax):
        P[m + 1, m] = np.sqrt(2 * m + 3.0) * x * P[m, m]
    for m in range(lmax + 1):
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    dP = np.zeros_like(P)
    for l in range(1, lmax + 1):
        for m in range(l + 1):
            c = np.sqrt((2 * l + 1.0) / (2 * l - 1) * (l * l - m * m)) if m < l else 0.0
            prev = P[l - 1, m] if m <= l - 1 else 0.0
            dP[l, m] = (l * x * P[l, m] - c * prev) / s
    ell = np.arange(lmax + 1)[:, None, None]
    em = np.arange(lmax + 1)[None, :, None]
    ddP = -(x / s) * dP - (ell * (ell + 1) - em**2 / s**2) * P
    return P, dP, ddP


class SphereGrid:
    """Quadrature grid on the unit sphere.

    Defaults oversample the band limit (n_lat ~ 3(lmax+1)/2) so that products
    of three band-limited fields, as in the stability and Newton operators, are
    integrated exactly.
    """

    def __init__(self, lmax: int, n_lat: int | None = None, n_lon: int | None = None):
        if lmax < 0:
            raise ShapeError("lmax must be nonnegative")
        if n_lat is None:
            n_lat = (3 * (lmax + 1) + 1) // 2 + 1
        if n_lon is None:
            n_lon = 2 * n_lat
        if n_lat < lmax + 1 or n_lon < 2 * lmax + 1:
            raise ShapeError(f"grid {n_lat}x{n_lon} too coarse for lmax={lmax}")
        self.lmax = lmax
        self.n_lat = n_lat
        self.n_lon = n_lon
        x, wx = np.polynomial.legendre.leggauss(n_lat)
        # colatitude ordered north to south
        t = np.arccos(x[::-1])
        wx = wx[::-1]
        p = 2.0 * np.pi * np.arange(n_lon) / n_lon
        T, Pp = np.meshgrid(t, p, indexing="ij")
        self.theta = T.ravel()
        self.phi = Pp.ravel()
        self.weights = np.repeat(wx * (2.0 * np.pi / n_lon), n_lon)
        self._lat_theta = t

    @property
    def Lmax(self):
        return self.lmax

    @property
    def size(self) -> int:
        return self.theta.size

    @property
    def nodes(self):
        return np.column_stack([self.theta, self.phi])

    @cached_property
    def unit_normals(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.column_stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])

    @cached_property
    def normal_derivatives(self):
        """(n_t, n_p, n_tt, n_tp, n_pp) of the unit normal at the nodes."""
        t, p = self.theta, self.phi
        st, ct, sp, cp = np.sin(t), np.cos(t), np.sin(p), np.cos(p)
        z = np.zeros_like(t)
        n_t = np.column_stack([ct * cp, ct * sp, -st])
        n_p = np.column_stack([-st * sp, st * cp, z])
        n_tt = -self.unit_normals
        n_tp = np.column_stack([-ct * sp, ct * cp, z])
        n_pp = np.column_stack([-st * cp, -st * sp, z])
        return n_t, n_p, n_tt, n_tp, n_pp

    def _basis_from(self, theta, phi, lmax, want_derivs):
        uniq, inv = np.unique(theta, return_inverse=True)
        P, dP, ddP = _legendre_table(lmax, uniq)
        P, dP, ddP = P[:, :, inv], dP[:, :, inv], ddP[:, :, inv]
        nc = n_coeffs(lmax)
        out = {k: np.zeros((theta.size, nc)) for k in ("Y", "t", "p", "tt", "tp", "pp")}
        r2 = np.sqrt(2.0)
        for l in range(lmax + 1):
            for m in range(-l, l + 1):
                k = lm_index(l, m)
                am = abs(m)
                if m == 0:
                    c, s_, f = np.ones_like(phi), np.zeros_like(phi), 1.0
                elif m > 0:
                    c, s_, f = np.cos(am * phi), -am * np.sin(am * phi), r2
                else:
                    c, s_, f = np.sin(am * phi), am * np.cos(am * phi), r2
                out["Y"][:, k] = f * P[l, am] * c
                if want_derivs:
                    out["t"][:, k] = f * dP[l, am] * c
                    out["p"][:, k] = f * P[l, am] * s_
                    out["tt"][:, k] = f * ddP[l, am] * c
                    out["tp"][:, k] = f * dP[l, am] * s_
                    out["pp"][:, k] = -(am**2) * f * P[l, am] * c
        return out

    @cached_property
    def _basis(self):
        return self._basis_from(self.theta, self.phi, self.lmax, True)

    @property
    def Y(self) -> np.ndarray:
        """Synthesis matrix, shape (n_nodes, n_coeffs)."""
        return self._basis["Y"]

    def basis_derivative(self, which: str) -> np.ndarray:
        """Synthesis matrix for one of 't', 'p', 'tt', 'tp', 'pp'."""
        return self._basis[which]

    @cached_property
    def analysis_matrix(self) -> np.ndarray:
        return (self.Y * self.weights[:, None]).T

    @cached_property
    def degrees(self) -> np.ndarray:
        return degrees(self.lmax)

    def analyze(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.size:
            raise ShapeError(f"expected {self.size} node values, got {values.shape[0]}")
        return self.analysis_matrix @ values

    def synthesize(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != n_coeffs(self.lmax):
            raise ShapeError(f"expected {n_coeffs(self.lmax)} coefficients, got {coeffs.shape[0]}")
        return self.Y @ coeffs

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def evaluate(self, coeffs, theta, phi) -> np.ndarray:
        """Evaluate a band-limited expansion at arbitrary (theta, phi)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        # nudge exact poles so the derivative tables stay finite
        theta = np.clip(theta, 1e-12, np.pi - 1e-12)
        B = self._basis_from(theta, phi, self.lmax, False)["Y"]
        return B @ np.asarray(coeffs)

    def __eq__(self, other):
        return (isinstance(other, SphereGrid) and self.lmax == other.lmax
                and self.n_lat == other.n_lat and self.n_lon == other.n_lon)

    def __hash__(self):
        return hash((self.lmax, self.n_lat, self.n_lon))

    def __repr__(self):
        return f"SphereGrid(lmax={self.lmax}, n_lat={self.n_lat}, n_lon={self.n_lon})"


_GRIDS: dict = {}


def get_grid(lmax: int, n_lat=None, n_lon=None) -> SphereGrid:
    """Shared grid instance (basis matrices are cached on it)."""
    key = (lmax, n_lat, n_lon)
    if key not in _GRIDS:
        _GRIDS[key] = SphereGrid(lmax, n_lat, n_lon)
    return _GRIDS[key]


class SphereField:
    """Scalar field on a grid, held as node values and/or coefficients.

    Whichever representation was not supplied is computed on first access.
    Values given directly are not assumed band-limited; ``coeffs`` is then the
    L2 projection onto degrees <= lmax.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: SphereGrid, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ShapeError("need values or coeffs")
        self.grid = grid
        self._values = None if values is None else np.asarray(values, dtype=float)
        self._coeffs = None if coeffs is None else np.asarray(coeffs, dtype=float)
        if self._values is not None and self._values.shape != (grid.size,):
            raise ShapeError(f"values shape {self._values.shape} != ({grid.size},)")
        if self._coeffs is not None and self._coeffs.shape != (n_coeffs(grid.lmax),):
            raise ShapeError(f"coeffs shape {self._coeffs.shape} != ({n_coeffs(grid.lmax)},)")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, coeffs=np.zeros(n_coeffs(grid.lmax)))

    @classmethod
    def from_function(cls, grid, f):
        """Sample ``f(n)`` at the unit normals ``n`` (shape (N, 3))."""
        return cls(grid, values=f(grid.unit_normals))

    @classmethod
    def harmonic(cls, grid, l, m, scale=1.0):
        c = np.zeros(n_coeffs(grid.lmax))
        c[lm_index(l, m)] = scale
        return cls(grid, coeffs=c)

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = self.grid.synthesize(self._coeffs)
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = self.grid.analyze(self._values)
        return self._coeffs

    def derivative(self, which: str) -> np.ndarray:
        """Node values of a theta/phi derivative ('t', 'p', 'tt', 'tp', 'pp')."""
        return self.grid.basis_derivative(which) @ self.coeffs

    def band_limited(self) -> "SphereField":
        return SphereField(self.grid, coeffs=self.coeffs.copy())

    def _check(self, other):
        if isinstance(other, SphereField) and other.grid != self.grid:
            raise ShapeError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        if isinstance(other, SphereField):
            return SphereField(self.grid, values=self.values + other.values)
        return SphereField(self.grid, values=self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, k):
        if isinstance(k, SphereField):
            self._check(k)
            return SphereField(self.grid, values=self.values * k.values)
        if self._coeffs is not None:
            return SphereField(self.grid, coeffs=self._coeffs * k)
        return SphereField(self.grid, values=self.values * k)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def dot(self, other) -> float:
        """L2 inner product on the unit sphere by quadrature."""
        self._check(other)
        return self.grid.integrate(self.values * other.values)

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def evaluate(self, theta, phi):
        return self.grid.evaluate(self.coeffs, theta, phi)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "phi", "value"])
            for t, p, v in zip(self.grid.theta, self.grid.phi, self.values):
                w.writerow([repr(float(t)), repr(float(p)), repr(float(v))])


@dataclass(frozen=True)
class HarmonicSubspace:
    """Span of the harmonics with degree in ``degrees`` (or its complement)."""

    degrees: frozenset
    complement: bool = False

    def __init__(self, degrees, complement=False):
        object.__setattr__(self, "degrees", frozenset(int(l) for l in degrees))
        object.__setattr__(self, "complement", bool(complement))

    def mask(self, lmax: int) -> np.ndarray:
        inside = np.isin(degrees(lmax), sorted(self.degrees))
        return ~inside if self.complement else inside

    def perp(self) -> "HarmonicSubspace":
        return HarmonicSubspace(self.degrees, not self.complement)

    def dimension(self, lmax: int) -> int:
        return int(self.mask(lmax).sum())


LAMBDA0 = HarmonicSubspace({0})
LAMBDA1 = HarmonicSubspace({1})
LAMBDA01 = HarmonicSubspace({0, 1})
LAMBDA01_PERP = HarmonicSubspace({0, 1}, complement=True)


def analyze(grid: SphereGrid, values) -> np.ndarray:
    return grid.analyze(values)


def synthesize(grid: SphereGrid, coeffs) -> np.ndarray:
    return grid.synthesize(coeffs)


def laplacian(f: SphereField, radius: float = 1.0) -> SphereField:
    """Round-sphere Laplacian: multiplies degree l by -l(l+1)/radius^2."""
    ell = f.grid.degrees
    return SphereField(f.grid, coeffs=-ell * (ell + 1) / radius**2 * f.coeffs)


def project(f: SphereField, sub: HarmonicSubspace) -> SphereField:
    return SphereField(f.grid, coeffs=np.where(sub.mask(f.grid.lmax), f.coeffs, 0.0))


def flat_stability_quadratic_form(f: SphereField) -> float:
    """Integral of f(-Lap f - 2f) over the unit sphere."""
    ell = f.grid.degrees
    c = f.coeffs
    return float(np.sum((ell * (ell + 1) - 2.0) * c * c))


def random_band_limited(grid: SphereGrid, rng, lmax=None, decay=1.0, exclude=()) -> SphereField:
    """Random coefficients with amplitude ~ (1+l)^-decay, zero on ``exclude`` degrees."""
    ell = grid.degrees
    lmax = grid.lmax if lmax is None else lmax
    c = rng.normal(size=ell.size) * (1.0 + ell) ** (-decay)
    c[ell > lmax] = 0.0
    c[np.isin(ell, list(exclude))] = 0.0
    return SphereField(grid, coeffs=c)
