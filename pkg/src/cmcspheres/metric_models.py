"""Asymptotically flat model metrics with exact analytic 2-jets.

Every model is  g = delta + sigma  on the chart {|x| > 1/2}; the chart shift
``c`` is applied internally, i.e. the model evaluates its profile at
``y = x - c``.  Jets use the layout

    g[..., i, j]            metric components
    dg[..., k, i, j]        d_k g_ij
    ddg[..., k, l, i, j]    d_k d_l g_ij

All evaluation functions are vectorized over leading axes of ``x``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError, SingularMetricError

CHART_RADIUS = 0.5


class Kind(str, Enum):
    FLAT = "flat"
    SCHWARZSCHILD = "schwarzschild"
    TRANSLATED_SCHWARZSCHILD = "translated_schwarzschild"
    PERTURBED_SCHWARZSCHILD = "perturbed_schwarzschild"
    CUSTOM = "custom_perturbation"


_KIND_ALIASES = {
    "flat": Kind.FLAT,
    "schwarzschild": Kind.SCHWARZSCHILD,
    "schwarzschildisotropic": Kind.SCHWARZSCHILD,
    "translatedschwarzschild": Kind.TRANSLATED_SCHWARZSCHILD,
    "perturbedschwarzschild": Kind.PERTURBED_SCHWARZSCHILD,
    "customperturbation": Kind.CUSTOM,
}


def parse_kind(name) -> Kind:
    """Accept ``translated_schwarzschild``, ``TranslatedSchwarzschild``, etc."""
    key = str(name).replace("_", "").replace("-", "").lower()
    if key not in _KIND_ALIASES:
        raise ValueError(name)
    return _KIND_ALIASES[key]


class Structure(str, Enum):
    IDENTITY = "identity"
    RANK_ONE = "rank_one"
    OFF_DIAGONAL = "off_diagonal"


_STRUCTURE_ALIASES = {
    "identity": "identity", "scalartimesidentity": "identity",
    "rankone": "rank_one", "offdiagonal": "off_diagonal",
}


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"


@dataclass(frozen=True)
class PerturbationTerm:
    """One term  amplitude * |y|^-decay * P(y/|y|) * T  of sigma.

    ``profile`` is a tuple of ``(coef, (a, b, c))`` monomials in the unit
    vector y/|y| (total degree <= 4).  ``direction`` is the unit vector d of a
    rank-one structure d (x) d; ``indices`` the 1-based pair (i, j) of an
    off-diagonal structure e_i (x) e_j + e_j (x) e_i.
    """

    decay: float
    profile: tuple = ((1.0, (0, 0, 0)),)
    structure: Structure = Structure.IDENTITY
    parity: Parity = Parity.EVEN
    amplitude: float = 1.0
    direction: tuple = (1.0, 0.0, 0.0)
    indices: tuple = (1, 2)

    @property
    def radial_decay(self):
        return self.decay

    @property
    def angular_profile(self):
        return self.profile

    @property
    def tensor_structure(self):
        return self.structure

    def __post_init__(self):
        object.__setattr__(self, "structure", Structure(self.structure))
        object.__setattr__(self, "parity", Parity(self.parity))
        prof = tuple((float(c), tuple(int(p) for p in pw)) for c, pw in self.profile)
        object.__setattr__(self, "profile", prof)
        for _, pw in prof:
            if len(pw) != 3 or min(pw) < 0:
                raise ValueError(f"bad monomial powers {pw}")
            if sum(pw) > 4:
                raise ValueError("angular profile degree must be <= 4")
            if (sum(pw) % 2 == 1) != (self.parity is Parity.ODD):
                raise ValueError(f"monomial {pw} does not have {self.parity.value} parity")

    @property
    def tensor(self) -> np.ndarray:
        if self.structure is Structure.IDENTITY:
            return np.eye(3)
        if self.structure is Structure.RANK_ONE:
            d = np.asarray(self.direction, dtype=float)
            d = d / np.linalg.norm(d)
            return np.outer(d, d)
        i, j = (int(k) - 1 for k in self.indices)
        if i == j or not (0 <= i < 3 and 0 <= j < 3):
            raise ValueError(f"off-diagonal indices must be distinct in 1..3, got {self.indices}")
        t = np.zeros((3, 3))
        t[i, j] = t[j, i] = 1.0
        return t


@dataclass(frozen=True)
class MetricModel:
    kind: Kind = Kind.FLAT
    mass_param: float = 0.0
    chart_shift: tuple = (0.0, 0.0, 0.0)
    perturbation_terms: tuple = ()
    decay_rate: float | None = None
    rt_decay_rate: float | None = None
    tensors: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, Kind) else parse_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "chart_shift", tuple(float(v) for v in self.chart_shift))
        object.__setattr__(self, "perturbation_terms", tuple(self.perturbation_terms))
        if kind in (Kind.FLAT, Kind.CUSTOM) and self.mass_param != 0.0:
            raise ValueError(f"{kind.value} model has no Schwarzschild mass term")
        if kind is Kind.SCHWARZSCHILD and any(self.chart_shift):
            raise ValueError("use translated_schwarzschild for a shifted chart")
        if kind in (Kind.FLAT, Kind.SCHWARZSCHILD, Kind.TRANSLATED_SCHWARZSCHILD) and self.perturbation_terms:
            raise ValueError(f"{kind.value} model takes no perturbation terms")
        if self.decay_rate is None:
            qs = [t.decay for t in self.perturbation_terms if t.parity is Parity.EVEN]
            qs += [t.decay for t in self.perturbation_terms if t.parity is Parity.ODD]
            object.__setattr__(self, "decay_rate", min([1.0] + qs))
        object.__setattr__(self, "tensors", tuple(t.tensor for t in self.perturbation_terms))

    @property
    def has_schwarzschild(self) -> bool:
        return self.kind in (Kind.SCHWARZSCHILD, Kind.TRANSLATED_SCHWARZSCHILD,
                             Kind.PERTURBED_SCHWARZSCHILD)

    @property
    def shift(self) -> np.ndarray:
        return np.asarray(self.chart_shift)

    @property
    def rt_conformant(self) -> bool:
        """True when every odd term decays like |x|^-(1 + tau_hat) or faster."""
        odd = [t for t in self.perturbation_terms if t.parity is Parity.ODD]
        if not odd:
            return True
        if self.rt_decay_rate is None:
            return False
        return all(t.decay >= 1.0 + self.rt_decay_rate - 1e-12 for t in odd)

    @property
    def is_centered_radial(self) -> bool:
        return self.kind in (Kind.FLAT, Kind.SCHWARZSCHILD)


# ---------------------------------------------------------------------------
# profile pieces


def _schwarzschild_piece(y, m, order):
    """f = (1 + m/2r)^4 - 1 with gradient and Hessian (r = |y|)."""
    r = np.linalg.norm(y, axis=-1)
    phi = 1.0 + m / (2.0 * r)
    f = phi**4 - 1.0
    if order == 0:
        return f, None, None
    yh = y / r[..., None]
    f1 = -2.0 * m * phi**3 / r**2
    grad = f1[..., None] * yh
    if order == 1:
        return f, grad, None
    f2 = 3.0 * m**2 * phi**2 / r**4 + 4.0 * m * phi**3 / r**3
    yy = yh[..., :, None] * yh[..., None, :]
    hess = f2[..., None, None] * yy + (f1 / r)[..., None, None] * (np.eye(3) - yy)
    return f, grad, hess


def _monomial_piece(y, powers, p, order):
    """f = y^powers * |y|^-p with gradient and Hessian."""
    a = np.asarray(powers)
    r2 = np.einsum("...i,...i->...", y, y)
    R = r2 ** (-p / 2.0)
    mono = np.prod(y**a, axis=-1)
    f = mono * R
    if order == 0:
        return f, None, None
    # gradient of the monomial: a_k y^(a - e_k)
    gm = np.zeros(y.shape)
    for k in range(3):
        if a[k] > 0:
            b = a.copy()
            b[k] -= 1
            gm[..., k] = a[k] * np.prod(y**b, axis=-1)
    dR = (-p * r2 ** (-(p + 2) / 2.0))[..., None] * y
    grad = gm * R[..., None] + mono[..., None] * dR
    if order == 1:
        return f, grad, None
    hm = np.zeros(y.shape + (3,))
    for k in range(3):
        for l in range(3):
            b = a.copy()
            c = b[k] * (b[l] - (1 if k == l else 0))
            if c == 0:
                continue
            b[k] -= 1
            b[l] -= 1
            hm[..., k, l] = c * np.prod(y**b, axis=-1)
    ddR = (-p * r2 ** (-(p + 2) / 2.0))[..., None, None] * np.eye(3) + (
        p * (p + 2) * r2 ** (-(p + 4) / 2.0)
    )[..., None, None] * (y[..., :, None] * y[..., None, :])
    hess = (
        hm * R[..., None, None]
        + gm[..., :, None] * dR[..., None, :]
        + dR[..., :, None] * gm[..., None, :]
        + mono[..., None, None] * ddR
    )
    return f, grad, hess


def _unit_monomial(yh, powers):
    out = None
    for k, a in enumerate(powers):
        for _ in range(a):
            out = yh[..., k].copy() if out is None else out * yh[..., k]
    return out


def _term_value(y, term):
    """Fast value-only path: amplitude * r^-q * P(y/r)."""
    r = np.sqrt(np.einsum("...i,...i->...", y, y))
    yh = y / r[..., None]
    P = np.zeros(r.shape)
    for coef, powers in term.profile:
        m = _unit_monomial(yh, powers)
        P = P + coef * (1.0 if m is None else m)
    return term.amplitude * P * r ** (-term.decay)


def _term_piece(y, term, order):
    if order == 0:
        return _term_value(y, term), None, None
    f = np.zeros(y.shape[:-1])
    grad = np.zeros(y.shape) if order >= 1 else None
    hess = np.zeros(y.shape + (3,)) if order >= 2 else None
    for coef, powers in term.profile:
        fi, gi, hi = _monomial_piece(y, powers, term.decay + sum(powers), order)
        s = term.amplitude * coef
        f = f + s * fi
        if order >= 1:
            grad = grad + s * gi
        if order >= 2:
            hess = hess + s * hi
    return f, grad, hess


def _sigma_jet(model: MetricModel, x, order):
    y = np.asarray(x, dtype=float) - model.shift
    sig = np.zeros(y.shape + (3,))
    dsig = np.zeros(y.shape[:-1] + (3, 3, 3)) if order >= 1 else None
    ddsig = np.zeros(y.shape[:-1] + (3, 3, 3, 3)) if order >= 2 else None
    pieces = []
    if model.has_schwarzschild and model.mass_param != 0.0:
        pieces.append((np.eye(3), _schwarzschild_piece(y, model.mass_param, order)))
    for term, T in zip(model.perturbation_terms, model.tensors):
        pieces.append((T, _term_piece(y, term, order)))
    for T, (f, grad, hess) in pieces:
        sig += f[..., None, None] * T
        if order >= 1:
            dsig += grad[..., :, None, None] * T
        if order >= 2:
            ddsig += hess[..., :, :, None, None] * T
    return sig, dsig, ddsig


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise DomainError(f"points must be 3-vectors, got shape {x.shape}")
    if np.any(np.linalg.norm(x, axis=-1) <= CHART_RADIUS):
        raise DomainError("metric evaluated at |x| <= 1/2, outside the asymptotically flat chart")
    return x


def _check_positive(g):
    d1 = g[..., 0, 0]
    d2 = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    d3 = det3(g)
    if not (np.all(d1 > 0) and np.all(d2 > 0) and np.all(d3 > 0)):
        raise SingularMetricError("metric is not positive definite at some evaluation point")


def eval_metric(model: MetricModel, x) -> np.ndarray:
    """Metric components only (cheap path used by volume quadrature)."""
    x = _check_domain(x)
    sig, _, _ = _sigma_jet(model, x, 0)
    g = sig + np.eye(3)
    _check_positive(g)
    return g


def det3(a) -> np.ndarray:
    """Determinant of stacked 3x3 matrices (faster than LAPACK for many small ones)."""
    return (a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
            - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
            + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0]))


def eval_metric_jet(model: MetricModel, x):
    """Return ``(g, dg, ddg)`` at ``x`` from the analytic model."""
    x = _check_domain(x)
    sig, dsig, ddsig = _sigma_jet(model, x, 2)
    g = sig + np.eye(3)
    _check_positive(g)
    return g, dsig, ddsig


def split_parity(model: MetricModel, x):
    """Even and odd parts of the jet under x -> -x.

    Returns two ``(g, dg, ddg)`` triples that sum to the full jet; the odd
    part carries no identity contribution.
    """
    x = _check_domain(x)
    _check_domain(-x)
    s_p, d_p, dd_p = _sigma_jet(model, x, 2)
    s_m, d_m, dd_m = _sigma_jet(model, -x, 2)
    # jet of x -> sigma(-x) is (sigma(-x), -dsigma(-x), ddsigma(-x))
    even = (np.eye(3) + 0.5 * (s_p + s_m), 0.5 * (d_p - d_m), 0.5 * (dd_p + dd_m))
    odd = (0.5 * (s_p - s_m), 0.5 * (d_p + d_m), 0.5 * (dd_p - dd_m))
    return even, odd


def scalar_curvature_linearized(model: MetricModel, x) -> np.ndarray:
    """div div sigma - Laplacian tr sigma, accurate up to O(|x|^(-2-2 tau))."""
    x = _check_domain(x)
    _, _, dds = _sigma_jet(model, x, 2)
    divdiv = np.einsum("...ijij->...", dds)
    lap_tr = np.einsum("...kkii->...", dds)
    return divdiv - lap_tr


def christoffel_first(dg):
    """Gamma_{l,ij} = (d_i g_lj + d_j g_li - d_l g_ij) / 2, index order [l, i, j]."""
    # dg[k, i, j] = d_k g_ij
    t1 = np.einsum("...ilj->...lij", dg)
    t2 = np.einsum("...jli->...lij", dg)
    return 0.5 * (t1 + t2 - dg)


def ricci_tensor(g, dg, ddg):
    """Ricci tensor from an exact 2-jet."""
    ginv = np.linalg.inv(g)
    G1 = christoffel_first(dg)
    Gam = np.einsum("...km,...mij->...kij", ginv, G1)
    # d_l g^{km}
    dginv = -np.einsum("...ka,...lab,...bm->...lkm", ginv, dg, ginv)
    # d_l Gamma_{m,ij} from ddg[l, a, b, c] = d_l d_a g_bc
    dG1 = 0.5 * (
        np.einsum("...limj->...lmij", ddg)
        + np.einsum("...ljmi->...lmij", ddg)
        - np.einsum("...lmij->...lmij", ddg)
    )
    dGam = np.einsum("...lkm,...mij->...lkij", dginv, G1) + np.einsum("...km,...lmij->...lkij", ginv, dG1)
    ric = (
        np.einsum("...kkij->...ij", dGam)
        - np.einsum("...jkik->...ij", dGam)
        + np.einsum("...kkl,...lij->...ij", Gam, Gam)
        - np.einsum("...kjl,...lik->...ij", Gam, Gam)
    )
    return ric


def scalar_curvature(model: MetricModel, x) -> np.ndarray:
    """Exact scalar curvature of the model metric."""
    g, dg, ddg = eval_metric_jet(model, x)
    ric = ricci_tensor(g, dg, ddg)
    return np.einsum("...ij,...ij->...", np.linalg.inv(g), ric)


# ---------------------------------------------------------------------------
# decay conformance


def _shell_points(radii, n_dirs, rng):
    v = rng.normal(size=(n_dirs, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return radii[:, None, None] * v[None, :, :]


def decay_conformance(model: MetricModel, n_radii=24, n_dirs=64, seed=0):
    """Log-log slopes of shell maxima of the rescaled sigma jet.

    Returns a dict mapping ``sigma``, ``dsigma``, ``ddsigma`` (and the
    ``odd_*`` counterparts when ``rt_decay_rate`` is set) to the fitted slope of
    ``max |d^k sigma| |x|^(tau + k)`` over shells 2 < |x| < 1e4.  A slope
    <= 0 (to fitting noise) means the rescaled quantity stays bounded.
    """
    rng = np.random.default_rng(seed)
    radii = np.geomspace(2.0, 1.0e4, n_radii)
    pts = _shell_points(radii, n_dirs, rng) + model.shift
    pts = pts[np.linalg.norm(pts, axis=-1).min(axis=1) > 1.0]
    r = np.linalg.norm(pts, axis=-1)
    tau = model.decay_rate
    out = {}
    _, dsig, ddsig = _sigma_jet(model, pts, 2)
    sig, _, _ = _sigma_jet(model, pts, 0)
    rr = r.max(axis=1)
    for name, arr, k in (("sigma", sig, 0), ("dsigma", dsig, 1), ("ddsigma", ddsig, 2)):
        mag = np.sqrt(np.sum(arr.reshape(arr.shape[:2] + (-1,)) ** 2, axis=-1)) * r ** (tau + k)
        out[name] = _shell_slope(rr, mag.max(axis=1))
    if model.rt_decay_rate is not None:
        _, odd = split_parity(model, pts)
        th = model.rt_decay_rate
        for name, arr, k in zip(("odd_sigma", "odd_dsigma", "odd_ddsigma"), odd, (0, 1, 2)):
            mag = np.sqrt(np.sum(arr.reshape(arr.shape[:2] + (-1,)) ** 2, axis=-1)) * r ** (1 + th + k)
            out[name] = _shell_slope(rr, mag.max(axis=1))
    return out


def _shell_slope(r, m):
    if np.all(m < 1e-300):
        return -np.inf
    # bounded means "not growing in the tail": fit on the outer half decade range
    keep = (m > 1e-300) & (r >= r.max() ** 0.5 * r.min() ** 0.5)
    return float(np.polyfit(np.log(r[keep]), np.log(m[keep]), 1)[0])


def validate_decay(model: MetricModel, slope_tol=0.02):
    slopes = decay_conformance(model)
    bad = {k: v for k, v in slopes.items() if v > slope_tol}
    if bad:
        key = sorted(bad)[0]
        raise ConfigError(f"model violates its declared decay: {key} slope {bad[key]:.3g} > 0",
                          field="tau_hat" if key.startswith("odd") else "tau")
    return slopes


# ---------------------------------------------------------------------------
# config


def _parse_profile(raw, where):
    if raw is None:
        return ((1.0, (0, 0, 0)),)
    if isinstance(raw, (int, float)):
        return ((float(raw), (0, 0, 0)),)
    if not isinstance(raw, list) or not raw:
        raise ConfigError("profile must be a number or a non-empty list of monomials", where)
    out = []
    for k, item in enumerate(raw):
        sub = f"{where}[{k}]"
        if isinstance(item, dict):
            coef, powers = item.get("coef", 1.0), item.get("powers")
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            coef, powers = item
        else:
            raise ConfigError("monomial must be {coef, powers} or [coef, [a, b, c]]", sub)
        if not isinstance(powers, (list, tuple)) or len(powers) != 3:
            raise ConfigError("powers must be a list of three nonnegative integers", sub + ".powers")
        try:
            out.append((float(coef), tuple(int(p) for p in powers)))
        except (TypeError, ValueError):
            raise ConfigError("non-numeric monomial", sub) from None
    return tuple(out)


def _number(d, key, where, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"missing required key '{key}'", where + key)
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number", where + key)
    if not math.isfinite(v):
        raise ConfigError(f"'{key}' must be finite", where + key)
    return float(v)


def metric_from_dict(d: dict, check_decay=True) -> MetricModel:
    """Build a model from a parsed config document.

    Keys: ``kind``, ``mass``, ``shift``, ``tau``, ``tau_hat``,
    ``perturbations`` (list of ``{decay, profile, structure, parity,
    amplitude, direction, indices}``).  Raises :class:`ConfigError` carrying
    the offending field path.
    """
    if not isinstance(d, dict):
        raise ConfigError("metric config must be a table/object", "")
    if "metric" in d and isinstance(d["metric"], dict) and "kind" not in d:
        d = d["metric"]
    try:
        kind = parse_kind(d.get("kind", "flat"))
    except ValueError:
        raise ConfigError(f"unknown kind {d.get('kind')!r}; expected one of "
                          f"{[k.value for k in Kind]}", "kind") from None
    mass = _number(d, "mass", "", 0.0)
    shift = d.get("shift", [0.0, 0.0, 0.0])
    if (not isinstance(shift, list) or len(shift) != 3
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in shift)):
        raise ConfigError("shift must be a list of three numbers", "shift")
    tau = _number(d, "tau", "", None)
    tau_hat = _number(d, "tau_hat", "", None)
    for key, v in (("tau", tau), ("tau_hat", tau_hat)):
        if v is not None and not (0.5 < v <= 1.0):
            raise ConfigError(f"{key} must lie in (1/2, 1]", key)
    raw_terms = d.get("perturbations", [])
    if not isinstance(raw_terms, list):
        raise ConfigError("perturbations must be a list", "perturbations")
    terms = []
    for k, t in enumerate(raw_terms):
        where = f"perturbations[{k}]"
        if not isinstance(t, dict):
            raise ConfigError("perturbation must be a table", where)
        decay = _number(t, "decay", where + ".", required=True)
        amp = _number(t, "amplitude", where + ".", 1.0)
        parity = t.get("parity", "even")
        if parity not in ("even", "odd"):
            raise ConfigError("parity must be 'even' or 'odd'", where + ".parity")
        structure = _STRUCTURE_ALIASES.get(
            str(t.get("structure", "identity")).replace("_", "").lower())
        if structure is None:
            raise ConfigError(f"unknown structure {t.get('structure')!r}", where + ".structure")
        profile = _parse_profile(t.get("profile"), where + ".profile")
        limit = tau if tau is not None else 0.5
        if parity == "even" and decay < limit - 1e-12:
            raise ConfigError(f"even term decays at {decay} < tau = {limit}", where + ".decay")
        if parity == "odd" and tau_hat is not None and decay < 1.0 + tau_hat - 1e-12:
            raise ConfigError(f"odd term decays at {decay} < 1 + tau_hat = {1 + tau_hat}",
                              where + ".decay")
        if decay <= 0.5:
            raise ConfigError("decay must exceed 1/2", where + ".decay")
        try:
            terms.append(PerturbationTerm(
                decay=decay, profile=profile, structure=structure, parity=parity,
                amplitude=amp, direction=tuple(t.get("direction", (1.0, 0.0, 0.0))),
                indices=tuple(t.get("indices", (1, 2)))))
            terms[-1].tensor
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), where) from None
    try:
        model = MetricModel(kind=kind, mass_param=mass, chart_shift=tuple(shift),
                            perturbation_terms=tuple(terms), decay_rate=tau, rt_decay_rate=tau_hat)
    except ValueError as exc:
        raise ConfigError(str(exc), "kind") from None
    if check_decay:
        validate_decay(model)
    return model


def load_metric_config(path, check_decay=True) -> MetricModel:
    """Load a metric model from a ``.toml`` or ``.json`` file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"metric config {path} not found", "")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            doc = tomllib.loads(text)
        else:
            doc = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse {path.name}: {exc}", "") from None
    return metric_from_dict(doc, check_decay=check_decay)


def model_to_dict(model: MetricModel) -> dict:
    d = {"kind": model.kind.value, "mass": model.mass_param,
         "shift": list(model.chart_shift), "tau": model.decay_rate}
    if model.rt_decay_rate is not None:
        d["tau_hat"] = model.rt_decay_rate
    d["perturbations"] = [
        {"decay": t.decay, "amplitude": t.amplitude, "parity": t.parity.value,
         "structure": t.structure.value,
         "profile": [{"coef": c, "powers": list(p)} for c, p in t.profile],
         "direction": list(t.direction), "indices": list(t.indices)}
        for t in model.perturbation_terms
    ]
    return d


# ---------------------------------------------------------------------------
# catalog


def flat() -> MetricModel:
    return MetricModel(Kind.FLAT)


def schwarzschild(m: float) -> MetricModel:
    return MetricModel(Kind.SCHWARZSCHILD, mass_param=m)


def translated_schwarzschild(m: float, shift: Sequence[float]) -> MetricModel:
    return MetricModel(Kind.TRANSLATED_SCHWARZSCHILD, mass_param=m, chart_shift=tuple(shift))


def perturbed_schwarzschild(m: float, terms, shift=(0.0, 0.0, 0.0), tau=None, tau_hat=None):
    return MetricModel(Kind.PERTURBED_SCHWARZSCHILD, mass_param=m, chart_shift=tuple(shift),
                       perturbation_terms=tuple(terms), decay_rate=tau, rt_decay_rate=tau_hat)


def custom_perturbation(terms, tau=None, tau_hat=None):
    return MetricModel(Kind.CUSTOM, perturbation_terms=tuple(terms), decay_rate=tau,
                       rt_decay_rate=tau_hat)


def lie_derivative_terms(decay: float, amplitude: float = 1.0, parity="even", axis: int = 1):
    """Terms of sigma = L_X delta for X = A F(x) e_axis with F homogeneous of degree 1 - decay.

    ``parity="even"`` uses F = x_axis |x|^-decay, ``"odd"`` uses F = |x|^(1-decay).
    The linearized scalar curvature of such a sigma vanishes identically, so the
    full scalar curvature decays like |sigma|^2 / |x|^2 and stays integrable for
    every decay > 1/2.
    """
    q = float(decay)
    j = int(axis)
    e = lambda *k: tuple(sum(1 for kk in k if kk == i) for i in range(1, 4))
    par = Parity(parity)
    # d_i F as a list of (coef, powers) in the unit vector, times |x|^-q
    if par is Parity.ODD:
        dF = {i: [(1.0 - q, e(i))] for i in (1, 2, 3)}
    else:
        dF = {i: [(-q, e(j, i))] + ([(1.0, (0, 0, 0))] if i == j else []) for i in (1, 2, 3)}
    terms = [PerturbationTerm(decay=q, profile=tuple((2.0 * c, p) for c, p in dF[j]),
                              structure=Structure.RANK_ONE, parity=par, amplitude=amplitude,
                              direction=tuple(1.0 if i == j else 0.0 for i in (1, 2, 3)))]
    for i in (1, 2, 3):
        if i != j:
            terms.append(PerturbationTerm(decay=q, profile=tuple(dF[i]),
                                          structure=Structure.OFF_DIAGONAL, parity=par,
                                          amplitude=amplitude, indices=(min(i, j), max(i, j))))
    return terms


def catalog() -> dict:
    """Named models used by the verification suites and acceptance tests."""
    even06 = lie_derivative_terms(0.6, amplitude=0.15)
    even08 = lie_derivative_terms(0.8, amplitude=0.25)
    odd18 = lie_derivative_terms(1.8, amplitude=2.0, parity="odd")
    # odd conformal term: integrable R, but its odd part decays too slowly for
    # the center-of-mass flux to converge
    odd13 = PerturbationTerm(decay=1.3, parity=Parity.ODD, profile=((1.0, (1, 0, 0)),),
                             amplitude=1.0)
    return {
        "flat": flat(),
        "schwarzschild_m1": schwarzschild(1.0),
        "schwarzschild_m2": schwarzschild(2.0),
        "schwarzschild_m-1": schwarzschild(-1.0),
        "translated_m1": translated_schwarzschild(1.0, (1.0, -0.5, 0.25)),
        "perturbed_tau06": perturbed_schwarzschild(1.0, even06, tau=0.6),
        "perturbed_tau08": perturbed_schwarzschild(1.0, even08, tau=0.8),
        "rt_tau08": perturbed_schwarzschild(1.0, even08 + odd18, tau=0.8, tau_hat=0.8),
        "non_rt_odd": perturbed_schwarzschild(1.0, [odd13], tau=0.8),
    }
