"""Command-line front end.

Every subcommand writes a JSON report (plus CSV tables and a gnuplot script
where there is a sweep) into ``--out``.  Failures print a structured error
record on stdout and exit nonzero: 2 for configuration and usage errors,
1 for everything else.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import flux_invariants as fx
from . import io
from . import ls_solver as ls
from . import metric_models as mm
from . import surface_geometry as sg
from . import verification
from .errors import CMCError, ConfigError

log = logging.getLogger(__name__)

COMMANDS = ("solve-leaf", "foliation", "flux", "gfit", "drift", "verify")
_SOLVER_KEYS = {f for f in ls.SolverOptions.__dataclass_fields__}


@dataclass
class ExperimentSpec:
    command: str
    metric_ref: str | None
    model: mm.MetricModel
    lambdas: list = field(default_factory=list)
    xi_grid: list = field(default_factory=list)
    lmax: int = 16
    options: ls.SolverOptions = ls.DEFAULT_OPTIONS
    out: Path = Path("out")
    jobs: int = 1
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"command": self.command, "metric": self.metric_ref,
                "model": mm.model_to_dict(self.model), "lambdas": self.lambdas,
                "xi_grid": self.xi_grid, "lmax": self.lmax, "jobs": self.jobs, "seed": self.seed,
                "options": self.options}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, "argv")


def _floats(text, where):
    try:
        vals = [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", where) from None
    if not vals:
        raise ConfigError("empty list", where)
    return vals


def parse_xi_grid(text) -> list:
    """``a:b:n`` -> n equally spaced values from a to b inclusive."""
    parts = str(text).split(":")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        raise ConfigError(f"xi grid must look like a:b:n, got {text!r}", "xi_grid") from None
    if len(parts) != 3 or n < 2:
        raise ConfigError("xi grid needs at least two points", "xi_grid")
    return [float(v) for v in np.linspace(a, b, n)]


def _load_document(path):
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    import json
    return json.loads(text)


def resolve_metric(ref):
    """A config path, or a catalog name such as ``schwarzschild_m1``."""
    if ref is None:
        return mm.flat(), {}
    p = Path(ref)
    if p.exists():
        model = mm.load_metric_config(p)
        doc = _load_document(p)
        return model, doc if isinstance(doc, dict) else {}
    cat = mm.catalog()
    if ref in cat:
        return cat[ref], {}
    raise ConfigError(f"metric {ref!r} is neither a file nor a catalog name "
                      f"({', '.join(sorted(cat))})", "metric")


def _solver_options(doc, lmax):
    raw = doc.get("solver", {}) if isinstance(doc, dict) else {}
    if not isinstance(raw, dict):
        raise ConfigError("solver must be a table", "solver")
    kw = {}
    for k, v in raw.items():
        if k not in _SOLVER_KEYS:
            raise ConfigError(f"unknown solver option {k!r}", f"solver.{k}")
        default = getattr(ls.DEFAULT_OPTIONS, k)
        if isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"solver.{k} must be a boolean", f"solver.{k}")
        elif isinstance(default, (int, float)):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"solver.{k} must be a number", f"solver.{k}")
            v = type(default)(v)
        kw[k] = v
    if lmax is not None:
        kw["lmax"] = int(lmax)
    return ls.SolverOptions(**kw)


def build_spec(args) -> ExperimentSpec:
    model, doc = resolve_metric(args.metric)
    opts = _solver_options(doc, args.lmax)
    if opts.lmax < 4 or opts.lmax > 48:
        raise ConfigError("lmax must lie in [4, 48]", "lmax")
    lambdas = []
    lam_arg = getattr(args, "lam", None) or getattr(args, "lambdas", None)
    if lam_arg is not None:
        lambdas = _floats(lam_arg, "lambda")
    elif "lambdas" in doc:
        lambdas = [float(v) for v in doc["lambdas"]]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ConfigError("lambda ladder must be strictly increasing", "lambdas")
    xi_grid = []
    if getattr(args, "xi_grid", None):
        xi_grid = parse_xi_grid(args.xi_grid)
    elif "xi_grid" in doc:
        xi_grid = parse_xi_grid(doc["xi_grid"])
    if args.jobs < 1:
        raise ConfigError("--jobs must be positive", "jobs")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}", "out") from None
    return ExperimentSpec(command=args.command, metric_ref=args.metric, model=model,
                          lambdas=lambdas, xi_grid=xi_grid, lmax=opts.lmax, options=opts,
                          out=out, jobs=args.jobs, seed=args.seed)


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _vec(text, where):
    v = _floats(text, where)
    if len(v) != 3:
        raise ConfigError("expected three components", where)
    return np.array(v)


# ---------------------------------------------------------------------------
# commands


def _leaf_payload(leaf, stability=None):
    S = leaf.surface
    d = leaf.to_dict()
    d["center"] = leaf.center
    d["diagnostics"] = sg.surface_diagnostics(S).to_dict()
    if stability is not None:
        d["stability"] = stability.to_dict()
    return d


def cmd_solve_leaf(spec: ExperimentSpec, args) -> int:
    if len(spec.lambdas) != 1:
        raise ConfigError("solve-leaf needs exactly one --lambda", "lambda")
    lam = spec.lambdas[0]
    xi0 = _vec(args.xi0, "xi0") if args.xi0 else np.zeros(3)
    model = spec.model
    centered = model.mass_param == 0.0 and model.kind is not mm.Kind.CUSTOM
    if centered:
        leaf = ls.reduced_leaf(xi0, lam, model, spec.options)
    else:
        leaf = ls.find_critical_point(lam, model, xi0, spec.options)
    stab = ls.stability_spectrum(leaf)
    payload = _leaf_payload(leaf, stab)
    payload["mode"] = "fixed_center" if centered else "critical_point"
    io.write_json(spec.out / "leaf.json", io.report("leaf", {"spec": spec.to_dict(), "leaf": payload}))
    leaf.u.to_csv(spec.out / "leaf_u.csv")
    print(io.dumps({"lambda": lam, "xi": leaf.xi, "center": leaf.center,
                    "H": leaf.H_mean, "verdict": stab.verdict.value}))
    return 0


def cmd_foliation(spec: ExperimentSpec, args) -> int:
    lambdas = spec.lambdas or [25.0, 50.0, 100.0, 200.0]
    leaves, rep = ls.foliation_sweep(spec.model, lambdas, spec.options)
    payload = {"spec": spec.to_dict(), "report": rep.to_dict(),
               "leaves": [_leaf_payload(lf) for lf in leaves],
               "parity": ls.parity_scaling(leaves)}
    if spec.model.mass_param != 0.0:
        try:
            payload["center_of_mass"] = fx.cmc_center_of_mass(leaves, grid=spec.options.grid()).to_dict()
        except CMCError as exc:
            payload["center_of_mass"] = {"error": str(exc)}
    io.write_json(spec.out / "foliation.json", io.report("foliation", payload))
    rows = []
    gaps = rep.ordering_gaps + [float("nan")]
    for lf, H, gp in zip(leaves, rep.H, gaps):
        c = lf.center
        rows.append([lf.lam, H, lf.lam * H, c[0], c[1], c[2], gp])
    io.write_csv(spec.out / "foliation.csv",
                 ["lambda", "H", "lambda_H", "cx", "cy", "cz", "gap_to_next"], rows)
    io.write_gnuplot(spec.out / "foliation.gp", "foliation.csv", 1, [3], ["lambda*H"],
                     title="lambda H along the foliation", logx=True, xlabel="lambda")
    ok = rep.h_decreasing and rep.ordered
    print(io.dumps({"h_decreasing": rep.h_decreasing, "ordered": rep.ordered,
                    "remainder_order": rep.remainder_order, "lambda0": rep.lambda0}))
    return 0 if ok else 1


def cmd_flux(spec: ExperimentSpec, args) -> int:
    radii = spec.lambdas or list(fx.DEFAULT_LADDER)
    grid = spec.options.grid()
    seq = fx.flux_sequence(spec.model, radii, grid=grid)
    reports = [fx.flux_report(spec.model, r, grid=grid,
                              mass=seq["mass_limit"] if abs(seq["mass_limit"]) > 1e-12 else None)
               for r in radii]
    io.write_json(spec.out / "flux.json", io.report("flux", {
        "spec": spec.to_dict(), "sequence": seq, "reports": [r.to_dict() for r in reports]}))
    rows = []
    for k, r in enumerate(radii):
        com = seq["com"][k] if seq["com"] is not None else [float("nan")] * 3
        rows.append([r, seq["mass"][k], seq["mass_flux_form"][k], com[0], com[1], com[2],
                     seq["mass_order"]])
    io.write_csv(spec.out / "flux.csv",
                 ["radius", "mass", "mass_flux_form", "com_x", "com_y", "com_z", "fitted_order"], rows)
    io.write_gnuplot(spec.out / "flux.gp", "flux.csv", 1, [2, 3], ["mass", "flux form"],
                     title="mass flux across radii", logx=True, xlabel="radius")
    print(io.dumps({"mass_limit": seq["mass_limit"], "com_limit": seq["com_limit"],
                    "com_converged": seq["com_converged"]}))
    return 0


def _g_value(job):
    xi, lam, model, opts = job
    return ls.solve_graph(xi, lam, model, opts, with_derivative=False).G_value


def fit_quadratic(ts, G0, G):
    """Least-squares c in G - G0 = c t^2 (through the origin)."""
    t = np.asarray(ts, dtype=float)
    d = np.asarray(G, dtype=float) - G0
    keep = t != 0
    return float(np.sum(d[keep] * t[keep] ** 2) / np.sum(t[keep] ** 4))


def cmd_gfit(spec: ExperimentSpec, args) -> int:
    if len(spec.lambdas) != 1:
        raise ConfigError("gfit needs exactly one --lambda", "lambda")
    lam = spec.lambdas[0]
    ts = spec.xi_grid or list(np.linspace(0.0, 0.5, 9))
    direction = _vec(args.direction, "direction") if args.direction else np.array([1.0, 0.0, 0.0])
    direction = direction / np.linalg.norm(direction)
    jobs = [(t * direction, lam, spec.model, spec.options) for t in [0.0] + list(ts)]
    vals = _map(_g_value, jobs, spec.jobs)
    G0, G = vals[0], vals[1:]
    c = fit_quadratic(ts, G0, G)
    m = spec.model.mass_param
    ratio = c / (4.0 * np.pi * m) if m != 0 else None
    payload = {"spec": spec.to_dict(), "lambda": lam, "direction": direction, "t": ts,
               "G": G, "G0": G0, "coefficient": c, "coefficient_over_4pi_m": ratio}
    io.write_json(spec.out / "gfit.json", io.report("gfit", payload))
    io.write_csv(spec.out / "gfit.csv", ["t", "G_minus_G0", "fit"],
                 [[t, g - G0, c * t * t] for t, g in zip(ts, G)])
    io.write_gnuplot(spec.out / "gfit.gp", "gfit.csv", 1, [2, 3], ["G - G0", "quadratic fit"],
                     title="reduced area along a ray", xlabel="|xi|")
    print(io.dumps({"coefficient": c, "coefficient_over_4pi_m": ratio}))
    return 0


def _drift_job(job):
    xi, lam, model, opts, cmc_tol = job
    leaf = ls.solve_graph(xi, lam, model, opts, with_derivative=False)
    S = leaf.surface
    ext = sg.compute_extrinsic(S)
    H = float(np.sum(ext.dmu * ext.H) / np.sum(ext.dmu))
    xh = fx.drift_point(ext, H)
    par = xh / np.linalg.norm(xh) if np.linalg.norm(xh) > 0 else np.array([1.0, 0.0, 0.0])
    perp = np.cross(par, [0.0, 0.0, 1.0])
    if np.linalg.norm(perp) < 1e-8:
        perp = np.cross(par, [0.0, 1.0, 0.0])
    perp /= np.linalg.norm(perp)
    v_par = fx.drift_obstruction(S, par, cmc_tol=cmc_tol)
    v_perp = fx.drift_obstruction(S, perp, cmc_tol=cmc_tol)
    return {"lambda": lam, "xi": xi, "xi_hat": xh, "a_parallel": par, "a_perpendicular": perp,
            "obstruction_parallel": v_par, "obstruction_perpendicular": v_perp,
            "expected_parallel": 16 * np.pi * model.mass_param * float(par @ xh),
            "cmc_residual": leaf.cmc_residual}


def cmd_drift(spec: ExperimentSpec, args) -> int:
    lambdas = spec.lambdas or [100.0, 200.0, 400.0]
    xi = _vec(args.xi, "xi") if args.xi else np.array([0.5, 0.0, 0.0])
    rows = _map(_drift_job, [(xi, lam, spec.model, spec.options, args.cmc_tol) for lam in lambdas],
                spec.jobs)
    m = spec.model.mass_param
    for r in rows:
        denom = 16 * np.pi * float(r["a_parallel"] @ r["xi_hat"])
        r["ratio_parallel"] = r["obstruction_parallel"] / denom if denom else None
        r["ratio_over_mass"] = r["ratio_parallel"] / m if (m and denom) else None
    io.write_json(spec.out / "drift.json", io.report("drift", {"spec": spec.to_dict(), "rows": rows}))
    io.write_csv(spec.out / "drift.csv", ["lambda", "obstruction_parallel", "obstruction_perpendicular",
                                          "expected_parallel"],
                 [[r["lambda"], r["obstruction_parallel"], r["obstruction_perpendicular"],
                   r["expected_parallel"]] for r in rows])
    io.write_gnuplot(spec.out / "drift.gp", "drift.csv", 1, [2, 4], ["obstruction", "16 pi m <a, xi_hat>"],
                     title="drift obstruction", logx=True, xlabel="lambda")
    print(io.dumps([{k: r[k] for k in ("lambda", "ratio_parallel", "obstruction_perpendicular")}
                    for r in rows]))
    return 0


def cmd_verify(spec: ExperimentSpec, args) -> int:
    names = tuple(s.strip() for s in args.suite.split(",") if s.strip())
    try:
        checks, timings = verification.run_suites(spec.model, names, lmax=spec.lmax, seed=spec.seed)
    except ValueError as exc:
        raise ConfigError(str(exc), "suite") from None
    failed = [c for c in checks if not c.passed]
    payload = {"spec": spec.to_dict(), "suites": list(timings), "passed": not failed,
               "n_checks": len(checks), "n_failed": len(failed),
               "checks": [c.to_dict() for c in checks]}
    # timings are left out of the JSON so reruns are byte-identical
    io.write_json(spec.out / "verify.json", io.report("verify", payload))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.suite}.{c.name} value={c.value:.3e} "
              f"threshold={c.threshold:.3e} {c.detail}".rstrip())
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed "
          f"({sum(timings.values()):.1f} s)")
    return 0 if not failed else 1


HANDLERS = {"solve-leaf": cmd_solve_leaf, "foliation": cmd_foliation, "flux": cmd_flux,
            "gfit": cmd_gfit, "drift": cmd_drift, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--metric", help="metric config (.toml/.json) or catalog name")
    common.add_argument("--lmax", type=int, default=None, help="harmonic truncation degree")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="cmcspheres", description="Large CMC spheres in asymptotically flat metrics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve-leaf", parents=[common], help="critical-point leaf at one lambda")
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--xi0", help="starting center offset, e.g. 0.1,0,0")

    s = sub.add_parser("foliation", parents=[common], help="sweep of leaves over a lambda ladder")
    s.add_argument("--lambda", "--lambdas", dest="lambdas", help="comma-separated ladder")

    s = sub.add_parser("flux", parents=[common], help="mass and center-of-mass flux sequences")
    s.add_argument("--lambda", "--radii", dest="lambdas", help="comma-separated radius ladder")

    s = sub.add_parser("gfit", parents=[common], help="quadratic fit of the reduced area")
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--xi-grid", dest="xi_grid", help="a:b:n offsets along --direction")
    s.add_argument("--direction", help="ray direction, default 1,0,0")

    s = sub.add_parser("drift", parents=[common], help="drift obstruction on off-center spheres")
    s.add_argument("--lambda", "--lambdas", dest="lambdas", help="comma-separated ladder")
    s.add_argument("--xi", help="center offset, default 0.5,0,0")
    s.add_argument("--cmc-tol", dest="cmc_tol", type=float, default=2e-2,
                   help="allowed relative H variation of the solved spheres")

    s = sub.add_parser("verify", parents=[common], help="run the invariant suites")
    s.add_argument("--suite", default="all",
                   help="comma-separated subset of " + ",".join(verification.SUITES) + " or all")
    return p


def error_record(exc: BaseException) -> dict:
    rec = {"type": type(exc).__name__, "message": str(exc),
           "code": getattr(exc, "code", "internal")}
    if isinstance(exc, ConfigError):
        rec["field"] = exc.field
    if getattr(exc, "pair", None) is not None:
        rec["pair"] = list(exc.pair)
    return io.report("error", {"error": rec})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out_dir = None
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        out_dir = Path(args.out)
        spec = build_spec(args)
        return HANDLERS[args.command](spec, args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except ConfigError as exc:
        code, rec = 2, error_record(exc)
    except CMCError as exc:
        code, rec = 1, error_record(exc)
    except Exception as exc:  # still report it in machine-readable form
        code, rec = 1, error_record(exc)
        rec["error"]["traceback"] = traceback.format_exc().splitlines()[-3:]
    print(io.dumps(rec))
    if out_dir is not None:
        try:
            io.write_json(out_dir / "error.json", rec)
        except OSError:
            pass
    return code
