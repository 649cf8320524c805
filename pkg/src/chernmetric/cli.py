"""Command line entry point: ``chernmetric <command> [flags]``.

Exit codes: 0 success, 1 numerical failure (singular metric, frequency
window too narrow), 2 configuration error (nothing written), 3 gap closure,
4 tolerance violation in ``identity-check``.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import config as cfg
from .chern import BrillouinGrid, chern_metric_method, chern_oracle, mass_sweep
from .errors import ConfigError, GapClosure, GapClosureOnGrid, SingularMetric, WindowTooNarrow
from .gamma import build_gammas
from .models import BUILTIN_MODELS, Scheme, builtin_model
from .output import emit, render_csv, render_json, run_header
from .qgt import det_identity_report, metric_closed_form, qgt_spectral
from .riemann import curvature_bundle, euler_integral, generic_points, hypersphere_check
from .spectroscopy import DriveSpec, differential_integrated_rate, integrated_rate, reconstruct_metric

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_GAP, EXIT_TOLERANCE = 0, 1, 2, 3, 4
COMMANDS = ("metric", "identity-check", "chern", "sweep", "geometry", "spectroscopy")
SWEEP_COLUMNS = ["m", "method", "value", "nearest_integer", "residual", "s_bz_plus", "s_bz_minus",
                 "grid_L", "wall_time_ms"]
GEOMETRY_POINTS = 20


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chernmetric", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration; flags override its fields")
        p.add_argument("--model", help=f"built-in model ({', '.join(sorted(BUILTIN_MODELS))})")
        p.add_argument("--m", type=float, help="mass parameter of the built-in model")
        p.add_argument("--grid", type=int, help="grid points per Brillouin-zone axis")
        p.add_argument("--scheme", choices=["analytic", "fd", "fd_projector"])
        p.add_argument("--fd-step", type=float, help="finite-difference step of the derivative scheme")
        p.add_argument("--method", choices=["metric", "oracle", "all"])
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--threads", type=int)
        p.add_argument("--seed", type=int, help="seed for random momenta")
        p.add_argument("--samples", type=int, help="number of random momenta")
        p.add_argument("--perturb", type=float, help="rescale the metric by (1 + perturb) before checking")
        p.add_argument("--m-values", type=float, nargs="+", help="masses for sweep")
        p.add_argument("--axes", type=int, nargs="+", help="1-based drive axes for spectroscopy")
        p.add_argument("--epsilon", type=float, help="drive strength")
        p.add_argument("--eta-rel", type=float, help="Lorentzian width in units of the gap")
    return parser


def _overrides(args) -> dict:
    out: dict = {}
    if args.model is not None or args.m is not None:
        out["model"] = {"name": args.model} if args.model is not None else None
    for flag, key in (("grid", "grid"), ("method", "method"), ("out", "out"), ("threads", "threads"),
                      ("seed", "seed"), ("samples", "samples"), ("perturb", "perturb")):
        if getattr(args, flag) is not None:
            out[key] = getattr(args, flag)
    scheme = {}
    if args.scheme is not None:
        scheme["kind"] = args.scheme
    if args.fd_step is not None:
        scheme["fd_step"] = args.fd_step
    if scheme:
        out["scheme"] = scheme
    if args.m_values is not None:
        out["sweep"] = {"m_values": args.m_values}
    drive = {}
    for flag, key in (("axes", "axes"), ("epsilon", "epsilon"), ("eta_rel", "eta_rel")):
        if getattr(args, flag) is not None:
            drive[key] = getattr(args, flag)
    if drive:
        out["drive"] = drive
    return out


def resolve_config(args) -> dict:
    file_config = cfg.load_file(args.config) if args.config else None
    overrides = _overrides(args)
    model_override = overrides.pop("model", None)
    config = cfg.resolve(file_config, overrides)
    if model_override is not None or args.m is not None:
        base = config["model"]
        if model_override is not None:
            base = {"name": model_override["name"], "params": {}}
        if "name" not in base:
            raise ConfigError("--m applies to built-in models only")
        if args.m is not None:
            base = {"name": base["name"], "params": {**base.get("params", {}), "m": args.m}}
        config["model"] = base
        cfg.validate(config)
    return config


def _scheme(config):
    return Scheme(config["scheme"]["kind"], config["scheme"]["fd_step"])


def _random_k(model, config):
    rng = np.random.default_rng(config["seed"])
    return rng.uniform(-np.pi, np.pi, size=(config["samples"], model.dim))


def cmd_metric(config, model, gammas):
    k = _random_k(model, config)
    scheme = _scheme(config)
    closed = metric_closed_form(model, k, scheme, config["tolerances"]["gap"])
    spec = qgt_spectral(model, gammas, k, scheme, config["tolerances"]["gap"])
    diff = np.max(np.abs(closed - spec.metric), axis=(-2, -1))
    trace = np.max(np.abs(spec.curvature_trace), axis=(-2, -1))
    records = [{"k": k[i], "metric": closed[i], "metric_spectral": spec.metric[i],
                "max_abs_diff": float(diff[i]), "max_abs_curvature_trace": float(trace[i])}
               for i in range(len(k))]
    summary = {"max_abs_diff": float(diff.max()), "max_abs_curvature_trace": float(trace.max())}
    return render_json(run_header("metric", config), {"records": records, "summary": summary}), EXIT_OK


def _geometry_records(model, config, points, perturb):
    geo = config["geometry"]
    bundle = curvature_bundle(model, points, geo["fd_step"], geo["richardson"], metric_perturbation=perturb)
    records = []
    for i in range(len(points)):
        sub = type(bundle)(*(None if v is None else v[i] for v in vars(bundle).values()))
        chk = hypersphere_check(sub, model.n_half_dim)
        records.append({"k": points[i], "scalar": chk.scalar, "gauss_codazzi_rel": chk.gauss_codazzi_rel,
                        "ricci_rel": chk.ricci_rel, "einstein_residual": chk.einstein_residual,
                        "euler_rel": chk.euler_rel,
                        "condition": float(np.linalg.cond(sub.metric))})
    return records, hypersphere_check(bundle, model.n_half_dim)


def _geometry_passes(check, tol):
    return check.passes(tol["riemann"], tol["scalar"], tol["einstein"], tol["euler"])


def cmd_identity_check(config, model, gammas):
    tol = config["tolerances"]
    k = _random_k(model, config)
    report = det_identity_report(model, gammas, k, _scheme(config), config["perturb"], tol["gap"])
    records = [{"k": k[i], "sqrt_det_g": float(report.sqrt_det_g[i]),
                "det_form": float(report.quarter_det_A[i]), "curvature_form": float(report.ff_form[i]),
                "rel_discrepancy": float(report.max_rel_discrepancy[i])} for i in range(len(k))]
    worst = float(np.max(report.max_rel_discrepancy))
    summary = {"determinant_identity": {"max_rel_discrepancy": worst, "tolerance": tol["identity"],
                                        "passed": worst < tol["identity"]}}
    passed = worst < tol["identity"]
    if model.n_half_dim == 2:
        rng = np.random.default_rng(config["seed"])
        pts = generic_points(model, GEOMETRY_POINTS, rng, config["geometry"]["max_condition"])
        _, chk = _geometry_records(model, config, pts, config["perturb"])
        ok = _geometry_passes(chk, tol)
        summary["hypersphere_geometry"] = {**vars(chk), "points": GEOMETRY_POINTS, "passed": ok}
        passed = passed and ok
    summary["passed"] = passed
    for name, part in summary.items():
        if isinstance(part, dict):
            print(f"{name}: {'pass' if part['passed'] else 'FAIL'}", file=sys.stderr)
    text = render_json(run_header("identity-check", config), {"records": records, "summary": summary})
    return text, EXIT_OK if passed else EXIT_TOLERANCE


def _row(m, res, grid_l):
    return {"m": m, "method": res.method, "value": res.value, "nearest_integer": res.nearest_integer,
            "residual": res.residual, "s_bz_plus": res.s_bz_plus, "s_bz_minus": res.s_bz_minus,
            "grid_L": grid_l, "wall_time_ms": res.wall_time_ms}


def cmd_chern(config, model, gammas):
    grid = BrillouinGrid(model.n_half_dim, config["grid"])
    rows = []
    m = model.params.get("m")
    if config["method"] in ("metric", "all"):
        res = chern_metric_method(model, gammas, grid, _scheme(config), config["threads"])
        rows.append(_row(m, res, grid.points_per_axis))
    if config["method"] in ("oracle", "all"):
        rows.append(_row(m, chern_oracle(model, gammas, grid), grid.points_per_axis))
    return render_csv(run_header("chern", config), SWEEP_COLUMNS, rows), EXIT_OK


def cmd_sweep(config, model, gammas):
    name = config["model"].get("name")
    if name is None:
        raise ConfigError("sweep needs a built-in model family")
    grid = BrillouinGrid(model.n_half_dim, config["grid"])
    methods = ("metric", "oracle") if config["method"] == "all" else (config["method"],)
    rows, status = [], EXIT_OK
    for row in mass_sweep(lambda m: builtin_model(name, m=m), config["sweep"]["m_values"], grid, methods,
                          _scheme(config), config["threads"]):
        if row.result is None:
            print(f"m={row.m}: {row.error}", file=sys.stderr)
            rows.append({"m": row.m, "method": row.method, "grid_L": grid.points_per_axis})
            status = EXIT_GAP
        else:
            rows.append(_row(row.m, row.result, grid.points_per_axis))
    return render_csv(run_header("sweep", config), SWEEP_COLUMNS, rows), status


def cmd_geometry(config, model, gammas):
    if model.dim != 4:
        raise ConfigError("geometry needs a four-dimensional model")
    rng = np.random.default_rng(config["seed"])
    pts = generic_points(model, config["samples"], rng, config["geometry"]["max_condition"])
    records, chk = _geometry_records(model, config, pts, config["perturb"])
    summary = {**vars(chk), "passed": _geometry_passes(chk, config["tolerances"])}
    payload = {"records": records, "summary": summary}
    if config["geometry"]["euler_grid"]:
        payload["euler_integral"] = euler_integral(model, BrillouinGrid(2, config["geometry"]["euler_grid"]),
                                                   config["geometry"]["fd_step"])
    return render_json(run_header("geometry", config), payload), EXIT_OK


def cmd_spectroscopy(config, model, gammas):
    drive = config["drive"]
    axes = [a - 1 for a in drive["axes"]]
    if any(a >= model.dim for a in axes):
        raise ConfigError(f"drive axes must lie in 1..{model.dim}")
    if drive["k"] is not None:
        if len(drive["k"]) != model.dim:
            raise ConfigError(f"drive k needs {model.dim} components")
        k = np.asarray(drive["k"], dtype=float)
    else:
        k = np.random.default_rng(config["seed"]).uniform(-np.pi, np.pi, model.dim)
    opts = {"epsilon": drive["epsilon"], "eta_rel": drive["eta_rel"], "window_rel": drive["window_rel"]}
    if len(axes) == 1:
        rate = integrated_rate(model, gammas, k, DriveSpec(axes[0], **opts), config["tolerances"]["gap"])
    else:
        rate = differential_integrated_rate(model, gammas, k, tuple(axes), drive["epsilon"],
                                            eta_rel=drive["eta_rel"], window_rel=drive["window_rel"])
    recon = reconstruct_metric(model, gammas, k, drive["epsilon"], eta_rel=drive["eta_rel"],
                               window_rel=drive["window_rel"])
    payload = {
        "k": k,
        "drive": {"axes": drive["axes"], **opts},
        "omega": rate.omega,
        "gamma_of_omega": rate.gamma_of_omega,
        "gamma_int": rate.gamma_int,
        "metric_estimate": rate.metric_estimate,
        "reference_metric": rate.reference_metric,
        "rel_err": rate.rel_err,
        "tail_mass": rate.tail_mass,
        "reconstruction": {"estimate": recon.estimate, "reference": recon.reference,
                           "rel_err": recon.rel_err, "max_rel_err": recon.max_rel_err},
    }
    return render_json(run_header("spectroscopy", config), payload), EXIT_OK


HANDLERS = {"metric": cmd_metric, "identity-check": cmd_identity_check, "chern": cmd_chern,
            "sweep": cmd_sweep, "geometry": cmd_geometry, "spectroscopy": cmd_spectroscopy}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        model = cfg.build_model(config["model"])
        gammas = build_gammas(model.n_half_dim)
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        text, status = HANDLERS[args.command](config, model, gammas)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GapClosure, GapClosureOnGrid) as exc:
        print(f"gap closure: {exc}", file=sys.stderr)
        return EXIT_GAP
    except (SingularMetric, WindowTooNarrow) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    emit(text, config["out"])
    print(f"{args.command} finished in {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
