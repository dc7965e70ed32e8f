"""Command line: model catalog, residual checks, bound campaigns and reports.

Exit codes: 0 pass, 1 verified failure, 2 usage or precondition error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds, comparison, curvature, models, numerics, spectral
from .errors import ConvergenceError, DivergenceError, PreconditionError, SolvolError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
REPORT_DIR_ENV = "SOLVOL_REPORT_DIR"
DEFAULT_TOL = 1e-9
RADIAL_TOL = 1e-8
TRACE_TOL = 1e-10
BUILTIN_SUITES = {"acceptance": "acceptance_suite.json"}


# -- serialization ------------------------------------------------------------

def format_number(x):
    """17 significant digits; non-finite values become JSON null."""
    x = float(x)
    return format(x, ".17g") if math.isfinite(x) else "null"


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def dumps(obj, indent=0):
    """Deterministic JSON: sorted keys, two-space indent, 17-digit floats."""
    obj = _plain(obj)
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_number(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_text(columns):
    """CSV with a header row and LF endings from an ordered dict of columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(names)
    arrays = [np.atleast_1d(np.asarray(columns[k], dtype=float)) for k in names]
    for row in zip(*arrays):
        writer.writerow([format_number(v) if math.isfinite(v) else "nan" for v in row])
    return buf.getvalue()


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _slug(text):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "model"


# -- model resolution ---------------------------------------------------------

BUILTIN_MODELS = {
    "gaussian": ("Gaussian shrinking soliton, phi = r, f = r^2/4", ["n", "rmax"]),
    "hyperbolic_qe": ("hyperbolic space with f = -m log cosh r", ["n", "m", "rmax"]),
    "product_qe": ("half line times a Ricci-flat fiber, f = -m log(c t)", ["m", "c"]),
    "hyperbolic": ("hyperbolic space with f = 0", ["n", "rmax"]),
}


def _applicable(kind, radial_only=False):
    if isinstance(kind, models.Shrinker):
        return ["check", "thm1_1", "cor1_2_infR", "cor1_2_plain"]
    if isinstance(kind, models.MetricMeasure):
        return ["check", "thm1_1", "thm1_7", "cor1_2_infR", "cor1_2_plain"]
    out = ["check"]
    if kind.lam == 0:
        out += ["thm1_3", "thm1_5", "cor1_4", "certificate"]
    elif kind.lam < 0 and kind.mu <= 0 and 1 < kind.m < math.inf:
        out.append("thm1_6")
    return out


def catalog():
    """Built-in models with parameters and applicable checks, without building
    the ODE-generated ones."""
    rows = [
        {"name": "gaussian", "parameters": {"n": 3, "rmax": 10.0},
         "description": BUILTIN_MODELS["gaussian"][0], "kind": "shrinker",
         "applicable": _applicable(models.Shrinker())},
        {"name": "hyperbolic_qe", "parameters": {"n": 3, "m": 2.0, "rmax": 10.0},
         "description": BUILTIN_MODELS["hyperbolic_qe"][0], "kind": "quasi_einstein",
         "applicable": _applicable(models.QuasiEinstein(2.0, -4.0, -1.0))},
        {"name": "product_qe", "parameters": {"m": 2.0, "c": 1.0},
         "description": BUILTIN_MODELS["product_qe"][0], "kind": "quasi_einstein",
         "applicable": ["check"]},
        {"name": "hyperbolic", "parameters": {"n": 3, "rmax": 10.0},
         "description": BUILTIN_MODELS["hyperbolic"][0], "kind": "quasi_einstein",
         "applicable": ["check", "lambda1"]},
        {"name": "generated:flat", "parameters": {"n": 3, "rmax": 10.0},
         "description": "Euclidean space with f = 0", "kind": "quasi_einstein",
         "applicable": _applicable(models.QuasiEinstein(2.0, 0.0))},
    ]
    for key, (n, eps, a, width, offset) in models.PERTURBED_GAUSSIANS.items():
        rows.append({"name": f"generated:{key}",
                     "parameters": {"n": n, "eps": eps, "a": a, "width": width, "offset": offset},
                     "description": "ODE model, f = (1/4+eps) r^2 + offset + a r^2 exp(-r^2/width^2)",
                     "kind": "metric_measure", "applicable": _applicable(models.MetricMeasure())})
    for key, (n, m, family, a, offset) in models.FLAT_QE_MODELS.items():
        rows.append({"name": f"generated:{key}",
                     "parameters": {"n": n, "m": m, "family": family, "a": a, "offset": offset},
                     "description": f"ODE model, lam = 0, {family} potential",
                     "kind": "quasi_einstein",
                     "applicable": _applicable(models.QuasiEinstein(m, 0.0))})
    return rows


def build_model(spec):
    """Model from a spec dict: ``{"model": name, "n", "m", "c", "rmax"}``,
    ``{"file": path}`` or ``{"document": {...}}``."""
    if "document" in spec:
        return models.model_from_document(spec["document"])
    if spec.get("file"):
        try:
            with open(spec["file"], encoding="utf-8") as handle:
                doc = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise PreconditionError(f"cannot read model document: {exc}") from exc
        return models.model_from_document(doc)
    name = spec.get("model") or "gaussian"
    n = int(spec.get("n") or 3)
    rmax = float(spec.get("rmax") or 10.0)
    m = float(spec["m"]) if spec.get("m") is not None else 2.0
    if name == "gaussian":
        kind = models.MetricMeasure() if spec.get("structure") == "metric_measure" else None
        return models.gaussian_soliton(n, rmax, kind)
    if name == "hyperbolic_qe":
        return models.hyperbolic_qe(n, m, rmax)
    if name == "product_qe":
        c = float(spec["c"]) if spec.get("c") is not None else 1.0
        return models.ricci_flat_product_qe(m, c)
    if name == "hyperbolic":
        return models.hyperbolic_space(n, rmax)
    if name.startswith("generated:"):
        return models.generated_model(name.split(":", 1)[1], rmax)
    raise PreconditionError(f"unknown model {name!r}")


def parse_grid(spec, r_max):
    """``None`` or ``"N"`` -> default grid with N points; ``"lo:hi:N"`` -> linear;
    ``"a,b,c"`` -> exactly those radii."""
    if spec is None or spec == "":
        return numerics.default_grid(r_max)
    text = str(spec)
    try:
        if "," in text:
            grid = np.array(sorted(float(x) for x in text.split(",") if x.strip()))
        elif ":" in text:
            lo, hi, count = text.split(":")
            grid = np.linspace(float(lo), float(hi), int(count))
        else:
            grid = numerics.default_grid(r_max, int(text))
    except ValueError as exc:
        raise PreconditionError(f"bad grid spec {spec!r}") from exc
    if grid.size == 0 or grid[0] <= 0 or grid[-1] > r_max * (1 + 1e-12):
        raise PreconditionError(f"grid must lie in (0, {r_max}]")
    return grid


# -- tasks --------------------------------------------------------------------

def _max_abs(x):
    return float(np.max(np.abs(x)))


def check_model(model, grid=None, tol=DEFAULT_TOL):
    """All residual and hypothesis checks applicable to ``model``.

    Returns (passed, summary, columns).
    """
    checks, info = {}, {}
    if isinstance(model, models.ProductModel):
        # f'' and f'^2/m both grow like 1/t^2 and cancel; stay off t = 0
        t = np.linspace(0.01, 10.0, 256) if grid is None else grid
        rad, tan, mu_res = curvature.qe_residuals(model, t)
        lam, mu, spread = curvature.recover_qe_constants(model, t)
        checks.update(qe_rad=(_max_abs(rad), tol), qe_tan=(_max_abs(tan), tol),
                      qe_mu=(_max_abs(mu_res), tol),
                      recovered_mu=(abs(mu - model.kind.mu), tol * (1 + abs(model.kind.mu))))
        info.update(lam=lam, mu=mu, spread=spread)
        cols = {"t": t, "qe_rad": rad, "qe_tan": tan, "qe_mu": mu_res}
        return _finish(model, checks, info, cols)

    r = parse_grid(None, model.r_max) if grid is None else grid
    sample = curvature.curvature_at(model, r)
    trace = sample.R - sample.ric_rad - (model.n - 1) * sample.ric_tan
    defect = comparison.riccati_defect(model, r)
    checks["trace_identity"] = (float(np.max(np.abs(trace) / (1 + np.abs(sample.R)))), TRACE_TOL)
    checks["riccati_defect"] = (_max_abs(defect), 1e-9)
    cols = {"r": r, "ric_rad": sample.ric_rad, "ric_tan": sample.ric_tan, "R": sample.R}
    kind = model.kind
    f1, f2 = model.f.deriv1(r), model.f.deriv2(r)

    if isinstance(kind, (models.Shrinker, models.MetricMeasure)):
        rep = curvature.verify_hypotheses(model, r, tol)
        cols.update(ric_f_rad_margin=rep.rad_margin, ric_f_tan_margin=rep.tan_margin,
                    f_minus_grad2=rep.gradient_margin)
        info["worst"] = {k: list(v) for k, v in rep.worst().items()}
        info["envelope_c_half"] = rep.envelope_c
        info["envelope_c_quarter"] = curvature.potential_envelope_constant(
            r, model.f.value(r), coeff=0.25)
        info["min_R"] = float(np.min(sample.R))
        checks["ric_f_rad"] = (-float(rep.rad_margin.min()), tol)
        checks["ric_f_tan"] = (-float(rep.tan_margin.min()), tol)
        checks["gradient"] = (-float(rep.gradient_margin.min()), tol)
        if rep.hamilton is not None:
            for k, res in enumerate(rep.hamilton, start=1):
                cols[f"hamilton_{k}"] = res
                if model.radial_only:
                    info[f"hamilton_{k}_max"] = _max_abs(res)
                else:
                    checks[f"hamilton_{k}"] = (_max_abs(res), tol)
        if model.radial_only:
            radial = sample.ric_rad + f2 - 0.5
            cols["radial_residual"] = radial
            checks["radial_equation"] = (_max_abs(radial), RADIAL_TOL)
        return _finish(model, checks, info, cols)

    m = kind.m
    if model.radial_only:
        radial = sample.ric_rad + f2 - f1**2 / m - kind.lam
        cols["radial_residual"] = radial
        checks["radial_equation"] = (_max_abs(radial), RADIAL_TOL)
        rad, tan, _ = curvature.qe_residuals(model, r, normalized=True)
        info["tangential_residual_max"] = _max_abs(tan)
        return _finish(model, checks, info, cols)
    rad, tan, mu_res = curvature.qe_residuals(model, r, normalized=True)
    lam, mu, spread = curvature.recover_qe_constants(model, r)
    gap = curvature.weighted_laplacian_identity_gap(model, r)
    cols.update(qe_rad=rad, qe_tan=tan, qe_mu_normalized=mu_res)
    checks.update(qe_rad=(_max_abs(rad), tol), qe_tan=(_max_abs(tan), tol),
                  qe_mu=(_max_abs(mu_res), tol),
                  recovered_lam=(abs(lam - kind.lam), tol * (1 + abs(kind.lam))),
                  recovered_mu=(abs(mu - kind.mu), tol * (1 + abs(kind.mu))),
                  weighted_laplacian=(_max_abs(gap), 1e-7))
    info.update(lam=lam, mu=mu, spread=spread)
    return _finish(model, checks, info, cols)


def _finish(model, checks, info, cols):
    table = {k: {"value": v, "limit": lim, "pass": bool(v <= lim)} for k, (v, lim) in checks.items()}
    passed = all(row["pass"] for row in table.values())
    summary = {"model": model.name, "kind": model.kind.label, "checks": table,
               "info": info, "pass": passed}
    return passed, summary, cols


def _bound_columns(report):
    return {"r": report.grid, "actual": report.actual, "bound": report.bound,
            "margin": report.margin}


def run_case(case):
    """Execute one case dict; returns (exit_code, summary, csv_text or None).

    Case keys: ``task`` (check, bound, lambda1, cor1_4, certificate),
    ``model`` (spec for :func:`build_model`), and per task ``kind``,
    ``grid``, ``tol``, ``mesh``, ``L``, ``variant``.
    """
    task = case.get("task", "bound")
    summary = {"id": case.get("id", ""), "task": task}
    caught = []
    try:
        with warnings.catch_warnings(record=True) as seen:
            warnings.simplefilter("always", models.TruncationWarning)
            model = build_model(case.get("model", {}))
            code, body, text = _run_task(task, model, case)
            caught = [str(w.message) for w in seen if issubclass(w.category, UserWarning)]
    except PreconditionError as exc:
        code, body, text = EXIT_USAGE, {"error": str(exc)}, None
        report = getattr(exc, "report", None)
        if report is not None:
            body["hypotheses"] = {k: list(v) for k, v in report.worst().items()}
    except (ConvergenceError, DivergenceError) as exc:
        code, body, text = EXIT_FAIL, {"error": str(exc)}, None
    except SolvolError as exc:
        code, body, text = EXIT_USAGE, {"error": str(exc)}, None
    summary.update(body)
    if caught:
        summary["warnings"] = caught
    summary["exit_code"] = code
    return code, summary, text


def _run_task(task, model, case):
    tol = float(case.get("tol") or DEFAULT_TOL)
    if task == "check":
        grid = None
        if case.get("grid") is not None and not isinstance(model, models.ProductModel):
            grid = parse_grid(case.get("grid"), model.r_max)
        passed, body, cols = check_model(model, grid, tol)
        return (EXIT_PASS if passed else EXIT_FAIL), body, csv_text(cols)
    if task == "bound":
        kind = case.get("kind")
        if kind not in bounds.BOUND_KINDS:
            raise PreconditionError(f"unknown bound kind {kind!r}")
        if not isinstance(model, models.PoleModel):
            raise PreconditionError("volume bounds need a pole model")
        grid = parse_grid(case.get("grid"), model.r_max)
        options = {"variant": case["variant"]} if case.get("variant") else {}
        report = bounds.bound_report(model, kind, grid, **options)
        body = report.summary()
        return (EXIT_PASS if report.passed else EXIT_FAIL), body, csv_text(_bound_columns(report))
    if task == "lambda1":
        mesh = int(case.get("mesh") or spectral.COR_MESH)
        L = float(case.get("L") or model.r_max)
        est = spectral.lambda1_estimate(model, L, mesh)
        body = {"model": model.name, "estimate": est.as_dict()}
        code = EXIT_PASS
        if case.get("check_cor1_4"):
            cert = spectral.cor1_4_check(model, mesh)
            body["cor1_4"] = cert
            code = EXIT_PASS if cert["pass"] else EXIT_FAIL
        return code, body, None
    if task == "cor1_4":
        mesh = int(case.get("mesh") or spectral.COR_MESH)
        cert = spectral.cor1_4_check(model, mesh)
        return (EXIT_PASS if cert["pass"] else EXIT_FAIL), cert, None
    if task == "certificate":
        grid = parse_grid(case.get("grid"), model.r_max)
        cert = spectral.stochastic_completeness_certificate(model, grid)
        return (EXIT_PASS if cert["issued"] else EXIT_FAIL), cert, None
    raise PreconditionError(f"unknown task {task!r}")


# -- commands -----------------------------------------------------------------

def _out_dir(args):
    return Path(args.out or os.environ.get(REPORT_DIR_ENV) or "solvol-reports")


def _model_spec(args):
    return {"model": args.model, "file": args.file, "n": args.n, "m": args.m,
            "c": args.c, "rmax": args.rmax}


def _emit_case(args, case, stem):
    code, summary, text = run_case(case)
    out = _out_dir(args)
    if code != EXIT_USAGE:
        if text is not None:
            _write(out / f"{stem}.csv", text)
        _write(out / f"{stem}.json", dumps(summary) + "\n")
    print(dumps(summary))
    return code


def cmd_models(args):
    rows = catalog()
    if args.config_dir:
        directory = Path(args.config_dir)
        if not directory.is_dir():
            print(f"error: {directory} is not a directory", file=sys.stderr)
            return EXIT_USAGE
        for path in sorted(directory.glob("*.json")):
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
                label = doc.get("kind", "?") if isinstance(doc, dict) else "?"
            except json.JSONDecodeError:
                label = "unreadable"
            rows.append({"name": f"file:{path.name}", "parameters": {}, "description": label,
                         "kind": "document", "applicable": []})
    if args.json:
        print(dumps(rows))
        return EXIT_PASS
    for row in rows:
        params = ", ".join(f"{k}={v}" for k, v in row["parameters"].items())
        print(f"{row['name']:<24} {row['kind']:<15} {params:<50} {' '.join(row['applicable'])}")
    return EXIT_PASS


def cmd_check(args):
    case = {"task": "check", "model": _model_spec(args), "grid": args.grid, "tol": args.tol}
    return _emit_case(args, case, f"check_{_slug(args.file or args.model)}")


def cmd_bound(args):
    case = {"task": "bound", "model": _model_spec(args), "kind": args.kind,
            "grid": args.grid, "variant": args.variant}
    return _emit_case(args, case, f"bound_{args.kind}_{_slug(args.file or args.model)}")


def cmd_lambda1(args):
    if args.mesh is not None and args.mesh < spectral.MIN_MESH:
        print(f"error: mesh must be >= {spectral.MIN_MESH}", file=sys.stderr)
        return EXIT_USAGE
    case = {"task": "lambda1", "model": _model_spec(args), "mesh": args.mesh, "L": args.L,
            "check_cor1_4": args.check_cor1_4}
    return _emit_case(args, case, f"lambda1_{_slug(args.file or args.model)}")


def load_suite(spec):
    if spec in BUILTIN_SUITES:
        text = resources.files("solvol").joinpath("data", BUILTIN_SUITES[spec]).read_text("utf-8")
    else:
        text = Path(spec).read_text(encoding="utf-8")
    suite = json.loads(text)
    cases = suite.get("cases") if isinstance(suite, dict) else None
    if not isinstance(cases, list) or not cases:
        raise PreconditionError("suite needs a non-empty 'cases' list")
    for i, case in enumerate(cases):
        case.setdefault("id", f"case{i:03d}")
    ids = [c["id"] for c in cases]
    if len(set(ids)) != len(ids):
        raise PreconditionError("suite case ids must be unique")
    return cases


def run_suite(cases, parallel=1):
    """Run every case; results come back in suite order."""
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(run_case, cases))
    return [run_case(case) for case in cases]


def cmd_report(args):
    try:
        cases = load_suite(args.suite)
    except (OSError, json.JSONDecodeError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    results = run_suite(cases, max(1, args.parallel))
    out = _out_dir(args)
    entries = []
    for case, (code, summary, text) in zip(cases, results):
        if text is not None:
            _write(out / f"{_slug(case['id'])}.csv", text)
        entries.append(summary)
    passed = all(code == EXIT_PASS for code, _, _ in results)
    aggregate = {"suite": str(args.suite), "cases": entries,
                 "failed": [s["id"] for s in entries if s["exit_code"] != EXIT_PASS],
                 "pass": passed}
    _write(out / "report.json", dumps(aggregate) + "\n")
    for summary in entries:
        status = "PASS" if summary["exit_code"] == EXIT_PASS else f"FAIL({summary['exit_code']})"
        print(f"{status:<8} {summary['id']}")
    print(f"{len(entries) - len(aggregate['failed'])}/{len(entries)} cases passed; report in {out}")
    return EXIT_PASS if passed else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="solvol",
        description="Volume-growth bounds and structure checks on rotationally symmetric models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--model", default="gaussian",
                       help="built-in model name, e.g. gaussian, hyperbolic_qe, generated:flat")
        p.add_argument("--file", help="JSON model document (overrides --model)")
        p.add_argument("--n", type=int, help="dimension (default 3)")
        p.add_argument("--m", type=float, help="quasi-Einstein parameter m (default 2)")
        p.add_argument("--c", type=float, help="product model constant c (default 1)")
        p.add_argument("--rmax", type=float, help="radius of the model ball (default 10)")
        p.add_argument("--out", help=f"report directory (default ${REPORT_DIR_ENV} or ./solvol-reports)")

    p = sub.add_parser("models", help="list built-in models")
    p.add_argument("--json", action="store_true", help="machine-readable catalog")
    p.add_argument("--config-dir", help="also list model documents in this directory")
    p.set_defaults(func=cmd_models)

    p = sub.add_parser("check", help="structure residuals and hypotheses")
    model_flags(p)
    p.add_argument("--grid", help="'N' default-grid points, 'lo:hi:N' or 'r1,r2,...' (default 256)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="residual tolerance (default 1e-9)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bound", help="evaluate a volume bound against the actual volume")
    model_flags(p)
    p.add_argument("--kind", required=True, choices=bounds.BOUND_KINDS)
    p.add_argument("--grid", help="'N' default-grid points, 'lo:hi:N' or 'r1,r2,...' (default 256)")
    p.add_argument("--variant", choices=("statement", "proof"), help="Phi sign variant for thm1_3")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("lambda1", help="first eigenvalue of the weighted Laplacian")
    model_flags(p)
    p.add_argument("--L", type=float, help="truncation radius (default rmax)")
    p.add_argument("--mesh", type=int, help=f"interior cells (default {spectral.COR_MESH})")
    p.add_argument("--check-cor1-4", action="store_true", help="compare with c^2/4")
    p.set_defaults(func=cmd_lambda1)

    p = sub.add_parser("report", help="run a suite of cases")
    p.add_argument("suite", nargs="?", default="acceptance",
                   help="suite JSON file or 'acceptance' (default)")
    p.add_argument("--parallel", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--out", help=f"report directory (default ${REPORT_DIR_ENV} or ./solvol-reports)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
