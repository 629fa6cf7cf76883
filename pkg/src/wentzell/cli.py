"""Command-line front end: check | solve | eigen | halfspace | sweep."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import RunConfig, build_problem, exact_nodal, load_config, load_preset, preset_names
from .errors import ConfigError, WentzellError, WrongCertificateError
from .expressions import compile_expression
from .geometry import integrate_mu
from .halfspace import FrequencyProblem, boundary_symbol, estimate_constants, norm_ratio, solve_frequency, zeta_range
from .solvability import EXIT_CODES, INFEASIBLE, certify, necessity_audit
from .solver import CONVERGED, DIVERGED, SolveOptions, solve
from .spectral import smallest_eigenpair, write_eigen_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MAX_ITER = 4


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


def _finite(d):
    """Replace non-finite floats so json output stays standard."""
    if isinstance(d, dict):
        return {k: _finite(v) for k, v in d.items()}
    if isinstance(d, list):
        return [_finite(v) for v in d]
    if isinstance(d, float) and not math.isfinite(d):
        return "inf" if d > 0 else ("-inf" if d < 0 else "nan")
    return d


def _emit(obj, path=None):
    text = _dump(_finite(obj)) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _config(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        raise ConfigError("a --config file or a --preset name is required")
    if getattr(args, "n", None) is not None:
        cfg = cfg.with_overrides(n=args.n)
    return cfg


def _options(cfg: RunConfig, args=None) -> SolveOptions:
    o = cfg.options
    tol = getattr(args, "tol", None) or o.get("tol", 1e-9)
    return SolveOptions(tol=float(tol), max_iter=int(o.get("max_iter", 200)), gauge=float(o.get("gauge", 0.0)))


def _certify(built):
    try:
        return certify(built.problem, built.ops, built.eigen)
    except WrongCertificateError as exc:
        return exc


def run_check(cfg: RunConfig, out=None) -> int:
    built = build_problem(cfg)
    report = certify(built.problem, built.ops, built.eigen)
    payload = {"name": cfg.name, **report.to_dict(), "summary": report.summary_line()}
    _emit(payload, out)
    return report.exit_code


def write_solution_csv(path, mesh, u):
    bflag = np.zeros(mesh.n_nodes, dtype=int)
    bflag[mesh.boundary_nodes] = 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x"] + (["y"] if mesh.dimension == 2 else []) + ["u", "boundary"])
        for k in range(mesh.n_nodes):
            row = [k, repr(float(mesh.coords[k, 0]))]
            if mesh.dimension == 2:
                row.append(repr(float(mesh.coords[k, 1])))
            w.writerow(row + [repr(float(u[k])), int(bflag[k])])


def run_solve(cfg: RunConfig, out=None, report_path=None, force=False, tol=None):
    """Certify, solve, audit; returns (exit code, payload dict)."""
    built = build_problem(cfg)
    problem, ops = built.problem, built.ops
    cert = _certify(built)
    payload = {"name": cfg.name}
    if isinstance(cert, Exception):
        payload["certificate"] = {"error": str(cert)}
    else:
        payload["certificate"] = cert.to_dict()
        if cert.verdict == INFEASIBLE and not force:
            payload["solve"] = {"status": "skipped", "reason": "certificate says infeasible; use --force"}
            _emit(payload, report_path)
            return EXIT_CODES[INFEASIBLE], payload
    opts = _options(cfg)
    if tol is not None:
        opts = SolveOptions(tol=tol, max_iter=opts.max_iter, gauge=opts.gauge)
    outcome = solve(problem, ops, opts)
    payload["solve"] = outcome.to_dict()
    if outcome.status == CONVERGED:
        audit = necessity_audit(problem, outcome.U, ops, built.eigen)
        payload["audit"] = {"passed": audit.passed, "identity_lhs": audit.identity_lhs,
                            "identity_rhs": audit.identity_rhs, "identity_error": audit.identity_error}
        exact = exact_nodal(cfg, problem.mesh)
        if exact is not None:
            payload["max_error"] = float(np.abs(outcome.U.interior - exact).max())
        if out:
            write_solution_csv(out, problem.mesh, outcome.U.interior)
        code = EXIT_OK
    elif outcome.status == DIVERGED:
        payload["drift"] = {"rate": outcome.drift_rate, "null_component": outcome.null_trace[-1],
                            "total_load": integrate_mu(problem.load, problem.mesh)}
        code = EXIT_CODES[INFEASIBLE]
    else:
        code = EXIT_MAX_ITER
    _emit(payload, report_path)
    return code, payload


def run_eigen(cfg: RunConfig, out=None, report_path=None) -> dict:
    built = build_problem(cfg)
    eig = smallest_eigenpair(built.ops)
    payload = {"name": cfg.name, "n_unknowns": built.ops.K.shape[0], **eig.to_dict()}
    if cfg.reference_eigenvalue is not None:
        payload["reference_eigenvalue"] = cfg.reference_eigenvalue
        payload["error"] = abs(eig.eigenvalue - cfg.reference_eigenvalue)
    if out:
        write_eigen_csv(out, eig)
    _emit(payload, report_path)
    return payload


def run_halfspace(lam, b, c, q, zetas, g_hat=1.0, f_expr=None, out=None, report_path=None) -> dict:
    f = None
    if f_expr:
        expr = compile_expression(f_expr)
        f = lambda z: expr(z=z)  # noqa: E731
    sweep = [FrequencyProblem(float(zt), lam, b, c, q, f, g_hat) for zt in zetas]
    rows = []
    for fp in sweep:
        sol = solve_frequency(fp)
        nr = norm_ratio(sol)
        rows.append({"zeta": fp.zeta, "k": fp.k, "symbol": sol.p, "C": sol.C, "u0": float(sol.u[0]),
                     "solution_norm": nr.solution_norm, "data_norm": nr.data_norm, "ratio": nr.ratio,
                     "growing_mode": sol.growing_mode(), "boundary_residual": sol.boundary_residual()})
    est = estimate_constants(sweep)
    if out:
        with open(out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(float(v)) for k, v in r.items()})
    payload = {"lambda": lam, "b": b, "c": c, "q": q, "C_low": est.C_low, "C_high": est.C_high,
               "spread": est.spread, "min_symbol_over_lambda": min(boundary_symbol(fp) for fp in sweep) / lam,
               "n_frequencies": len(sweep)}
    _emit(payload, report_path)
    return payload


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("WENTZELL_THREADS", "1")))
    except ValueError:
        return 1


def sweep_rows(cfg: RunConfig, parameter: str, values, total: bool = False, with_solve: bool = False):
    """One row per parameter value; see ``run_sweep``."""
    values = [float(v) for v in values]
    if parameter == "load-scale":
        built = build_problem(cfg)
        base = built.problem
        T0 = integrate_mu(base.load, base.mesh)
        if total and T0 == 0.0:
            raise ConfigError("cannot sweep totals: the base load has zero aggregate")

        def row(v):
            scale = v / T0 if total else v
            problem = base.with_load(base.load * scale)
            rep = certify(problem, built.ops, built.eigen)
            r = {"value": v, "scale": scale, "total_load": T0 * scale, "tested_value": rep.tested_value,
                 "verdict": rep.verdict, "exit_code": rep.exit_code}
            if with_solve:
                o = solve(problem, built.ops, _options(cfg))
                r.update(status=o.status, residual=o.residual, energy=o.energy_trace[-1])
            return r
    elif parameter in ("q", "grid-n"):
        def row(v):
            c = cfg.with_overrides(q=v) if parameter == "q" else cfg.with_overrides(n=int(v))
            built = build_problem(c, need_eigen=True)
            eig = built.eigen
            mesh = built.problem.mesh
            h = mesh.h if mesh.dimension == 1 else max(mesh.h)
            r = {"value": v, "h": h, "eigenvalue": eig.eigenvalue, "second": eig.second,
                 "z_min": float(eig.nodal.min())}
            if c.reference_eigenvalue is not None:
                r["error"] = abs(eig.eigenvalue - c.reference_eigenvalue)
            try:
                r["verdict"] = certify(built.problem, built.ops, eig).verdict
            except WentzellError as exc:
                r["verdict"] = f"n/a ({type(exc).__name__})"
            if with_solve:
                o = solve(built.problem, built.ops, _options(c))
                r.update(status=o.status, residual=o.residual, energy=o.energy_trace[-1])
                ex = exact_nodal(c, mesh)
                if ex is not None and o.converged:
                    r["max_error"] = float(np.abs(o.U.interior - ex).max())
            return r
    else:
        raise ConfigError(f"unknown sweep parameter {parameter!r}")
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(row, values))
    if parameter == "grid-n" and rows and "error" in rows[0]:
        for prev, cur in zip(rows, rows[1:]):
            cur["observed_order"] = observed_order(prev["h"], prev["error"], cur["h"], cur["error"])
    return rows


def observed_order(h1, e1, h2, e2) -> float:
    if e1 <= 0 or e2 <= 0:
        return math.nan
    return math.log(e1 / e2) / math.log(h1 / h2)


def run_sweep(cfg: RunConfig, parameter: str, values, out=None, total=False, with_solve=False):
    rows = sweep_rows(cfg, parameter, values, total, with_solve)
    fields = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    lines = [",".join(fields)]
    for r in rows:
        lines.append(",".join(_cell(r.get(k, "")) for k in fields))
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return rows


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_values(spec: str):
    parts = spec.split(":")
    if len(parts) == 3:
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("sweep step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(v) for v in spec.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wentzell", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_source(p):
        p.add_argument("--config", help="problem JSON file")
        p.add_argument("--preset", help=f"built-in problem ({', '.join(preset_names())})")
        p.add_argument("--n", type=int, help="override the grid resolution")

    p = sub.add_parser("check", help="solvability certificate; exit 0/2/3 by verdict")
    add_source(p)
    p.add_argument("--out", help="write the JSON report here as well")

    p = sub.add_parser("solve", help="certify, solve and audit; writes a solution CSV")
    add_source(p)
    p.add_argument("--out", help="solution CSV path")
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--force", action="store_true", help="solve even when the certificate says infeasible")
    p.add_argument("--tol", type=float, help="residual tolerance (default from config, 1e-9)")

    p = sub.add_parser("eigen", help="smallest eigenpair of the linear operator")
    add_source(p)
    p.add_argument("--out", help="eigenvector CSV path")
    p.add_argument("--report", help="JSON report path")

    p = sub.add_parser("halfspace", help="per-frequency half-space sweep")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--zeta", default="0:100:64", help="start:stop:count")
    p.add_argument("--g", type=float, default=1.0, help="boundary datum")
    p.add_argument("--f", help="interior datum as an expression in z")
    p.add_argument("--out", help="CSV path")
    p.add_argument("--report", help="JSON report path")

    p = sub.add_parser("sweep", help="parameter sweep (load-scale | q | grid-n)")
    add_source(p)
    p.add_argument("--param", required=True, choices=["load-scale", "q", "grid-n"])
    p.add_argument("--values", required=True, help="start:stop:step or a comma list")
    p.add_argument("--total", action="store_true", help="load-scale values are target aggregate loads")
    p.add_argument("--solve", action="store_true", help="also run the solver at each value")
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return run_check(_config(args), args.out)
        if args.command == "solve":
            return run_solve(_config(args), args.out, args.report, args.force, args.tol)[0]
        if args.command == "eigen":
            run_eigen(_config(args), args.out, args.report)
            return EXIT_OK
        if args.command == "halfspace":
            run_halfspace(args.lam, args.b, args.c, args.q, zeta_range(args.zeta), args.g, args.f,
                          args.out, args.report)
            return EXIT_OK
        if args.command == "sweep":
            run_sweep(_config(args), args.param, _parse_values(args.values), args.out, args.total, args.solve)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WentzellError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
