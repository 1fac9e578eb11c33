"""Command line entry point: ``bertrand-mfg {solve,audit,sweep,convergence}``.

Exit status: 0 converged and every audit check passed, 1 not converged,
2 configuration or I/O error, 3 converged but an audit check failed.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import kernels
from .audit import audit_all, refinement_ratios
from .config import RunOptions, load_config
from .core import ConfigurationError, Discretization, Grid, ModelParams, gradient
from .coupling import CouplingError, Solution, continuation_solve, picard_solve
from .io import read_field, write_field, write_json, write_paths
from .verification import fp_eigen_error, hjb_mms_error, observed_orders

log = logging.getLogger("bertrand_mfg")

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_ERROR = 2
EXIT_AUDIT_FAILED = 3


def exit_status(converged: bool, audit_passed: bool, error: bool = False) -> int:
    if error:
        return EXIT_ERROR
    if not converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK if audit_passed else EXIT_AUDIT_FAILED


def _params_dict(params: ModelParams) -> dict:
    d = {}
    for k, v in asdict(params).items():
        if isinstance(v, np.ndarray):
            v = "<sampled>"
        elif callable(v):
            v = getattr(v, "__name__", "<callable>")
        d[k] = v
    return d


def _prepare_out(out) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot use output directory {out}: {exc}") from None
    if not out.is_dir():
        raise OSError(f"output path {out} is not a directory")
    return out


def write_solution(sol: Solution, out) -> None:
    out = Path(out)
    write_field(out / "u.csv", sol.u, sol.grid)
    write_field(out / "m.csv", sol.m, sol.grid)
    write_paths(out / "paths.csv", sol.grid, sol.eta, sol.Q, sol.f, sol.pbar)


def run_solve(params: ModelParams, disc: Discretization, opts: RunOptions, out) -> int:
    out = _prepare_out(out)
    if opts.q_init != 0.0 and disc.continuation != (1.0,):
        log.info("q_init only seeds single-stage runs; the continuation starts from Q = 0")
    if disc.continuation == (1.0,):
        sol = picard_solve(params, disc, Q_init=opts.q_init)
    else:
        sol = continuation_solve(params, disc)
    report = audit_all(sol, allow_unconverged=True)
    status = exit_status(sol.converged, report.passed)
    write_solution(sol, out)
    write_json(out / "report.json", {
        "converged": sol.converged,
        "iterations": sol.iterations,
        "stage_iterations": sol.stage_iterations,
        "tau_final": sol.tau_final,
        "residual_history": sol.residual_history,
        "exit_status": status,
        "backend": kernels.BACKEND,
        "params": _params_dict(params),
        "discretization": asdict(disc),
        "audit": report.as_dict(),
    })
    log.info("converged=%s iterations=%d audit=%s", sol.converged, sol.iterations,
             "pass" if report.passed else "FAIL " + ",".join(report.failed()))
    return status


def run_audit(params: ModelParams, u_path, m_path, out=None) -> int:
    """Audit externally produced fields laid out like ``u.csv``/``m.csv``."""
    t_u, x_u, u = read_field(u_path)
    t_m, x_m, m = read_field(m_path)
    if u.shape != m.shape or not (np.array_equal(t_u, t_m) and np.array_equal(x_u, x_m)):
        raise ValueError("u and m files are on different grids")
    Nt, Nx = u.shape[0] - 1, u.shape[1] - 1
    grid = Grid(params.L, params.T, Nx, Nt)
    if not (np.allclose(grid.x, x_u, rtol=0, atol=1e-12 * params.L)
            and np.allclose(grid.t, t_u, rtol=0, atol=1e-12 * params.T)):
        raise ValueError("field coordinates do not form the uniform grid implied by L and T")
    sol = Solution.from_fields(u, m, params, grid)
    report = audit_all(sol)
    for r in report.records:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} {r.detail}".rstrip())
    if out is not None:
        write_json(_prepare_out(out) / "audit.json", report.as_dict())
    return exit_status(True, report.passed)


def _sweep_row(args):
    params, disc, opts, name, value = args
    row = {"value": value, "converged": "", "iterations": "", "eta_T": "", "max_f": "",
           "max_ux": "", "uniqueness_gap": "", "error": ""}
    try:
        p = replace(params, **{name: value})
        sol = picard_solve(p, disc, Q_init=opts.q_init)
        row.update(converged=sol.converged, iterations=sol.iterations, eta_T=float(sol.eta[-1]),
                   max_f=float(np.max(sol.f)),
                   max_ux=float(np.max(gradient(sol.u, sol.grid.dx))))
        if opts.uniqueness:
            other = picard_solve(p, disc, Q_init=opts.q_init_b)
            row["uniqueness_gap"] = float(max(np.max(np.abs(sol.u - other.u)),
                                              np.max(np.abs(sol.m - other.m))))
    except (ConfigurationError, CouplingError, ValueError) as exc:
        row["error"] = str(exc)
    return row


def run_sweep(params: ModelParams, disc: Discretization, opts: RunOptions, name: str,
              values, out, jobs: int = 1) -> list:
    if name not in ("epsilon", "sigma"):
        raise ConfigurationError(f"sweep parameter must be epsilon or sigma, got {name!r}")
    out = _prepare_out(out)
    tasks = [(params, disc, opts, name, float(v)) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    fields = ["value", "converged", "iterations", "eta_T", "max_f", "max_ux", "uniqueness_gap", "error"]
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in row.items()})
    return rows


def run_convergence(params: ModelParams, disc: Discretization, levels: int, out) -> dict:
    """Observed orders on ``levels`` dyadic refinements of ``(Nx, Nt)``."""
    if levels < 2:
        raise ConfigurationError("convergence needs at least 2 levels")
    out = _prepare_out(out)
    sizes = [(disc.Nx * 2**j, disc.Nt * 2**j) for j in range(levels)]

    hjb_space = [hjb_mms_error(params, nx, disc.Nt, "linear") for nx, _ in sizes]
    hjb_time = [hjb_mms_error(params, nx, nt, "sine") for nx, nt in sizes]
    # dt shrinks like dx^2 so the eigenmode error is purely second order
    fp_space = [fp_eigen_error(params, nx, disc.Nt * 4**j) for j, (nx, _) in enumerate(sizes)]

    reports, coupled = [], []
    for nx, nt in sizes:
        sol = picard_solve(params, replace(disc, Nx=nx, Nt=nt, continuation=(1.0,)))
        rep = audit_all(sol, allow_unconverged=True)
        reports.append(rep)
        coupled.append({
            "Nx": nx, "Nt": nt, "converged": sol.converged, "iterations": sol.iterations,
            "energy_residual": rep["energy"].measured["residual"],
            "nonlocal_residual_l1": rep["nonlocal"].measured["identity_residual_l1"],
            "nonlocal_residual_sup": rep["nonlocal"].measured["identity_residual_sup"],
            "max_abs_Q": rep["nonlocal"].measured["max_abs_Q"],
            "max_abs_f": rep["nonlocal"].measured["max_abs_f"],
            "entropy": rep["entropy"].measured["int_mx2_over_m1"],
            "max_ux": rep["gradient_bound"].measured["max_ux"],
        })
    result = {
        "levels": [{"Nx": nx, "Nt": nt} for nx, nt in sizes],
        "hjb_manufactured_space": {"Nt": disc.Nt, "errors": hjb_space,
                                   "orders": observed_orders(hjb_space)},
        "hjb_manufactured_time": {"errors": hjb_time, "orders": observed_orders(hjb_time)},
        "fp_eigenfunction_space": {"Nt": [disc.Nt * 4**j for j in range(levels)],
                                   "errors": fp_space, "orders": observed_orders(fp_space)},
        "energy_identity": {"residuals": [c["energy_residual"] for c in coupled],
                            "orders": observed_orders([c["energy_residual"] for c in coupled])},
        "nonlocal_identity": {
            "residuals_l1": [c["nonlocal_residual_l1"] for c in coupled],
            "orders_l1": observed_orders([c["nonlocal_residual_l1"] for c in coupled]),
            "residuals_sup": [c["nonlocal_residual_sup"] for c in coupled],
            "orders_sup": observed_orders([c["nonlocal_residual_sup"] for c in coupled]),
        },
        "refinement": [refinement_ratios(a, b) for a, b in zip(reports, reports[1:])],
        "coupled_runs": coupled,
    }
    write_json(out / "orders.json", result)
    return result


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bertrand-mfg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the coupled system and audit the result")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("audit", help="audit u.csv/m.csv produced elsewhere")
    p.add_argument("u_csv", type=Path)
    p.add_argument("m_csv", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("sweep", help="one solve per parameter value")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--param", choices=("epsilon", "sigma"), required=True)
    p.add_argument("--values", required=True, help="comma-separated list")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("convergence", help="observed orders under dyadic refinement")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--levels", type=int, default=3)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        params, disc, opts = load_config(args.config)
        if args.command == "solve":
            return run_solve(params, disc, opts, args.out)
        if args.command == "audit":
            return run_audit(params, args.u_csv, args.m_csv, args.out)
        if args.command == "sweep":
            try:
                values = [float(v) for v in args.values.split(",") if v.strip()]
            except ValueError:
                raise ConfigurationError(f"--values: not a list of numbers: {args.values!r}") from None
            rows = run_sweep(params, disc, opts, args.param, values, args.out, args.jobs)
            for row in rows:
                print(row)
            return EXIT_OK
        if args.command == "convergence":
            result = run_convergence(params, disc, args.levels, args.out)
            print(f"hjb space orders {result['hjb_manufactured_space']['orders']}")
            print(f"hjb time orders {result['hjb_manufactured_time']['orders']}")
            print(f"fp space orders {result['fp_eigenfunction_space']['orders']}")
            return EXIT_OK
    except (ConfigurationError, OSError, ValueError, CouplingError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
