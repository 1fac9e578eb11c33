"""Acceptance criteria, one test per criterion; each prints a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from bertrand_mfg import Discretization, ModelParams, audit_all, picard_solve, uniqueness_experiment
from bertrand_mfg.audit import refinement_ratios
from bertrand_mfg.cli import run_solve
from bertrand_mfg.config import RunOptions
from bertrand_mfg.core import Grid
from bertrand_mfg.fp import fp_sweep
from bertrand_mfg.verification import hjb_mms_error, manufactured_hjb, observed_orders

DEFAULT = Discretization()


@pytest.fixture
def report_line(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        return ok

    return emit


@pytest.fixture(scope="module")
def refined_solution(default_params):
    return picard_solve(default_params, DEFAULT.refined(2))


def test_criterion_1_decoupled_case(report_line):
    picard_solve(ModelParams(epsilon=0.0), Discretization(Nx=32, Nt=4))  # compile outside the timer
    start = time.perf_counter()
    sol = picard_solve(ModelParams(epsilon=0.0), DEFAULT)
    elapsed = time.perf_counter() - start
    ok = (sol.converged and sol.residual_history[-1] <= 1e-10 and sol.iterations <= 2
          and np.all(sol.f == 1.0) and elapsed <= 5.0)
    report_line(1, "eps=0 decoupling", ok,
                f"iterations={sol.iterations} residual={sol.residual_history[-1]:.1e} "
                f"max|f-1|={np.max(np.abs(sol.f - 1.0)):.1e} time={elapsed:.2f}s")
    assert ok


def test_criterion_2_fp_eigenmode(report_line):
    p = ModelParams()
    k = math.pi / (2 * p.L)
    lam = p.sigma**2 * math.pi**2 / (8 * p.L**2)

    def error(nx, nt):
        g = Grid(p.L, p.T, nx, nt)
        m0 = np.sin(k * g.x)
        exact = np.exp(-lam * g.t)[:, None] * m0[None, :]
        m = fp_sweep(m0, np.zeros(g.shape), p, g)
        return float(np.max(np.abs(m - exact))), g, float(np.max(np.abs(m0)))

    err, g, m0_max = error(DEFAULT.Nx, DEFAULT.Nt)
    bound = 5.0 * (g.dt + g.dx**2) * m0_max
    # dt shrinks like dx^2 so each level isolates the spatial error
    errs = [error(25 * 2**j, 50 * 4**j)[0] for j in range(4)]
    orders = observed_orders(errs)
    ok = err <= bound and min(orders) >= 1.8
    report_line(2, "Fokker-Planck eigenmode", ok,
                f"error={err:.2e} (bound {bound:.2e}) spatial orders={[round(o, 3) for o in orders]}")
    assert ok


def test_criterion_3_hjb_manufactured(report_line):
    p = ModelParams()
    lines, ok = [], True
    for kind in ("linear", "sine"):
        g = Grid(p.L, p.T, DEFAULT.Nx, DEFAULT.Nt)
        u_ex = manufactured_hjb(p, g, kind)[0]
        err = hjb_mms_error(p, DEFAULT.Nx, DEFAULT.Nt, kind)
        bound = 5.0 * (g.dt + g.dx**2) * float(np.max(np.abs(u_ex)))
        ok &= err <= bound
        lines.append(f"{kind}: error={err:.2e} (bound {bound:.2e})")
    errs = [hjb_mms_error(p, DEFAULT.Nx, nt, "sine") for nt in (25, 50, 100, 200)]
    orders = observed_orders(errs)
    ok &= min(orders) >= 0.9
    report_line(3, "HJB manufactured solution", ok,
                "; ".join(lines) + f"; temporal orders={[round(o, 3) for o in orders]}")
    assert ok


def test_criterion_4_invariants(report_line, default_solution):
    rep = audit_all(default_solution)
    names = ("positivity", "mass", "signs")
    ok = all(rep[n].passed for n in names)
    pos, mass, signs = (rep[n].measured for n in names)
    report_line(4, "invariant suite on the default run", ok,
                f"min m={pos['min_m']:.1e} min u={pos['min_u']:.1e} eta0-1={mass['eta0'] - 1:.1e} "
                f"max eta rise={mass['max_rise']:.1e} min u_x={signs['min_ux']:.1e} "
                f"min m_x(.,0)={signs['min_mx0']:.1e} max u_xx(.,L)={signs['max_uxxL']:.1e}")
    assert ok


def test_criterion_5_energy_bound(report_line, default_solution):
    sol = default_solution
    eps, T = sol.params.epsilon, sol.params.T
    bound = (2 + eps) * (1 + eps) * T + 4 * (2 + eps) * float(np.max(sol.u[-1]))
    value = audit_all(sol)["energy"].measured["m_ux2"]
    ok = value <= bound
    report_line(5, "explicit energy bound", ok, f"int m u_x^2={value:.4f} <= {bound:.4f}")
    assert ok


def test_criterion_6_identity_residual_decay(report_line, default_solution, refined_solution):
    ratios = refinement_ratios(audit_all(default_solution), audit_all(refined_solution))
    ok = ratios["energy_residual_ratio"] >= 1.5 and ratios["nonlocal_residual_l1_ratio"] >= 1.5
    report_line(6, "identity residual decay", ok,
                f"energy ratio={ratios['energy_residual_ratio']:.3f} "
                f"nonlocal ratio (L1 in time)={ratios['nonlocal_residual_l1_ratio']:.3f} "
                f"(sup in time {ratios['nonlocal_residual_ratio']:.3f}, recorded)")
    assert ok


def test_criterion_7_nonlocal_boundedness(report_line, default_solution, refined_solution):
    ratios = refinement_ratios(audit_all(default_solution), audit_all(refined_solution))
    ok = ratios["max_Q_change"] <= 0.10 and ratios["max_f_change"] <= 0.10
    report_line(7, "nonlocal boundedness under refinement", ok,
                f"max|Q| change={ratios['max_Q_change']:.2e} max|f| change={ratios['max_f_change']:.2e}")
    assert ok


def test_criterion_8_uniqueness(report_line):
    start = time.perf_counter()
    rep = uniqueness_experiment(ModelParams(epsilon=0.1), DEFAULT, 0.0, 1.0)
    elapsed = time.perf_counter() - start
    ok = (rep.converged_a and rep.converged_b and rep.gap_u <= 1e-6 and rep.gap_m <= 1e-6
          and elapsed <= 30.0)
    report_line(8, "uniqueness at eps=0.1", ok,
                f"gap u={rep.gap_u:.1e} gap m={rep.gap_m:.1e} "
                f"iterations={rep.iterations_a},{rep.iterations_b} time={elapsed:.2f}s")
    assert ok


def test_criterion_9_determinism(report_line, tmp_path, default_params):
    for name in ("a", "b"):
        run_solve(default_params, DEFAULT, RunOptions(), tmp_path / name)
    same = {f: (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
            for f in ("u.csv", "m.csv", "paths.csv")}
    ok = all(same.values())
    report_line(9, "byte-identical repeated runs", ok, ", ".join(f"{k}={v}" for k, v in same.items()))
    assert ok
