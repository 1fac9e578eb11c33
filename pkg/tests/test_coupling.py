from dataclasses import replace

import numpy as np
import pytest

from bertrand_mfg import (
    Discretization,
    ModelParams,
    continuation_solve,
    picard_solve,
    uniqueness_experiment,
)
from bertrand_mfg.core import trapezoid
from bertrand_mfg.fp import drift_field, fp_residual
from bertrand_mfg.hjb import hjb_residual

SMALL = Discretization(Nx=50, Nt=100)


def test_no_competition_converges_at_second_pass():
    sol = picard_solve(ModelParams(epsilon=0.0), SMALL)
    assert sol.converged and sol.iterations <= 2
    assert sol.residual_history[-1] == 0.0
    assert np.all(sol.f == 1.0)


def test_tau_zero_is_the_zero_solution():
    sol = picard_solve(ModelParams(), SMALL, tau=0.0)
    assert sol.converged and sol.iterations == 1
    assert np.all(sol.u == 0.0) and np.all(sol.m == 0.0)


def test_default_problem_converges(default_solution):
    sol = default_solution
    assert sol.converged
    assert sol.iterations <= 200
    assert sol.residual_history[-1] <= 1e-8


def test_converged_paths_are_consistent(default_solution):
    sol = default_solution
    g = sol.grid
    np.testing.assert_allclose(sol.eta, trapezoid(sol.m, g.dx), atol=0)
    assert sol.eta[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(sol.eta) <= 1e-14)


def test_converged_solution_solves_the_discrete_system(coarse_solution):
    """Both sweeps re-evaluated with the output paths leave residuals of picard_tol size."""
    sol = coarse_solution
    p, g = sol.params, sol.grid
    tol = 10.0 * SMALL.picard_tol
    assert np.max(np.abs(hjb_residual(sol.u, sol.f, p, g))) <= tol
    assert np.max(np.abs(fp_residual(sol.m, drift_field(sol.u, sol.f, g), p, g))) <= tol


def test_continuation_schedules_agree():
    p = ModelParams()
    one = continuation_solve(p, SMALL)
    two = continuation_solve(p, replace(SMALL, continuation=(0.0, 1.0)))
    assert one.converged and two.converged
    assert len(two.stage_iterations) == 2 and two.stage_iterations[0] == 1
    assert np.max(np.abs(one.u - two.u)) <= 1e-6
    assert np.max(np.abs(one.m - two.m)) <= 1e-6


def test_continuation_not_worse_than_cold_start_for_strong_competition():
    p = ModelParams(epsilon=5.0)
    cold = picard_solve(p, SMALL)
    warm = continuation_solve(p, replace(SMALL, continuation=(0.25, 0.5, 0.75, 1.0)))
    assert warm.converged
    if cold.converged:
        assert warm.stage_iterations[-1] <= cold.iterations
        assert np.max(np.abs(warm.u - cold.u)) <= 1e-6


def test_uniqueness_for_weak_competition():
    rep = uniqueness_experiment(ModelParams(epsilon=0.1), SMALL, 0.0, 1.0)
    assert rep.converged_a and rep.converged_b
    assert rep.gap_u <= 1e-6 and rep.gap_m <= 1e-6


def test_solve_is_deterministic():
    a = picard_solve(ModelParams(), SMALL)
    b = picard_solve(ModelParams(), SMALL)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.m, b.m)
    assert a.residual_history == b.residual_history


def test_iteration_cap_reports_non_convergence():
    sol = picard_solve(ModelParams(), replace(SMALL, picard_max=3))
    assert not sol.converged
    assert sol.iterations == 3
    assert sol.residual_history[-1] > SMALL.picard_tol


def test_rejects_bad_tau_and_initial_guess():
    with pytest.raises(ValueError):
        picard_solve(ModelParams(), SMALL, tau=1.5)
    with pytest.raises(ValueError):
        picard_solve(ModelParams(), SMALL, Q_init=np.nan)
