"""Damped fixed-point iteration on the coupling paths, with tau-continuation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Discretization, Grid, ModelParams, build_grid, sample_profiles
from .fp import FPStepError, solve_fp
from .hjb import HJBStepError, solve_hjb
from .model import coupling_paths, intercept_f

log = logging.getLogger(__name__)


class CouplingError(RuntimeError):
    """An inner solver failed during a fixed-point iteration."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True, eq=False)
class Solution:
    u: np.ndarray
    m: np.ndarray
    eta: np.ndarray
    Q: np.ndarray
    f: np.ndarray
    pbar: np.ndarray
    iterations: int
    residual_history: list
    tau_final: float
    converged: bool
    params: ModelParams
    grid: Grid
    stage_iterations: list = field(default_factory=list)

    @classmethod
    def from_fields(cls, u, m, params: ModelParams, grid: Grid, tau=1.0, **kw) -> "Solution":
        """Wrap externally computed fields; paths are recomputed from them."""
        u = np.asarray(u, dtype=float)
        m = np.asarray(m, dtype=float)
        if u.shape != grid.shape or m.shape != grid.shape:
            raise ValueError(f"fields must have shape {grid.shape}")
        paths = coupling_paths(u, m, grid, params.epsilon)
        kw.setdefault("iterations", 0)
        kw.setdefault("residual_history", [])
        kw.setdefault("converged", True)
        return cls(u=u, m=m, eta=paths.eta, Q=paths.Q, f=paths.f, pbar=paths.pbar,
                   tau_final=float(tau), params=params, grid=grid, **kw)


def picard_solve(params: ModelParams, disc: Discretization, Q_init=None, tau=1.0,
                 eta_init=None) -> Solution:
    """Iterate on ``(Q, eta)`` until successive map outputs agree to ``picard_tol``.

    Each pass freezes ``f = intercept_f(eta, Q)``, sweeps the value function back,
    sweeps the density forward and recomputes ``(eta, Q)``; the next input is the
    damped average of the old input and the new output. The residual is the
    sup over time of the change in ``|Q| + |eta|`` between consecutive outputs.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    grid = build_grid(params, disc)
    m0, uT = sample_profiles(params, grid)
    nt1 = grid.Nt + 1
    Q_in = np.zeros(nt1) if Q_init is None else np.array(np.broadcast_to(Q_init, (nt1,)), float)
    eta_in = np.full(nt1, tau) if eta_init is None else np.array(np.broadcast_to(eta_init, (nt1,)), float)
    if not (np.all(np.isfinite(Q_in)) and np.all(np.isfinite(eta_in))):
        raise ValueError("initial paths must be finite")
    eta_in = np.clip(eta_in, 0.0, 1.0)
    Q_prev, eta_prev = Q_in.copy(), eta_in.copy()
    theta = disc.damping
    history = []
    converged = False
    u = m = paths = None
    for k in range(1, disc.picard_max + 1):
        f_in = intercept_f(eta_in, Q_in, params.epsilon)
        try:
            u = solve_hjb(f_in, params, grid, tau=tau, u_terminal=tau * uT, disc=disc)
            m = solve_fp(u, f_in, params, grid, tau=tau, m_init=tau * m0)
        except (HJBStepError, FPStepError) as exc:
            raise CouplingError(f"iteration {k}: {exc}", k) from exc
        paths = coupling_paths(u, m, grid, params.epsilon)
        res = float(np.max(np.abs(paths.Q - Q_prev) + np.abs(paths.eta - eta_prev)))
        history.append(res)
        log.debug("picard tau=%g it=%d residual=%.3e", tau, k, res)
        if res <= disc.picard_tol or tau == 0.0:
            # tau = 0 is the trivial problem: the map is identically zero
            converged = True
            break
        Q_prev, eta_prev = paths.Q, paths.eta
        Q_in = (1.0 - theta) * Q_in + theta * paths.Q
        eta_in = np.clip((1.0 - theta) * eta_in + theta * paths.eta, 0.0, 1.0)
    if not converged:
        log.warning("picard did not converge at tau=%g: residual %.3e after %d iterations",
                    tau, history[-1], len(history))
    return Solution(u=u, m=m, eta=paths.eta, Q=paths.Q, f=paths.f, pbar=paths.pbar,
                    iterations=len(history), residual_history=history, tau_final=float(tau),
                    converged=converged, params=params, grid=grid,
                    stage_iterations=[len(history)])


def continuation_solve(params: ModelParams, disc: Discretization) -> Solution:
    """Run the tau schedule, warm-starting Q from the previous stage."""
    Q = None
    stages = []
    sol = None
    for tau in disc.continuation:
        sol = picard_solve(params, disc, Q_init=Q, tau=tau)
        stages.append(sol.iterations)
        if not sol.converged:
            break
        Q = sol.Q
    return replace(sol, stage_iterations=stages, iterations=sum(stages))


@dataclass(frozen=True)
class UniquenessReport:
    gap_u: float
    gap_m: float
    gap_Q: float
    converged_a: bool
    converged_b: bool
    iterations_a: int
    iterations_b: int

    def as_dict(self):
        return dict(self.__dict__)


def uniqueness_experiment(params: ModelParams, disc: Discretization, Q_init_a, Q_init_b,
                          tau=1.0) -> UniquenessReport:
    a = picard_solve(params, disc, Q_init=Q_init_a, tau=tau)
    b = picard_solve(params, disc, Q_init=Q_init_b, tau=tau)
    return UniquenessReport(
        gap_u=float(np.max(np.abs(a.u - b.u))),
        gap_m=float(np.max(np.abs(a.m - b.m))),
        gap_Q=float(np.max(np.abs(a.Q - b.Q))),
        converged_a=a.converged,
        converged_b=b.converged,
        iterations_a=a.iterations,
        iterations_b=b.iterations,
    )
