"""Backward sweep for the value function with a frozen intercept path f(t)."""

from __future__ import annotations

import numpy as np

from . import kernels
from .core import Discretization, Grid, ModelParams, sample_profiles


class HJBStepError(RuntimeError):
    """Newton did not reach the tolerance; ``time_index`` is the slice being solved."""

    def __init__(self, message, residual, time_index=None):
        super().__init__(message)
        self.residual = residual
        self.time_index = time_index


_DEFAULT_DISC = Discretization()


def hjb_step(u_next, f_n, params: ModelParams, grid: Grid, source=None, tau=1.0,
             disc: Discretization = _DEFAULT_DISC):
    """Solve one implicit step from ``t_{n+1}`` back to ``t_n``.

    The discrete equation is
    ``(u_next - u)/dt + sigma^2/2 D2 u - r u + tau/4 (f_n - D1 u)^2 + source = 0``
    with ``u(0) = 0`` and a reflected ghost node at ``x = L``.
    """
    u_next = np.ascontiguousarray(u_next, dtype=float)
    if u_next.shape != (grid.Nx + 1,):
        raise ValueError("u_next does not match the grid")
    src = np.zeros_like(u_next) if source is None else np.ascontiguousarray(source, dtype=float)
    u, status, res, _ = kernels.hjb_step_kernel(
        u_next, float(f_n), float(tau), src, grid.dt, grid.dx,
        0.5 * params.sigma**2, params.r, disc.newton_tol, disc.newton_max,
    )
    if status != kernels.HJB_OK:
        raise HJBStepError(f"HJB Newton failed (residual {res:.3e})", res)
    return u


def solve_hjb(f, params: ModelParams, grid: Grid, tau=1.0, source=None, u_terminal=None,
              disc: Discretization = _DEFAULT_DISC) -> np.ndarray:
    """Full backward sweep; slice ``n`` uses ``f[n]`` and ``source[n]``.

    ``u_terminal`` defaults to ``tau * uT`` sampled on the grid. ``source`` may be
    an array of field shape or a callable ``(t, x) -> values``.
    """
    f = np.ascontiguousarray(f, dtype=float)
    if f.shape != (grid.Nt + 1,) or not np.all(np.isfinite(f)):
        raise ValueError("f must be a finite path on the time grid")
    if u_terminal is None:
        u_terminal = tau * sample_profiles(params, grid)[1]
    u_terminal = np.array(u_terminal, dtype=float)
    u_terminal[0] = 0.0
    if source is None:
        src, has_src = np.zeros((1, grid.Nx + 1)), False
    else:
        if callable(source):
            source = source(grid.t[:, None], grid.x[None, :])
        src = np.ascontiguousarray(np.broadcast_to(source, grid.shape), dtype=float)
        has_src = True
    U, fail, res = kernels.hjb_sweep(
        u_terminal, f, src, has_src, grid.dt, grid.dx, 0.5 * params.sigma**2,
        params.r, float(tau), disc.newton_tol, disc.newton_max,
    )
    if fail >= 0:
        raise HJBStepError(
            f"HJB Newton failed at time node {fail} (t={grid.t[fail]:.6g}, residual {res:.3e})",
            res, fail,
        )
    return U


def hjb_residual(u, f, params: ModelParams, grid: Grid, tau=1.0, source=None) -> np.ndarray:
    """Residual of the discrete equations satisfied by a backward sweep.

    Row ``n`` (``n < Nt``) is the step ``t_{n+1} -> t_n`` evaluated at ``u[n]``
    with the same stencil choice the solver makes; the result has ``Nt`` rows.
    """
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    s2h = 0.5 * params.sigma**2
    src = np.zeros(grid.shape) if source is None else np.broadcast_to(source, grid.shape)
    out = np.empty((grid.Nt, grid.Nx + 1))
    for n in range(grid.Nt):
        p = np.zeros(grid.Nx + 1)
        p[1:-1] = (u[n + 1, 2:] - u[n + 1, :-2]) / (2.0 * grid.dx)
        central = np.abs(0.5 * tau * (f[n] - p)) * grid.dx <= 2.0 * s2h
        F = kernels._hjb_assemble_np(u[n], u[n + 1], f[n], tau, np.ascontiguousarray(src[n]),
                                     grid.dt, grid.dx, s2h, params.r, central)[0]
        out[n] = F
    return out
