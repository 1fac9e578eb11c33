"""Closed-form reference problems for order-of-accuracy studies.

* Value function: ``u = phi(t) sin(k x)`` with ``k = pi / (2L)`` and a source
  term that makes it an exact solution of the HJB equation with a chosen
  intercept path. ``phi = T - t`` has no time truncation error under backward
  Euler, so it isolates the spatial error; ``phi = sin(T - t)`` exercises the
  time stepping.
* Density: the pure-diffusion eigenmode ``exp(-sigma^2 k^2 t / 2) sin(k x)``,
  which satisfies the absorbing condition at 0 and zero flux at L.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Discretization, Grid, ModelParams
from .fp import fp_sweep
from .hjb import solve_hjb


def _phi(kind, t, T):
    if kind == "linear":
        return T - t, -np.ones_like(t)
    if kind == "sine":
        return np.sin(T - t), -np.cos(T - t)
    raise ValueError(f"unknown manufactured solution {kind!r}")


def manufactured_intercept(grid: Grid) -> np.ndarray:
    return 1.0 + 0.25 * grid.t / grid.T


def manufactured_hjb(params: ModelParams, grid: Grid, kind="linear"):
    """Return ``(u_exact, source, f)`` on ``grid``."""
    k = math.pi / (2.0 * grid.L)
    t = grid.t[:, None]
    x = grid.x[None, :]
    phi, dphi = _phi(kind, t, grid.T)
    s, c = np.sin(k * x), np.cos(k * x)
    f = manufactured_intercept(grid)
    u = phi * s
    ut = dphi * s
    ux = phi * k * c
    uxx = -phi * k**2 * s
    source = -(ut + 0.5 * params.sigma**2 * uxx - params.r * u + 0.25 * (f[:, None] - ux) ** 2)
    return u, source, f


def hjb_mms_error(params: ModelParams, Nx: int, Nt: int, kind="linear") -> float:
    grid = Grid(params.L, params.T, Nx, Nt)
    u_ex, src, f = manufactured_hjb(params, grid, kind)
    u = solve_hjb(f, params, grid, source=src, u_terminal=u_ex[-1], disc=Discretization(Nx=Nx, Nt=Nt))
    return float(np.max(np.abs(u - u_ex)))


def fp_eigen_exact(params: ModelParams, grid: Grid) -> np.ndarray:
    k = math.pi / (2.0 * grid.L)
    lam = 0.5 * params.sigma**2 * k**2
    return np.exp(-lam * grid.t)[:, None] * np.sin(k * grid.x)[None, :]


def fp_eigen_run(params: ModelParams, Nx: int, Nt: int):
    """Pure-diffusion sweep from ``sin(k x)``; returns ``(grid, m, m_exact)``."""
    grid = Grid(params.L, params.T, Nx, Nt)
    exact = fp_eigen_exact(params, grid)
    m = fp_sweep(exact[0], np.zeros(grid.shape), params, grid)
    return grid, m, exact


def fp_eigen_error(params: ModelParams, Nx: int, Nt: int) -> float:
    _, m, exact = fp_eigen_run(params, Nx, Nt)
    return float(np.max(np.abs(m - exact)))


def observed_orders(errors) -> list:
    e = np.asarray(errors, dtype=float)
    return [float(v) for v in np.log2(e[:-1] / e[1:])]
