"""Forward conservative sweep for the producer density."""

from __future__ import annotations

import numpy as np

from . import kernels
from .core import Grid, ModelParams, gradient, sample_profiles
from .model import drift_G


class FPStepError(RuntimeError):
    def __init__(self, message, time_index=None):
        super().__init__(message)
        self.time_index = time_index


def fp_step(m_curr, G_vec, params: ModelParams, grid: Grid):
    """Implicit upwind finite-volume step.

    Node ``i`` owns the cell ``[x_i - dx/2, x_i + dx/2]`` (half cell at ``x = L``),
    so the trapezoid mass changes only through the flux at the first interface.
    """
    m_curr = np.ascontiguousarray(m_curr, dtype=float)
    G_vec = np.ascontiguousarray(G_vec, dtype=float)
    m, status = kernels.fp_step_kernel(m_curr, G_vec, grid.dt, grid.dx, 0.5 * params.sigma**2)
    if status != kernels.FP_OK:
        raise FPStepError("singular Fokker-Planck system")
    return m


def boundary_flux(m, G_vec, params: ModelParams, grid: Grid) -> float:
    """Rightward flux through the first interface; minus the mass loss rate."""
    D = 0.5 * params.sigma**2 / grid.dx
    v = -0.5 * (G_vec[0] + G_vec[1])
    return -D * (m[1] - m[0]) + max(v, 0.0) * m[0] + min(v, 0.0) * m[1]


def fp_sweep(m_init, G, params: ModelParams, grid: Grid) -> np.ndarray:
    """Forward sweep with an explicit nodal drift field ``G`` (slice n+1 drives step n -> n+1)."""
    m_init = np.ascontiguousarray(m_init, dtype=float)
    G = np.ascontiguousarray(np.broadcast_to(G, grid.shape), dtype=float)
    M, fail = kernels.fp_sweep(m_init, G, grid.dt, grid.dx, 0.5 * params.sigma**2)
    if fail >= 0:
        raise FPStepError(f"singular Fokker-Planck system at time node {fail}", fail)
    return M


def drift_field(u, f, grid: Grid, tau=1.0) -> np.ndarray:
    return tau * drift_G(np.asarray(f)[:, None], gradient(u, grid.dx))


def solve_fp(u, f, params: ModelParams, grid: Grid, tau=1.0, m_init=None) -> np.ndarray:
    """Density driven by the optimal extraction drift of ``u``; starts from ``tau * m0``."""
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    if u.shape != grid.shape or f.shape != (grid.Nt + 1,):
        raise ValueError("u and f must live on the grid")
    if m_init is None:
        m_init = tau * sample_profiles(params, grid)[0]
    return fp_sweep(m_init, drift_field(u, f, grid, tau), params, grid)


def fp_residual(m, G, params: ModelParams, grid: Grid) -> np.ndarray:
    """Residual ``A(G_{n+1}) m_{n+1} - m_n`` of each forward step (``Nt`` rows, boundary row 0 is ``m_{n+1}(0)``)."""
    m = np.asarray(m, dtype=float)
    G = np.broadcast_to(np.asarray(G, dtype=float), grid.shape)
    out = np.empty((grid.Nt, grid.Nx + 1))
    for n in range(grid.Nt):
        a, b, c = kernels._fp_assemble_np(np.ascontiguousarray(G[n + 1]), grid.dt, grid.dx,
                                          0.5 * params.sigma**2)
        y = m[n + 1]
        Ay = b * y
        Ay[1:] += a[1:] * y[:-1]
        Ay[:-1] += c[:-1] * y[1:]
        rhs = m[n].copy()
        rhs[0] = 0.0
        out[n] = Ay - rhs
    return out
