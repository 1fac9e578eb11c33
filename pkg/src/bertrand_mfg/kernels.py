"""Hot loops: tridiagonal solves, the HJB Newton step and the Fokker-Planck step.

Each kernel exists twice: a scalar-loop version compiled with numba and a
vectorised numpy/scipy version. ``hjb_sweep`` and ``fp_sweep`` dispatch on
``_accel.USE_NUMBA``; both back-ends are importable for cross-checks and the
benchmark in ``benchmarks/``.

Tridiagonal systems are stored as three length-n arrays ``(a, b, c)``:
row i reads ``a[i] x[i-1] + b[i] x[i] + c[i] x[i+1]``; ``a[0]`` and ``c[-1]`` are ignored.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from ._accel import USE_NUMBA, njit

HJB_OK = 0
HJB_NEWTON_FAILED = 1
FP_OK = 0
FP_SINGULAR = 1

_MIN_DAMPING = 1.0 / 1024.0
CLIP_NEGATIVE = 1e-14


# ---------------------------------------------------------------- numba path


@njit
def thomas(a, b, c, d):
    n = d.size
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = c[0] / b[0]
    dp[0] = d[0] / b[0]
    for i in range(1, n):
        den = b[i] - a[i] * cp[i - 1]
        cp[i] = c[i] / den if i < n - 1 else 0.0
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit
def _central_mask_nb(u_ref, f, tau, dx, sigma2):
    n = u_ref.size
    mask = np.zeros(n, dtype=np.bool_)
    for i in range(1, n - 1):
        p = (u_ref[i + 1] - u_ref[i - 1]) / (2.0 * dx)
        mask[i] = abs(0.5 * tau * (f - p)) * dx <= sigma2
    return mask


@njit
def _hjb_assemble_nb(u, u_next, f, tau, src, dt, dx, s2h, r, central, F, a, b, c):
    n = u.size
    N = n - 1
    idx2 = 1.0 / (dx * dx)
    F[0] = u[0]
    a[0] = 0.0
    b[0] = 1.0
    c[0] = 0.0
    res = abs(F[0])
    for i in range(1, N):
        d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * idx2
        if central[i]:
            g = f - (u[i + 1] - u[i - 1]) / (2.0 * dx)
            H = 0.25 * tau * g * g
            dm = 0.25 * tau * g / dx
            d0 = 0.0
            dp = -dm
        else:
            gm = f - (u[i] - u[i - 1]) / dx
            gp = f - (u[i + 1] - u[i]) / dx
            if gm < 0.0:
                gm = 0.0
            if gp > 0.0:
                gp = 0.0
            H = 0.25 * tau * (gm * gm + gp * gp)
            dm = 0.5 * tau * gm / dx
            d0 = 0.5 * tau * (gp - gm) / dx
            dp = -0.5 * tau * gp / dx
        F[i] = (u_next[i] - u[i]) / dt + s2h * d2 - r * u[i] + H + src[i]
        a[i] = s2h * idx2 + dm
        b[i] = -1.0 / dt - 2.0 * s2h * idx2 - r + d0
        c[i] = s2h * idx2 + dp
        if abs(F[i]) > res:
            res = abs(F[i])
    # ghost reflection u[N+1] = u[N-1]; the Neumann condition makes the gradient zero here
    d2 = 2.0 * (u[N - 1] - u[N]) * idx2
    F[N] = (u_next[N] - u[N]) / dt + s2h * d2 - r * u[N] + 0.25 * tau * f * f + src[N]
    a[N] = 2.0 * s2h * idx2
    b[N] = -1.0 / dt - 2.0 * s2h * idx2 - r
    c[N] = 0.0
    if abs(F[N]) > res:
        res = abs(F[N])
    return res


@njit
def hjb_step_nb(u_next, f, tau, src, dt, dx, s2h, r, tol, maxit):
    """One backward-Euler HJB step by damped Newton. Returns (u, status, residual, iterations)."""
    n = u_next.size
    central = _central_mask_nb(u_next, f, tau, dx, 2.0 * s2h)
    u = u_next.copy()
    u[0] = 0.0
    F = np.empty(n)
    a = np.empty(n)
    b = np.empty(n)
    c = np.empty(n)
    Ft = np.empty(n)
    at = np.empty(n)
    bt = np.empty(n)
    ct = np.empty(n)
    res = _hjb_assemble_nb(u, u_next, f, tau, src, dt, dx, s2h, r, central, F, a, b, c)
    for it in range(maxit):
        delta = thomas(a, b, c, -F)
        step = 0.0
        for i in range(n):
            if abs(delta[i]) > step:
                step = abs(delta[i])
        if not np.isfinite(step):
            return u, HJB_NEWTON_FAILED, res, it + 1
        lam = 1.0
        trial = u + delta
        res_t = _hjb_assemble_nb(trial, u_next, f, tau, src, dt, dx, s2h, r, central, Ft, at, bt, ct)
        while res_t >= res and res > 0.0 and lam > _MIN_DAMPING and step > tol:
            lam *= 0.5
            trial = u + lam * delta
            res_t = _hjb_assemble_nb(trial, u_next, f, tau, src, dt, dx, s2h, r, central, Ft, at, bt, ct)
        u = trial
        F[:] = Ft
        a[:] = at
        b[:] = bt
        c[:] = ct
        res = res_t
        if step <= tol:
            u[0] = 0.0
            return u, HJB_OK, res, it + 1
    return u, HJB_NEWTON_FAILED, res, maxit


@njit
def hjb_sweep_nb(u_terminal, f, src, has_src, dt, dx, s2h, r, tau, tol, maxit):
    nt1 = f.size
    n = u_terminal.size
    U = np.empty((nt1, n))
    U[nt1 - 1] = u_terminal
    zero = np.zeros(n)
    for k in range(nt1 - 2, -1, -1):
        s = src[k] if has_src else zero
        u, status, res, _ = hjb_step_nb(U[k + 1], f[k], tau, s, dt, dx, s2h, r, tol, maxit)
        if status != HJB_OK:
            return U, k, res
        U[k] = u
    return U, -1, 0.0


@njit
def _fp_assemble_nb(G, dt, dx, s2h, a, b, c):
    n = G.size
    N = n - 1
    D = s2h / dx
    a[0] = 0.0
    b[0] = 1.0
    c[0] = 0.0
    # interface j is between nodes j and j+1; velocity is -G
    for i in range(1, N):
        vl = -0.5 * (G[i - 1] + G[i])
        vr = -0.5 * (G[i] + G[i + 1])
        a[i] = -dt / dx * (D + max(vl, 0.0))
        b[i] = 1.0 + dt / dx * (2.0 * D + max(vr, 0.0) - min(vl, 0.0))
        c[i] = dt / dx * (-D + min(vr, 0.0))
    vl = -0.5 * (G[N - 1] + G[N])
    # half cell at x = L; its outer flux is exactly zero
    a[N] = -2.0 * dt / dx * (D + max(vl, 0.0))
    b[N] = 1.0 + 2.0 * dt / dx * (D - min(vl, 0.0))
    c[N] = 0.0


@njit
def fp_step_nb(m_curr, G, dt, dx, s2h):
    n = m_curr.size
    a = np.empty(n)
    b = np.empty(n)
    c = np.empty(n)
    _fp_assemble_nb(G, dt, dx, s2h, a, b, c)
    rhs = m_curr.copy()
    rhs[0] = 0.0
    m = thomas(a, b, c, rhs)
    for i in range(n):
        if not np.isfinite(m[i]):
            return m, FP_SINGULAR
        if -CLIP_NEGATIVE < m[i] < 0.0:
            m[i] = 0.0
    return m, FP_OK


@njit
def fp_sweep_nb(m_init, G, dt, dx, s2h):
    nt1 = G.shape[0]
    M = np.empty((nt1, m_init.size))
    M[0] = m_init
    for k in range(nt1 - 1):
        m, status = fp_step_nb(M[k], G[k + 1], dt, dx, s2h)
        if status != FP_OK:
            return M, k + 1
        M[k + 1] = m
    return M, -1


# ---------------------------------------------------------------- numpy path


def thomas_np(a, b, c, d):
    n = d.size
    ab = np.zeros((3, n))
    ab[0, 1:] = c[:-1]
    ab[1] = b
    ab[2, :-1] = a[1:]
    return solve_banded((1, 1), ab, d)


def _hjb_assemble_np(u, u_next, f, tau, src, dt, dx, s2h, r, central):
    n = u.size
    idx2 = 1.0 / dx**2
    F = np.empty(n)
    a = np.zeros(n)
    b = np.empty(n)
    c = np.zeros(n)
    um, u0, up = u[:-2], u[1:-1], u[2:]
    cen = central[1:-1]
    g = f - (up - um) / (2.0 * dx)
    gm = np.maximum(f - (u0 - um) / dx, 0.0)
    gp = np.minimum(f - (up - u0) / dx, 0.0)
    H = np.where(cen, 0.25 * tau * g * g, 0.25 * tau * (gm * gm + gp * gp))
    dm = np.where(cen, 0.25 * tau * g / dx, 0.5 * tau * gm / dx)
    d0 = np.where(cen, 0.0, 0.5 * tau * (gp - gm) / dx)
    dp = np.where(cen, -0.25 * tau * g / dx, -0.5 * tau * gp / dx)
    F[0] = u[0]
    b[0] = 1.0
    F[1:-1] = (u_next[1:-1] - u0) / dt + s2h * (up - 2.0 * u0 + um) * idx2 - r * u0 + H + src[1:-1]
    a[1:-1] = s2h * idx2 + dm
    b[1:-1] = -1.0 / dt - 2.0 * s2h * idx2 - r + d0
    c[1:-1] = s2h * idx2 + dp
    F[-1] = (
        (u_next[-1] - u[-1]) / dt
        + s2h * 2.0 * (u[-2] - u[-1]) * idx2
        - r * u[-1]
        + 0.25 * tau * f * f
        + src[-1]
    )
    a[-1] = 2.0 * s2h * idx2
    b[-1] = -1.0 / dt - 2.0 * s2h * idx2 - r
    return F, a, b, c, float(np.max(np.abs(F)))


def hjb_step_np(u_next, f, tau, src, dt, dx, s2h, r, tol, maxit):
    p = np.zeros_like(u_next)
    p[1:-1] = (u_next[2:] - u_next[:-2]) / (2.0 * dx)
    central = np.abs(0.5 * tau * (f - p)) * dx <= 2.0 * s2h
    u = u_next.copy()
    u[0] = 0.0
    F, a, b, c, res = _hjb_assemble_np(u, u_next, f, tau, src, dt, dx, s2h, r, central)
    for it in range(maxit):
        delta = thomas_np(a, b, c, -F)
        step = float(np.max(np.abs(delta)))
        if not np.isfinite(step):
            return u, HJB_NEWTON_FAILED, res, it + 1
        lam = 1.0
        trial = u + delta
        out = _hjb_assemble_np(trial, u_next, f, tau, src, dt, dx, s2h, r, central)
        while out[-1] >= res and res > 0.0 and lam > _MIN_DAMPING and step > tol:
            lam *= 0.5
            trial = u + lam * delta
            out = _hjb_assemble_np(trial, u_next, f, tau, src, dt, dx, s2h, r, central)
        u = trial
        F, a, b, c, res = out
        if step <= tol:
            u[0] = 0.0
            return u, HJB_OK, res, it + 1
    return u, HJB_NEWTON_FAILED, res, maxit


def hjb_sweep_np(u_terminal, f, src, has_src, dt, dx, s2h, r, tau, tol, maxit):
    nt1 = f.size
    n = u_terminal.size
    U = np.empty((nt1, n))
    U[-1] = u_terminal
    zero = np.zeros(n)
    for k in range(nt1 - 2, -1, -1):
        s = src[k] if has_src else zero
        u, status, res, _ = hjb_step_np(U[k + 1], f[k], tau, s, dt, dx, s2h, r, tol, maxit)
        if status != HJB_OK:
            return U, k, res
        U[k] = u
    return U, -1, 0.0


def _fp_assemble_np(G, dt, dx, s2h):
    n = G.size
    D = s2h / dx
    v = -0.5 * (G[:-1] + G[1:])  # interface velocities, length n-1
    vl, vr = v[:-1], v[1:]
    a = np.zeros(n)
    b = np.empty(n)
    c = np.zeros(n)
    b[0] = 1.0
    a[1:-1] = -dt / dx * (D + np.maximum(vl, 0.0))
    b[1:-1] = 1.0 + dt / dx * (2.0 * D + np.maximum(vr, 0.0) - np.minimum(vl, 0.0))
    c[1:-1] = dt / dx * (-D + np.minimum(vr, 0.0))
    a[-1] = -2.0 * dt / dx * (D + max(v[-1], 0.0))
    b[-1] = 1.0 + 2.0 * dt / dx * (D - min(v[-1], 0.0))
    return a, b, c


def fp_step_np(m_curr, G, dt, dx, s2h):
    a, b, c = _fp_assemble_np(G, dt, dx, s2h)
    rhs = m_curr.copy()
    rhs[0] = 0.0
    try:
        m = thomas_np(a, b, c, rhs)
    except np.linalg.LinAlgError:
        return rhs, FP_SINGULAR
    if not np.all(np.isfinite(m)):
        return m, FP_SINGULAR
    m[(m < 0.0) & (m > -CLIP_NEGATIVE)] = 0.0
    return m, FP_OK


def fp_sweep_np(m_init, G, dt, dx, s2h):
    nt1 = G.shape[0]
    M = np.empty((nt1, m_init.size))
    M[0] = m_init
    for k in range(nt1 - 1):
        m, status = fp_step_np(M[k], G[k + 1], dt, dx, s2h)
        if status != FP_OK:
            return M, k + 1
        M[k + 1] = m
    return M, -1


# ---------------------------------------------------------------- dispatch

if USE_NUMBA:
    hjb_step_kernel = hjb_step_nb
    hjb_sweep = hjb_sweep_nb
    fp_step_kernel = fp_step_nb
    fp_sweep = fp_sweep_nb
else:
    hjb_step_kernel = hjb_step_np
    hjb_sweep = hjb_sweep_np
    fp_step_kernel = fp_step_np
    fp_sweep = fp_sweep_np

BACKEND = "numba" if USE_NUMBA else "numpy"
