"""Demand coefficients, Hamiltonian, drift and the nonlocal price coupling.

All functions broadcast over numpy arrays. The solvers only ever use the
intercept ``f = (2 + eps Q) / (2 + eps eta)``; the market price itself is a
diagnostic because it is undefined once the producer mass vanishes.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import Grid, gradient, trapezoid

ETA_FLOOR = 1e-10


def _check_eta(eta):
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0.0) or np.any(eta > 1.0) or np.any(np.isnan(eta)):
        raise ValueError("eta must lie in [0, 1]")
    return eta


def coeff_a(eta, epsilon):
    eta = _check_eta(eta)
    return 1.0 / (1.0 + epsilon * eta)


def coeff_c(eta, epsilon):
    eta = _check_eta(eta)
    return epsilon * eta / (1.0 + epsilon * eta)


def intercept_f(eta, Q, epsilon):
    """Effective demand intercept ``a + c * pbar`` written without dividing by eta."""
    eta = _check_eta(eta)
    return (2.0 + epsilon * np.asarray(Q, dtype=float)) / (2.0 + epsilon * eta)


def market_price(eta, Q, epsilon):
    """Average price ``(a + Q/eta) / (2 - c)``; NaN where eta is below ``ETA_FLOOR``."""
    eta = _check_eta(eta)
    Q = np.asarray(Q, dtype=float)
    ok = eta >= ETA_FLOOR
    safe_eta = np.where(ok, eta, 1.0)
    a = 1.0 / (1.0 + epsilon * safe_eta)
    c = epsilon * safe_eta / (1.0 + epsilon * safe_eta)
    p = (a + Q / safe_eta) / (2.0 - c)
    p = np.where(ok, p, np.nan)
    return p[()] if p.ndim == 0 else p


def hamiltonian_H(f, ux):
    return 0.25 * (f - ux) ** 2


def drift_G(f, ux):
    return 0.5 * (f - ux)


def equilibrium_price(f, ux):
    return 0.5 * (f + ux)


class CouplingPaths(NamedTuple):
    eta: np.ndarray
    Q: np.ndarray
    f: np.ndarray
    pbar: np.ndarray  # NaN marks "undefined" (eta below the floor)


def coupling_paths(u: np.ndarray, m: np.ndarray, grid: Grid, epsilon: float) -> CouplingPaths:
    """Mass, nonlocal term, intercept and price at every time node."""
    u = np.asarray(u, dtype=float)
    m = np.asarray(m, dtype=float)
    if u.shape != m.shape or u.shape[-1] != grid.Nx + 1:
        raise ValueError(f"field shapes {u.shape} and {m.shape} do not match the grid")
    eta = np.asarray(trapezoid(m, grid.dx), dtype=float)
    Q = np.asarray(trapezoid(gradient(u, grid.dx) * m, grid.dx), dtype=float)
    # roundoff can push the trapezoid mass a hair outside [0, 1]
    eta_c = np.clip(eta, 0.0, 1.0)
    f = intercept_f(eta_c, Q, epsilon)
    pbar = np.asarray(market_price(eta_c, Q, epsilon), dtype=float)
    return CouplingPaths(eta, Q, f, pbar)
