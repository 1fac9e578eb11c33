"""Grids, model data and discrete calculus shared by the solvers and the audit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

Profile = Union[str, Callable[[np.ndarray, float], np.ndarray], np.ndarray]

PROFILE_RTOL = 1e-8


class ConfigurationError(ValueError):
    """Invalid model data or discretization."""


def _quartic_bump(x, L):
    return 30.0 * x**2 * (L - x) ** 2 / L**5


def _sine_squared(x, L):
    return 0.5 * np.sin(np.pi * x / (2.0 * L)) ** 2


def _zero(x, L):
    return np.zeros_like(x)


BUILTIN_M0 = {"quartic-bump": _quartic_bump}
BUILTIN_UT = {"sine-squared": _sine_squared, "zero": _zero}


@dataclass(frozen=True)
class ModelParams:
    """PDE data: competition, volatility, discount, capacity cap, horizon and profiles.

    ``m0`` and ``uT`` are either built-in profile names, callables ``(x, L) -> values``
    or arrays already sampled on the space grid.
    """

    epsilon: float = 0.3
    sigma: float = 0.5
    r: float = 0.1
    L: float = 1.0
    T: float = 1.0
    m0: Profile = "quartic-bump"
    uT: Profile = "sine-squared"

    def __post_init__(self):
        for name in ("epsilon", "sigma", "r", "L", "T"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigurationError(f"{name} must be a finite real, got {v!r}")
        if self.sigma <= 0:
            raise ConfigurationError(
                "sigma must be > 0: the model is only posed in the parabolic (diffusive) case"
            )
        if self.L <= 0:
            raise ConfigurationError("L must be > 0")
        if self.T <= 0:
            raise ConfigurationError("T must be > 0")
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be >= 0")
        if self.r < 0:
            raise ConfigurationError("r must be >= 0")
        if isinstance(self.m0, str) and self.m0 not in BUILTIN_M0:
            raise ConfigurationError(
                f"m0: unknown built-in profile {self.m0!r} (known: {sorted(BUILTIN_M0)})"
            )
        if isinstance(self.uT, str) and self.uT not in BUILTIN_UT:
            raise ConfigurationError(
                f"uT: unknown built-in profile {self.uT!r} (known: {sorted(BUILTIN_UT)})"
            )


@dataclass(frozen=True)
class Discretization:
    Nx: int = 200
    Nt: int = 400
    newton_tol: float = 1e-11
    newton_max: int = 50
    picard_tol: float = 1e-8
    picard_max: int = 500
    damping: float = 0.5
    continuation: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "continuation", tuple(float(t) for t in self.continuation))
        if not isinstance(self.Nx, (int, np.integer)) or self.Nx < 4:
            raise ConfigurationError(f"Nx must be an integer >= 4, got {self.Nx!r}")
        if not isinstance(self.Nt, (int, np.integer)) or self.Nt < 2:
            raise ConfigurationError(f"Nt must be an integer >= 2, got {self.Nt!r}")
        if not (self.newton_tol > 0 and self.picard_tol > 0):
            raise ConfigurationError("newton_tol and picard_tol must be > 0")
        if self.newton_max < 1 or self.picard_max < 1:
            raise ConfigurationError("newton_max and picard_max must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigurationError(f"damping must lie in (0, 1], got {self.damping}")
        taus = self.continuation
        if not taus:
            raise ConfigurationError("continuation schedule is empty")
        if any(not 0.0 <= t <= 1.0 for t in taus):
            raise ConfigurationError("continuation values must lie in [0, 1]")
        if any(b < a for a, b in zip(taus, taus[1:])):
            raise ConfigurationError("continuation schedule must be nondecreasing")
        if taus[-1] != 1.0 and taus != (0.0,):
            # a lone 0 stage is accepted: it is the trivial problem, used for smoke runs
            raise ConfigurationError("continuation schedule must end at 1")

    def refined(self, factor: int = 2) -> "Discretization":
        from dataclasses import replace

        return replace(self, Nx=self.Nx * factor, Nt=self.Nt * factor)


@dataclass(frozen=True)
class Grid:
    L: float
    T: float
    Nx: int
    Nt: int
    dx: float = field(init=False)
    dt: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)
    t: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dx", self.L / self.Nx)
        object.__setattr__(self, "dt", self.T / self.Nt)
        x = np.arange(self.Nx + 1) * self.dx
        t = np.arange(self.Nt + 1) * self.dt
        x[-1] = self.L
        t[-1] = self.T
        x.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    @property
    def shape(self):
        return (self.Nt + 1, self.Nx + 1)

    def tol_scheme(self, scale: float) -> float:
        """Scheme tolerance ``10 (dt + dx^2) scale`` used by the invariant checks."""
        return 10.0 * (self.dt + self.dx**2) * scale


def build_grid(params: ModelParams, disc: Discretization) -> Grid:
    if disc.Nx < 1 or disc.Nt < 1:
        raise ConfigurationError("grid sizes must be positive")
    return Grid(params.L, params.T, int(disc.Nx), int(disc.Nt))


def trapezoid(profile, dx: float):
    """Trapezoid rule along the last axis (space), uniform spacing ``dx``."""
    y = np.asarray(profile, dtype=float)
    if y.shape[-1] < 2:
        raise ValueError("trapezoid needs at least two samples")
    return dx * (y[..., 1:-1].sum(axis=-1) + 0.5 * (y[..., 0] + y[..., -1]))


def gradient(profile, dx: float) -> np.ndarray:
    """Second-order first derivative along the last axis.

    Central differences inside, three-point one-sided stencils at both ends,
    so quadratics are differentiated exactly.
    """
    y = np.asarray(profile, dtype=float)
    if y.shape[-1] < 3:
        raise ValueError("gradient needs at least three samples")
    g = np.empty_like(y)
    g[..., 1:-1] = (y[..., 2:] - y[..., :-2]) / (2.0 * dx)
    g[..., 0] = (-3.0 * y[..., 0] + 4.0 * y[..., 1] - y[..., 2]) / (2.0 * dx)
    g[..., -1] = (3.0 * y[..., -1] - 4.0 * y[..., -2] + y[..., -3]) / (2.0 * dx)
    return g


def second_derivative_right(profile, dx: float):
    """One-sided second-order second derivative at the right end (x = L)."""
    y = np.asarray(profile, dtype=float)
    return (2.0 * y[..., -1] - 5.0 * y[..., -2] + 4.0 * y[..., -3] - y[..., -4]) / dx**2


def _sample(profile: Profile, grid: Grid, builtins: dict, name: str) -> np.ndarray:
    if isinstance(profile, str):
        return builtins[profile](np.asarray(grid.x, dtype=float), grid.L).astype(float)
    if callable(profile):
        return np.asarray(profile(np.asarray(grid.x, dtype=float), grid.L), dtype=float)
    v = np.asarray(profile, dtype=float)
    if v.shape != (grid.Nx + 1,):
        raise ConfigurationError(
            f"{name}: sampled profile has {v.size} values, grid has {grid.Nx + 1} nodes"
        )
    return v.copy()


def _slope_tolerance(v: np.ndarray, dx: float) -> float:
    # a smooth zero-slope profile gives an O(dx^2) one-sided slope; a genuine slope does not shrink
    return PROFILE_RTOL * (1.0 + np.max(np.abs(v))) + dx * np.max(np.abs(gradient(v, dx)))


def sample_profiles(params: ModelParams, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Sample and validate ``m0`` and ``uT`` on ``grid``.

    ``m0`` is rescaled so that its trapezoid mass is exactly one on this grid.
    """
    m0 = _sample(params.m0, grid, BUILTIN_M0, "m0")
    uT = _sample(params.uT, grid, BUILTIN_UT, "uT")
    dx = grid.dx
    for name, v in (("m0", m0), ("uT", uT)):
        if not np.all(np.isfinite(v)):
            raise ConfigurationError(f"{name}: non-finite samples")

    scale = 1.0 + np.max(np.abs(m0))
    tol = PROFILE_RTOL * scale
    if np.min(m0) < -tol:
        raise ConfigurationError(f"m0 must be nonnegative (min {np.min(m0):.3e})")
    mass = float(trapezoid(m0, dx))
    mass_tol = PROFILE_RTOL * (1.0 + abs(mass))
    if not isinstance(params.m0, np.ndarray):
        # closed-form profiles integrate to one exactly; allow the quadrature error
        mass_tol += dx**2 * np.max(np.abs(m0)) / grid.L**2
    if abs(mass - 1.0) > mass_tol:
        raise ConfigurationError(f"m0 integral must be 1, got {mass:.12g}")
    if abs(m0[0]) > tol or abs(m0[-1]) > tol:
        raise ConfigurationError("m0 must vanish at x=0 and x=L")
    slope_L = gradient(m0, dx)[-1]
    if abs(slope_L) > _slope_tolerance(m0, dx):
        raise ConfigurationError(f"m0 must have zero slope at x=L (got {slope_L:.3e})")
    m0 = np.where(m0 < 0.0, 0.0, m0)
    m0[0] = 0.0
    m0 = m0 / float(trapezoid(m0, dx))

    tol_u = PROFILE_RTOL * (1.0 + np.max(np.abs(uT)))
    if np.min(uT) < -tol_u:
        raise ConfigurationError("uT must be nonnegative")
    if abs(uT[0]) > tol_u:
        raise ConfigurationError("uT must vanish at x=0")
    if np.min(np.diff(uT)) < -tol_u:
        raise ConfigurationError("uT must be nondecreasing")
    slope_L = gradient(uT, dx)[-1]
    if abs(slope_L) > _slope_tolerance(uT, dx):
        raise ConfigurationError(f"uT must have zero slope at x=L (got {slope_L:.3e})")
    uT = uT.copy()
    uT[0] = 0.0
    return m0, uT
