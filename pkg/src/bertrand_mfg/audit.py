"""Numerical checks of the a priori estimates and structural identities.

Every check is a pure function of a :class:`~bertrand_mfg.coupling.Solution`
(only its fields, parameters, grid and ``tau_final`` are read); the coupling
paths are recomputed from the fields so externally supplied or hand-edited
fields are audited consistently. Estimates whose constants are not explicit
are recorded as numbers; their refinement stability is compared with
:func:`refinement_ratios`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import gradient, second_derivative_right, trapezoid
from .model import coupling_paths, drift_G, hamiltonian_H

M_FLOOR = -1e-12
MASS_TOL = 1e-10
# identity residuals are first order in (dt + dx); this allows one decade over the observed constants
IDENTITY_CONST = 10.0


@dataclass
class CheckRecord:
    name: str
    passed: bool
    measured: dict
    bounds: dict
    tolerance: float
    detail: str = ""

    def as_dict(self):
        d = asdict(self)
        d["measured"] = {k: _jsonable(v) for k, v in self.measured.items()}
        d["bounds"] = {k: _jsonable(v) for k, v in self.bounds.items()}
        return d


@dataclass
class AuditReport:
    records: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def __getitem__(self, name) -> CheckRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def failed(self):
        return [r.name for r in self.records if not r.passed]

    def as_dict(self):
        return {"passed": self.passed, "checks": [r.as_dict() for r in self.records]}


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def _tol(sol):
    return sol.grid.tol_scheme(float(np.max(np.abs(sol.u))))


def _where(arr, fn):
    idx = np.unravel_index(fn(arr), arr.shape)
    return tuple(int(i) for i in idx)


def _time_integral(path, dt):
    return float(trapezoid(path, dt))


def check_positivity(sol) -> CheckRecord:
    u, m, g = sol.u, sol.m, sol.grid
    tol = _tol(sol)
    min_m, min_u = float(m.min()), float(u.min())
    floor = math.exp(-sol.params.r * g.T) * float(u[-1].min())
    min_gap = float((u - floor).min())
    ok_m, ok_u, ok_floor = min_m >= M_FLOOR, min_u >= -tol, min_gap >= -tol
    detail = []
    if not ok_m:
        n, i = _where(m, np.argmin)
        detail.append(f"m={min_m:.3e} at node (t_{n}, x_{i})")
    if not ok_u:
        n, i = _where(u, np.argmin)
        detail.append(f"u={min_u:.3e} at node (t_{n}, x_{i})")
    if not ok_floor:
        n, i = _where(u - floor, np.argmin)
        detail.append(f"u below exp(-rT) min u(T) by {-min_gap:.3e} at node (t_{n}, x_{i})")
    return CheckRecord(
        "positivity", ok_m and ok_u and ok_floor,
        {"min_m": min_m, "min_u": min_u, "min_u_minus_floor": min_gap},
        {"min_m": M_FLOOR, "min_u": -tol, "floor": floor},
        tol, "; ".join(detail),
    )


def check_mass(sol) -> CheckRecord:
    eta = np.asarray(trapezoid(sol.m, sol.grid.dx))
    target = sol.tau_final
    err0 = abs(float(eta[0]) - target)
    max_rise = float(np.max(np.diff(eta))) if eta.size > 1 else 0.0
    lo, hi = float(eta.min()), float(eta.max())
    ok = err0 <= MASS_TOL and max_rise <= MASS_TOL and lo >= -MASS_TOL and hi <= 1.0 + MASS_TOL
    detail = "" if ok else (
        f"eta(0)={eta[0]:.12g} (target {target}), max rise {max_rise:.3e}, range [{lo:.3e}, {hi:.3e}]"
    )
    return CheckRecord(
        "mass", ok,
        {"eta0": float(eta[0]), "etaT": float(eta[-1]), "max_rise": max_rise,
         "eta_min": lo, "eta_max": hi},
        {"eta0": target, "max_rise": MASS_TOL, "range": (0.0, 1.0)},
        MASS_TOL, detail,
    )


def energy_terms(sol) -> dict:
    """Discrete terms of the cross-multiplied energy identity and the ``m u_x^2`` integral."""
    u, m, g = sol.u, sol.m, sol.grid
    tau = sol.tau_final
    paths = coupling_paths(u, m, g, sol.params.epsilon)
    ux = gradient(u, g.dx)
    fcol = paths.f[:, None]
    H = hamiltonian_H(fcol, ux)
    G = drift_G(fcol, ux)

    def dbl(field_):
        return _time_integral(trapezoid(field_, g.dx), g.dt)

    terminal = float(trapezoid(u[-1] * m[-1], g.dx))
    initial = float(trapezoid(u[0] * m[0], g.dx))
    discount = sol.params.r * dbl(u * m)
    ham = tau * dbl(m * H)
    transport = tau * dbl(m * ux * G)
    residual = terminal - initial - discount + ham + transport
    return {
        "terminal": terminal,
        "initial": initial,
        "discount": discount,
        "hamiltonian": ham,
        "transport": transport,
        "residual": abs(residual),
        "m_ux2": dbl(m * ux**2),
    }


def check_energy(sol) -> CheckRecord:
    g = sol.grid
    eps = sol.params.epsilon
    terms = energy_terms(sol)
    h = g.dt + g.dx
    tol = IDENTITY_CONST * h * (1.0 + float(np.max(np.abs(sol.u))))
    bound = (2.0 + eps) * (1.0 + eps) * g.T + 4.0 * (2.0 + eps) * float(np.max(sol.u[-1]))
    ok_res = terms["residual"] <= tol
    ok_bound = terms["m_ux2"] <= bound
    detail = []
    if not ok_res:
        detail.append(f"identity residual {terms['residual']:.3e} > {tol:.3e}")
    if not ok_bound:
        detail.append(f"int m u_x^2 = {terms['m_ux2']:.6g} exceeds {bound:.6g}")
    measured = dict(terms)
    measured["C_res"] = terms["residual"] / h
    measured["bound_slack"] = bound - terms["m_ux2"]
    return CheckRecord("energy", ok_res and ok_bound, measured,
                       {"residual": tol, "m_ux2": bound}, tol, "; ".join(detail))


def nonlocal_identity(sol):
    """Pointwise residual of d/dt Q - r Q = -(s^2/2)(u_x m_x at 0 + u_xx m at L), interior times."""
    u, m, g = sol.u, sol.m, sol.grid
    s2h = 0.5 * sol.params.sigma**2
    Q = coupling_paths(u, m, g, sol.params.epsilon).Q
    w = np.exp(-sol.params.r * g.t) * Q
    lhs = np.exp(sol.params.r * g.t[1:-1]) * (w[2:] - w[:-2]) / (2.0 * g.dt)
    ux0 = gradient(u, g.dx)[:, 0]
    mx0 = (-3.0 * m[:, 0] + 4.0 * m[:, 1] - m[:, 2]) / (2.0 * g.dx)
    uxxL = second_derivative_right(u, g.dx)
    rhs = -s2h * (ux0 * mx0 + uxxL * m[:, -1])
    return lhs - rhs[1:-1], Q


def check_nonlocal(sol) -> CheckRecord:
    g = sol.grid
    res, Q = nonlocal_identity(sol)
    f = coupling_paths(sol.u, sol.m, g, sol.params.epsilon).f
    max_res = float(np.max(np.abs(res))) if res.size else 0.0
    l1_res = float(np.sum(np.abs(res)) * g.dt)
    max_Q = float(np.max(np.abs(Q)))
    max_f = float(np.max(np.abs(f)))
    ok = all(math.isfinite(v) for v in (max_res, max_Q, max_f))
    return CheckRecord(
        "nonlocal", ok,
        {"max_abs_Q": max_Q, "max_abs_f": max_f, "identity_residual_sup": max_res,
         "identity_residual_l1": l1_res},
        {"finite": True}, 0.0, "" if ok else "non-finite nonlocal term",
    )


def check_signs(sol) -> CheckRecord:
    u, m, g = sol.u, sol.m, sol.grid
    tol = _tol(sol)
    ux = gradient(u, g.dx)
    mx0 = (-3.0 * m[:, 0] + 4.0 * m[:, 1] - m[:, 2]) / (2.0 * g.dx)
    uxxL = second_derivative_right(u, g.dx)
    min_ux, min_mx0, max_uxxL = float(ux.min()), float(mx0.min()), float(uxxL.max())
    ok_ux, ok_mx, ok_uxx = min_ux >= -tol, min_mx0 >= M_FLOOR, max_uxxL <= tol
    detail = []
    if not ok_ux:
        n, i = _where(ux, np.argmin)
        detail.append(f"u_x={min_ux:.3e} at node (t_{n}, x_{i})")
    if not ok_mx:
        detail.append(f"m_x(t,0)={min_mx0:.3e} at t_{int(np.argmin(mx0))}")
    if not ok_uxx:
        detail.append(f"u_xx(t,L)={max_uxxL:.3e} at t_{int(np.argmax(uxxL))}")
    return CheckRecord(
        "signs", ok_ux and ok_mx and ok_uxx,
        {"min_ux": min_ux, "min_mx0": min_mx0, "max_uxxL": max_uxxL},
        {"min_ux": -tol, "min_mx0": M_FLOOR, "max_uxxL": tol}, tol, "; ".join(detail),
    )


def check_entropy(sol) -> CheckRecord:
    g = sol.grid
    mx = gradient(sol.m, g.dx)
    value = _time_integral(trapezoid(mx**2 / (sol.m + 1.0), g.dx), g.dt)
    ok = math.isfinite(value)
    return CheckRecord("entropy", ok, {"int_mx2_over_m1": value}, {"finite": True}, 0.0,
                       "" if ok else "non-finite")


def check_gradient_bound(sol) -> CheckRecord:
    """max u_x, plus the maximum principle for u_x e^{-rt} against the parabolic boundary."""
    u, g = sol.u, sol.grid
    ux = gradient(u, g.dx)
    max_ux = float(np.max(np.abs(ux)))
    boundary = max(float(np.abs(ux[:, 0]).max()), float(np.abs(ux[:, -1]).max()),
                   float(np.abs(ux[-1]).max()))
    tol = g.tol_scheme(max_ux)
    predicted = math.exp(sol.params.r * g.T) * boundary + tol
    ok = math.isfinite(max_ux) and max_ux <= predicted
    return CheckRecord(
        "gradient_bound", ok,
        {"max_ux": max_ux, "max_ux_boundary": boundary,
         "argmax_t": int(np.unravel_index(np.argmax(np.abs(ux)), ux.shape)[0])},
        {"max_principle": predicted}, tol,
        "" if ok else f"max u_x {max_ux:.6g} exceeds boundary prediction {predicted:.6g}",
    )


CHECKS = (
    check_positivity,
    check_mass,
    check_energy,
    check_signs,
    check_nonlocal,
    check_entropy,
    check_gradient_bound,
)


def audit_all(sol, allow_unconverged=False) -> AuditReport:
    if not sol.converged and not allow_unconverged:
        raise ValueError("refusing to audit an unconverged solution (pass allow_unconverged=True)")
    return AuditReport([check(sol) for check in CHECKS])


def refinement_ratios(coarse: AuditReport, fine: AuditReport) -> dict:
    """Decay factors of identity residuals and relative changes of the non-explicit bounds."""

    def rel(a, b):
        return abs(b - a) / max(abs(a), abs(b), 1e-300)

    def ratio(a, b):
        return a / b if b > 0 else math.inf

    c, f = coarse, fine
    return {
        "energy_residual_ratio": ratio(c["energy"].measured["residual"], f["energy"].measured["residual"]),
        "nonlocal_residual_ratio": ratio(c["nonlocal"].measured["identity_residual_sup"],
                                         f["nonlocal"].measured["identity_residual_sup"]),
        "nonlocal_residual_l1_ratio": ratio(c["nonlocal"].measured["identity_residual_l1"],
                                            f["nonlocal"].measured["identity_residual_l1"]),
        "max_Q_change": rel(c["nonlocal"].measured["max_abs_Q"], f["nonlocal"].measured["max_abs_Q"]),
        "max_f_change": rel(c["nonlocal"].measured["max_abs_f"], f["nonlocal"].measured["max_abs_f"]),
        "entropy_change": rel(c["entropy"].measured["int_mx2_over_m1"],
                              f["entropy"].measured["int_mx2_over_m1"]),
        "max_ux_change": rel(c["gradient_bound"].measured["max_ux"],
                             f["gradient_bound"].measured["max_ux"]),
    }
