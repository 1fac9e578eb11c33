"""INI-style run configuration.

Grammar (``configparser`` syntax, keys are case sensitive)::

    [model]
    epsilon = 0.3
    sigma = 0.5
    r = 0.1
    L = 1.0
    T = 1.0
    m0 = quartic-bump        # built-in name, or comma-separated samples on the x grid
    uT = sine-squared        # built-ins: sine-squared, zero

    [discretization]
    Nx = 200
    Nt = 400
    newton_tol = 1e-11
    newton_max = 50
    picard_tol = 1e-8
    picard_max = 500
    damping = 0.5
    continuation = 1.0       # comma-separated tau schedule ending at 1

    [run]
    q_init = 0.0             # constant initial guess for Q(t)
    uniqueness = false       # sweeps: also run from q_init_b and report the gap
    q_init_b = 1.0

Every section and key is optional; unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    BUILTIN_M0,
    BUILTIN_UT,
    ConfigurationError,
    Discretization,
    ModelParams,
    build_grid,
    sample_profiles,
)

_MODEL_KEYS = {"epsilon": float, "sigma": float, "r": float, "L": float, "T": float,
               "m0": str, "uT": str}
_DISC_KEYS = {"Nx": int, "Nt": int, "newton_tol": float, "newton_max": int,
              "picard_tol": float, "picard_max": int, "damping": float, "continuation": str}
_RUN_KEYS = {"q_init": float, "uniqueness": bool, "q_init_b": float}
_SECTIONS = {"model": _MODEL_KEYS, "discretization": _DISC_KEYS, "run": _RUN_KEYS}


@dataclass(frozen=True)
class RunOptions:
    q_init: float = 0.0
    uniqueness: bool = False
    q_init_b: float = 1.0


def _line_of(text: str, section: str, key: str):
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
        elif key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return n
    return None


def _profile(value: str, builtins: dict, name: str):
    if value in builtins:
        return value
    try:
        return np.array([float(v) for v in value.replace("\n", ",").split(",") if v.strip()])
    except ValueError:
        raise ConfigurationError(
            f"{name}: expected a built-in profile {sorted(builtins)} or comma-separated numbers"
        ) from None


def parse_config(text: str, source="<config>"):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(source))
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: parse error: {exc}") from None

    values = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigurationError(
                f"{source}:{_line_of(text, section, None) or '?'}: unknown section [{section}]"
            )
        keys = _SECTIONS[section]
        for key, raw in cp.items(section):
            where = f"{source}:{_line_of(text, section, key) or '?'}"
            if key not in keys:
                raise ConfigurationError(f"{where}: unknown key {key!r} in [{section}]")
            kind = keys[key]
            try:
                if kind is bool:
                    val = cp.getboolean(section, key)
                elif kind is int:
                    val = int(raw)
                elif kind is float:
                    val = float(raw)
                else:
                    val = raw.strip()
            except ValueError:
                raise ConfigurationError(
                    f"{where}: {key} = {raw!r} is not a valid {kind.__name__}"
                ) from None
            values[(section, key)] = (val, where)

    def pick(section, keys):
        return {k: values[(section, k)][0] for k in keys if (section, k) in values}

    model = pick("model", _MODEL_KEYS)
    if "m0" in model:
        model["m0"] = _profile(model["m0"], BUILTIN_M0, "m0")
    if "uT" in model:
        model["uT"] = _profile(model["uT"], BUILTIN_UT, "uT")
    disc = pick("discretization", _DISC_KEYS)
    if "continuation" in disc:
        try:
            disc["continuation"] = tuple(float(v) for v in disc["continuation"].split(","))
        except ValueError:
            where = values[("discretization", "continuation")][1]
            raise ConfigurationError(f"{where}: continuation must be comma-separated numbers") from None
    try:
        params = ModelParams(**model)
        discretization = Discretization(**disc)
        sample_profiles(params, build_grid(params, discretization))
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    return params, discretization, RunOptions(**pick("run", _RUN_KEYS))


def load_config(path=None):
    """Read and validate a config file; ``None`` gives the full default set."""
    if path is None:
        return parse_config("", "<defaults>")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path)
