"""System configuration files and deterministic report writers.

A configuration is a JSON object::

    {
      "timescale": {"kind": "periodic_union", "a": 1, "b": 1,
                    "window": [0, 5], "dual": true},
      "direction": "backward",
      "A": [["1", "-1"], ["0", "2"]],
      "B": [["1", "0"], ["0", "1"]],
      "C": [["1", "0"], ["0", "-1"]],
      "D": [["0", "0"], ["0", "0"]],
      "anchor": 0,
      "interval": [-5, 0],
      "initial_state": [1, 0],
      "control": ["sin(s)", "1"],
      "dense_step": 0.01
    }

Only ``timescale``, ``direction``, ``A`` and ``B`` are required.  With
``"dual": true`` the generated scale is reflected through zero.  The
``interval`` is ``[s1, s0]`` for backward systems and ``[t0, t1]`` for
forward ones.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .expr import ExprSyntaxError, MatrixExpr, parse
from .linsys import BACKWARD, FORWARD, LinearSystem
from .timescale import TimeScale, dual, exact, from_generator

__all__ = [
    "ConfigError",
    "SystemConfig",
    "load_config",
    "parse_config",
    "timescale_from_dict",
    "dual_config",
    "dump_json",
    "format_number",
    "DENSE_STEP_ENV",
]

DENSE_STEP_ENV = "CHRONOCTL_DENSE_STEP"
_GENERATOR_PARAMS = {"h_integers": ("h",), "periodic_union": ("a", "b"), "explicit": ("items",)}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """A parsed configuration: the system plus simulation inputs."""

    raw: dict
    system: LinearSystem
    initial_state: np.ndarray | None
    control: MatrixExpr | None


def _number(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise ConfigError(f"{what} must be a number")
    try:
        return exact(x)
    except (ValueError, ZeroDivisionError) as err:
        raise ConfigError(f"{what}: {err}") from None


def timescale_from_dict(desc: dict) -> TimeScale:
    """Build a time scale from its configuration descriptor."""
    if not isinstance(desc, dict):
        raise ConfigError("timescale must be an object")
    kind = desc.get("kind")
    window = desc.get("window")
    if not isinstance(window, list) or len(window) != 2:
        raise ConfigError("timescale.window must be a pair [lo, hi]")
    lo, hi = (_number(w, "timescale.window") for w in window)
    params = {}
    for key in _GENERATOR_PARAMS.get(kind, ()):
        if key not in desc:
            raise ConfigError(f"timescale kind {kind!r} needs {key!r}")
        params[key] = desc[key] if key == "items" else _number(desc[key], f"timescale.{key}")
    try:
        ts = from_generator(kind, (lo, hi), **params)
    except (ValueError, TypeError) as err:
        raise ConfigError(f"timescale: {err}") from None
    return dual(ts) if desc.get("dual", False) else ts


def _matrix(raw, key, required=True):
    if key not in raw:
        if required:
            raise ConfigError(f"missing matrix {key}")
        return None
    rows = raw[key]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ConfigError(f"{key} must be a nested list of expressions")
    try:
        return MatrixExpr([[str(x) if not isinstance(x, (int, float)) else x for x in r]
                           for r in rows])
    except ExprSyntaxError as err:
        raise ConfigError(f"{key}: {err}") from None
    except ValueError as err:
        raise ConfigError(f"{key}: {err}") from None


def parse_config(raw: dict, dense_step=None) -> SystemConfig:
    """Validate a configuration object and build the system.

    ``dense_step`` (or the ``CHRONOCTL_DENSE_STEP`` environment variable)
    overrides the configured grid step.
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in ("timescale", "direction", "A", "B"):
        if key not in raw:
            raise ConfigError(f"missing key {key!r}")
    ts = timescale_from_dict(raw["timescale"])
    direction = raw["direction"]
    A, B = _matrix(raw, "A"), _matrix(raw, "B")
    C, D = _matrix(raw, "C", False), _matrix(raw, "D", False)
    anchor = horizon = None
    if "anchor" in raw:
        anchor = _number(raw["anchor"], "anchor")
    if "interval" in raw:
        iv = raw["interval"]
        if not isinstance(iv, list) or len(iv) != 2:
            raise ConfigError("interval must be a pair")
        lo, hi = (_number(x, "interval") for x in iv)
        start, end = (hi, lo) if direction in ("backward", "backward-nabla", "nabla") else (lo, hi)
        if anchor is not None and anchor != start:
            raise ConfigError("anchor and interval disagree")
        anchor, horizon = start, end
    step = os.environ.get(DENSE_STEP_ENV) if dense_step is None else dense_step
    if step is None:
        step = raw.get("dense_step")
    step = None if step is None else _number(step, "dense_step")
    if step is not None and step <= 0:
        raise ConfigError("dense_step must be positive")
    try:
        sys = LinearSystem(direction, ts, A, B, C, D, anchor=anchor, horizon=horizon,
                           dense_step=step)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    y0 = None
    if "initial_state" in raw:
        try:
            y0 = np.asarray(raw["initial_state"], dtype=float).reshape(sys.n)
        except (ValueError, TypeError):
            raise ConfigError(f"initial_state must hold {sys.n} numbers") from None
    control = None
    if "control" in raw:
        entries = raw["control"]
        if not isinstance(entries, list) or len(entries) != sys.m:
            raise ConfigError(f"control must list {sys.m} expressions")
        try:
            control = MatrixExpr([[str(e) if not isinstance(e, (int, float)) else e]
                                  for e in entries])
        except ValueError as err:
            raise ConfigError(f"control: {err}") from None
    return SystemConfig(raw, sys, y0, control)


def load_config(path, dense_step=None) -> SystemConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path} is not valid JSON: {err}") from None
    return parse_config(raw, dense_step)


def _dual_entry(text, negate):
    body = parse(text).reflect().render()
    return f"-({body})" if negate else body


def _dual_number(x):
    v = -exact(x)
    return int(v) if v.denominator == 1 else float(v)


def dual_config(raw: dict) -> dict:
    """Configuration of the dual system.

    ``A`` and ``B`` entries become ``-(e)`` with ``-s`` substituted for the
    time variable; ``C``, ``D`` and the control are only reflected.  The
    time scale flips its ``dual`` flag, times change sign.
    """
    cfg = parse_config(raw)  # validates
    out = {}
    for key, value in raw.items():
        if key == "timescale":
            ts = dict(value)
            ts["dual"] = not value.get("dual", False)
            out[key] = ts
        elif key == "direction":
            out[key] = BACKWARD if cfg.system.direction == FORWARD else FORWARD
        elif key in ("A", "B", "C", "D"):
            neg = key in ("A", "B")
            out[key] = [[_dual_entry(x, neg) for x in row] for row in value]
        elif key == "anchor":
            out[key] = _dual_number(value)
        elif key == "interval":
            out[key] = [_dual_number(value[1]), _dual_number(value[0])]
        elif key == "control":
            out[key] = [_dual_entry(x, False) for x in value]
        else:
            out[key] = value
    return out


def format_number(x) -> str:
    """17 significant digits; non-finite values become ``null`` in JSON."""
    x = float(x)
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    return "0" if text == "-0" else text


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_number(obj)
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj, indent=2) -> str:
    """Serialize with 17 significant digits and a fixed key order."""
    return _encode(obj, indent, 0) + "\n"
