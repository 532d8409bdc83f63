"""Experiment configuration: TOML text resolved against built-in presets.

A config names a ``preset`` (or a ``scenario`` for a fully inline spec) and
may override any documented key. Unknown keys and out-of-range values are
rejected; the resolved config serialises back to TOML and re-parses to
itself.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import tomli
import tomli_w

from .grid import BOUNDARY_TAGS


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


SCENARIOS = ("single", "barenblatt", "cascade", "gronwall", "cross", "structure")
MODEL_NAMES = ("heat", "porous_media", "skt_compete", "skt_coop")
REACTIONS = ("model", "zero", "linear", "logistic", "cubic")
INITIAL_KINDS = ("sine", "barenblatt", "bumps")

_COMPETE_ABC = {"a": [1.0, 1.0], "b": [-1.0, -0.5], "c": [-0.5, -1.0]}
_COOP_ABC = {"a": [1.0, 1.0], "b": [-1.0, 0.2], "c": [0.2, -1.0]}

DEFAULTS = {
    "scenario": "single",
    "out": "",
    "seed": 0,
    "verbosity": 1,
    "model": {"name": "heat", "m": 1, "k": 1.0, "lam0": 0.0, "d1": 0.0, "d2": 0.0,
              "a11": 1.0, "a12": 1.0, "a21": 1.0, "a22": 1.0},
    "reaction": {"name": "model", "rate": 1.0},
    "grid": {"n": [64], "lengths": [1.0], "origin": [0.0], "bc": "dirichlet_zero"},
    "initial": {"kind": "sine", "amplitude": 1.0, "t0": 1.0, "C": 0.1},
    "controls": {"dt": 1e-3, "T": 0.1, "stride": 1, "newton_atol": 1e-10,
                 "newton_rtol": 1e-10, "max_iter": 30, "max_halvings": 6,
                 "linear_solver": "direct"},
    "cascade": {"base": 2.0, "base_b": 3.0, "count": 7, "r0": 0.0, "factor": 2.0,
                "cauchy_start": 0},
    "monitors": {"q1": 1.5, "q0": 2.0, "uniform_factor": 3.0, "vmo_radii": [],
                 "vmo_threshold": 0.0, "perturbation": 0.1, "refine": [],
                 "error_tol": 5e-3, "slope_tol": 0.15},
    "structure": {"samples": 1000, "directions": 16, "lo": -2.0, "hi": 2.0, "tol": 1e-9},
}

PRESETS = {
    "heat_1d": {
        "scenario": "single",
        "model": {"name": "heat", "m": 1},
        "controls": {"dt": 1e-4, "T": 0.1, "stride": 100},
        "monitors": {"refine": [32, 64, 128]},
    },
    "pme_barenblatt_1d": {
        "scenario": "barenblatt",
        "model": {"name": "porous_media", "m": 1, "k": 1.0},
        "grid": {"n": [64], "lengths": [4.0], "origin": [-2.0], "bc": "neumann_zero"},
        "initial": {"kind": "barenblatt", "t0": 1.0, "C": 0.1},
        "controls": {"dt": 0.02, "T": 1.0, "stride": 10},
        "monitors": {"refine": [64, 128, 256]},
    },
    "porous_media_cascade_1d": {
        "scenario": "cascade",
        "model": {"name": "porous_media", "m": 2, "k": 1.0},
        "reaction": {"name": "logistic", "rate": 1.0},
        "controls": {"dt": 0.002, "T": 0.2, "stride": 10},
        "cascade": {"base": 2.0, "count": 7, "r0": 0.25, "cauchy_start": 2},
    },
    "skt_compete_2d": {
        "scenario": "gronwall",
        "model": {"name": "skt_compete", "m": 2, "lam0": 0.25},
        "grid": {"n": [32, 32], "lengths": [1.0, 1.0], "origin": [0.0, 0.0],
                 "bc": "neumann_zero"},
        "initial": {"kind": "bumps"},
        "controls": {"dt": 0.02, "T": 2.0, "stride": 1},
    },
    "skt_coop_2d": {
        "scenario": "gronwall",
        "model": {"name": "skt_coop", "m": 2, "lam0": 0.25},
        "grid": {"n": [32, 32], "lengths": [1.0, 1.0], "origin": [0.0, 0.0],
                 "bc": "neumann_zero"},
        "initial": {"kind": "bumps"},
        "controls": {"dt": 0.02, "T": 2.0, "stride": 1},
    },
    "cascade_uniqueness_2d": {
        "scenario": "cross",
        "model": {"name": "skt_compete", "m": 2},
        "grid": {"n": [32, 32], "lengths": [1.0, 1.0], "origin": [0.0, 0.0],
                 "bc": "neumann_zero"},
        "initial": {"kind": "bumps"},
        "controls": {"dt": 0.01, "T": 0.5, "stride": 5},
        "cascade": {"base": 2.0, "base_b": 3.0, "count": 6, "r0": 0.125, "factor": 2.0,
                    "cauchy_start": 2},
    },
    "structure_check": {
        "scenario": "structure",
        "model": {"name": "skt_compete", "m": 2},
    },
}

# (type, check, message); lists carry their element type
_pos = (lambda v: v > 0, "must be positive")
_nonneg = (lambda v: v >= 0, "must be nonnegative")
_any = (lambda v: True, "")


def _choice(options):
    return (lambda v: v in options, f"must be one of {', '.join(options)}")


SCHEMA = {
    "": {"preset": (str, _choice(tuple(PRESETS))), "scenario": (str, _choice(SCENARIOS)),
         "out": (str, _any), "seed": (int, _nonneg), "verbosity": (int, _nonneg)},
    "model": {"name": (str, _choice(MODEL_NAMES)), "m": (int, (lambda v: v >= 1, "must be >= 1")),
              "k": (float, _pos), "lam0": (float, _nonneg), "d1": (float, _nonneg),
              "d2": (float, _nonneg), "a11": (float, _pos), "a12": (float, _pos),
              "a21": (float, _pos), "a22": (float, _pos),
              "a": ([float], (lambda v: len(v) == 2, "needs two entries")),
              "b": ([float], (lambda v: len(v) == 2, "needs two entries")),
              "c": ([float], (lambda v: len(v) == 2, "needs two entries"))},
    "reaction": {"name": (str, _choice(REACTIONS)), "rate": (float, _any)},
    "grid": {"n": ([int], (lambda v: 1 <= len(v) <= 2 and min(v) >= 3,
                           "needs one or two extents, each >= 3")),
             "lengths": ([float], (lambda v: len(v) >= 1 and min(v) > 0, "must be positive")),
             "origin": ([float], _any),
             "bc": (str, _choice(BOUNDARY_TAGS))},
    "initial": {"kind": (str, _choice(INITIAL_KINDS)), "amplitude": (float, _pos),
                "t0": (float, _pos), "C": (float, _pos)},
    "controls": {"dt": (float, _pos), "T": (float, _pos),
                 "stride": (int, (lambda v: v >= 1, "must be >= 1")),
                 "newton_atol": (float, _pos), "newton_rtol": (float, _pos),
                 "max_iter": (int, (lambda v: v >= 1, "must be >= 1")),
                 "max_halvings": (int, _nonneg),
                 "linear_solver": (str, _choice(("direct", "cg")))},
    "cascade": {"base": (float, (lambda v: v > 1, "must exceed 1")),
                "base_b": (float, (lambda v: v > 1, "must exceed 1")),
                "count": (int, (lambda v: v >= 1, "must be >= 1")),
                "r0": (float, _nonneg), "factor": (float, _pos),
                "cauchy_start": (int, _nonneg)},
    "monitors": {"q1": (float, (lambda v: v > 1, "must exceed 1")),
                 "q0": (float, (lambda v: v >= 1, "must be >= 1")),
                 "uniform_factor": (float, (lambda v: v > 1, "must exceed 1")),
                 "vmo_radii": ([float], (lambda v: all(x > 0 for x in v), "must be positive")),
                 "vmo_threshold": (float, _nonneg),
                 "perturbation": (float, (lambda v: 0 <= v < 1, "must lie in [0, 1)")),
                 "refine": ([int], (lambda v: all(x >= 3 for x in v), "extents must be >= 3")),
                 "error_tol": (float, _pos), "slope_tol": (float, _pos)},
    "structure": {"samples": (int, (lambda v: v >= 1, "must be >= 1")),
                  "directions": (int, (lambda v: v >= 1, "must be >= 1")),
                  "lo": (float, _any), "hi": (float, _any), "tol": (float, _pos)},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved configuration (nested plain dict, sections as sub-dicts)."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def preset(self) -> str | None:
        return self.values.get("preset")

    @property
    def scenario(self) -> str:
        return self.values["scenario"]

    def section(self, name: str) -> dict:
        return self.values[name]

    def emit(self) -> str:
        return emit_config(self)

    def with_out(self, out: str) -> "ExperimentConfig":
        v = copy.deepcopy(self.values)
        v["out"] = str(out)
        return ExperimentConfig(v)


def _coerce(field: str, value, kind):
    if isinstance(kind, list):
        if not isinstance(value, list):
            value = [value]
        return [_coerce(f"{field}[{i}]", x, kind[0]) for i, x in enumerate(value)]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(field, f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(field, f"expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ValidationError(field, f"expected a string, got {value!r}")
        return value
    raise TypeError(kind)


def _validate(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in SCHEMA or key == "":
                raise ValidationError(key, "unknown section")
            sec = {}
            for k2, v2 in value.items():
                name = f"{key}.{k2}"
                if k2 not in SCHEMA[key]:
                    raise ValidationError(name, "unknown key")
                kind, (check, msg) = SCHEMA[key][k2]
                v2 = _coerce(name, v2, kind)
                if not check(v2):
                    raise ValidationError(name, f"{msg} (got {v2!r})")
                sec[k2] = v2
            out[key] = sec
        else:
            if key not in SCHEMA[""]:
                raise ValidationError(key, "unknown key")
            kind, (check, msg) = SCHEMA[""][key]
            value = _coerce(key, value, kind)
            if not check(value):
                raise ValidationError(key, f"{msg} (got {value!r})")
            out[key] = value
    return out


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict):
            out[k] = _merge(out.get(k, {}), v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(raw: dict) -> ExperimentConfig:
    user = _validate(raw)
    if "preset" not in user and "scenario" not in user:
        raise ValidationError("preset", "either preset or scenario is required")
    merged = copy.deepcopy(DEFAULTS)
    if "preset" in user:
        merged = _merge(merged, PRESETS[user["preset"]])
    merged = _merge(merged, user)
    model = merged["model"]
    abc = _COOP_ABC if model["name"] == "skt_coop" else _COMPETE_ABC
    for key in ("a", "b", "c"):
        model.setdefault(key, list(abc[key]))
    if model["name"].startswith("skt") and model["m"] != 2:
        raise ValidationError("model.m", "SKT models have two components")
    grid = merged["grid"]
    dim = len(grid["n"])
    for key in ("lengths", "origin"):
        if len(grid[key]) != dim:
            raise ValidationError(f"grid.{key}", f"needs {dim} entries to match grid.n")
    c = merged["controls"]
    steps = c["T"] / c["dt"]
    if abs(steps - round(steps)) > 1e-8 * max(1.0, steps):
        raise ValidationError("controls.dt", "T must be a whole number of steps")
    if not merged["out"]:
        merged["out"] = f"crossdiff-out/{merged.get('preset', merged['scenario'])}"
    return ExperimentConfig(merged)


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(str(exc), getattr(exc, "lineno", None), getattr(exc, "colno", None)) from exc
    return resolve(raw)


def emit_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.values)


def preset_config(name: str, out: str | None = None) -> ExperimentConfig:
    if name not in PRESETS:
        raise ValidationError("preset", f"unknown preset {name!r}")
    raw = {"preset": name}
    if out is not None:
        raw["out"] = str(out)
    return resolve(raw)
