"""Experiment configuration: one JSON file, schema-checked, plus overrides.

Every experiment is described by a single JSON object. Subcommand handlers
read the typed accessors here rather than poking at the raw dict, so the
schema lives in exactly one place (DEFAULTS plus the _CHECKERS table).
Unknown keys are rejected: a typo in a config should fail loudly at load
time, not silently run the default experiment.

Overrides come from the command line as dotted key paths with JSON-parsed
values, e.g. ``--set reconstruction.lambda=3e-13 --set n_data=81``.
"""

from __future__ import annotations

import copy
import json
import math
import os
from pathlib import Path

import numpy as np

from .grid import (BoundaryData, Grid, ScalarField, boundary_bump, build_grid,
                   gamma_mask, load_field_csv, point_of_arclength)
from .measure_data import (BoundaryMeasure, density_measure,
                           mollified_point_mass, uniform_measure)
from .semilinear import DELTA_DEFAULT, NewtonParams


class ConfigError(Exception):
    """Invalid configuration (schema, types, or referenced paths)."""


DEFAULTS = {
    "command": None,
    "n_data": 81,
    "n_recon": 81,
    "m": 2,
    "q": {"kind": "constant", "value": 1.0},
    "f": {"kind": "bump", "center_s": 0.5, "halfwidth": 0.3, "height": 0.04},
    "gamma": None,
    "measure": {"kind": "point", "x0": [0.5, 1.0], "sigma": 0.1},
    "linearization": {
        "method": "cascade",
        "richardson": 1,
        "epsilons": None,
        "delta": DELTA_DEFAULT,
        "directions": None,
    },
    "newton": {"max_iter": 50, "residual_tol": 1e-12, "damping_limit": 20},
    "reconstruction": {
        "mode": "fourier",
        "kmax_factor": 4,
        "basis_count": 20,
        "lambda": "lcurve",
        "smoothing": "gradient",
        "phi_floor": 1e-3,
        "noise_rel": 0.0,
        "check_threshold": None,
    },
    "runge": {
        "split_index": None,
        "source_row": None,
        "counts": [8, 16, 32, 64],
        "negative_control": True,
    },
    "sigma_sweep": [0.2, 0.1, 0.05, 0.025],
    "n_sweep": [41, 81, 161],
    "output_dir": "out",
    "seed": 0,
    "threads": 0,
}


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check_int(v, lo=None, hi=None):
    if not isinstance(v, int) or isinstance(v, bool):
        return "expected an integer"
    if lo is not None and v < lo:
        return f"must be >= {lo}"
    if hi is not None and v > hi:
        return f"must be <= {hi}"
    return None


def _check_q(v):
    if not isinstance(v, dict) or "kind" not in v:
        return "expected an object with a 'kind'"
    kind = v.get("kind")
    if kind == "constant":
        return None if _is_num(v.get("value")) else "constant q needs numeric 'value'"
    if kind == "bumps":
        bumps = v.get("bumps")
        if not isinstance(bumps, list) or not bumps:
            return "bumps q needs a nonempty 'bumps' list"
        for b in bumps:
            if not (isinstance(b, dict) and _is_num(b.get("amplitude"))
                    and isinstance(b.get("center"), list) and len(b["center"]) == 2
                    and all(_is_num(c) for c in b["center"])
                    and _is_num(b.get("width")) and b["width"] > 0):
                return "each bump needs amplitude, center [x, y], width > 0"
        return None
    if kind == "csv":
        return None if isinstance(v.get("path"), str) else "csv q needs a 'path'"
    return f"unknown q kind {kind!r}"


def _check_f(v):
    if not isinstance(v, dict) or "kind" not in v:
        return "expected an object with a 'kind'"
    kind = v["kind"]
    if kind == "constant":
        return None if _is_num(v.get("value")) else "constant f needs numeric 'value'"
    if kind == "bump":
        ok = (_is_num(v.get("center_s")) and _is_num(v.get("halfwidth"))
              and v.get("halfwidth", 0) > 0 and _is_num(v.get("height")))
        return None if ok else "bump f needs center_s, halfwidth > 0, height"
    if kind == "csv":
        return None if isinstance(v.get("path"), str) else "csv f needs a 'path'"
    return f"unknown f kind {kind!r}"


def _check_measure(v):
    if not isinstance(v, dict) or "kind" not in v:
        return "expected an object with a 'kind'"
    kind = v["kind"]
    if kind == "point":
        has_loc = (isinstance(v.get("x0"), list) and len(v["x0"]) == 2) or _is_num(v.get("s0"))
        ok = has_loc and _is_num(v.get("sigma")) and v["sigma"] > 0
        return None if ok else "point measure needs x0 [x, y] (or s0) and sigma > 0"
    if kind == "uniform":
        return None if _is_num(v.get("mass", 1.0)) else "uniform measure mass must be numeric"
    if kind == "csv":
        return None if isinstance(v.get("path"), str) else "csv measure needs a 'path'"
    return f"unknown measure kind {kind!r}"


def _check_gamma(v):
    if v is None:
        return None
    if (isinstance(v, list) and len(v) == 2 and all(_is_num(s) for s in v)):
        return None
    return "gamma must be null or [s_start, s_end]"


_CHECKERS = {
    "command": lambda v: None if v is None or isinstance(v, str) else "must be a string",
    "n_data": lambda v: _check_int(v, lo=5),
    "n_recon": lambda v: _check_int(v, lo=5),
    "m": lambda v: _check_int(v, lo=2, hi=6),
    "q": _check_q,
    "f": _check_f,
    "gamma": _check_gamma,
    "measure": _check_measure,
    "seed": lambda v: _check_int(v, lo=0),
    "threads": lambda v: _check_int(v, lo=0),
    "output_dir": lambda v: None if isinstance(v, str) and v else "must be a nonempty string",
    "sigma_sweep": lambda v: None if (isinstance(v, list) and len(v) >= 2
                                      and all(_is_num(s) and s > 0 for s in v))
    else "must be a list of at least 2 positive numbers",
    "n_sweep": lambda v: None if (isinstance(v, list) and len(v) >= 2
                                  and all(_check_int(s, lo=5) is None for s in v))
    else "must be a list of at least 2 grid sizes",
}


def _check_section(name: str, value, defaults: dict):
    if not isinstance(value, dict):
        raise ConfigError(f"config key {name!r} must be an object")
    for k in value:
        if k not in defaults:
            raise ConfigError(f"unknown config key {name}.{k}")


def validate(cfg: dict) -> dict:
    """Merge with defaults, reject unknown keys, check types and ranges."""
    if not isinstance(cfg, dict):
        raise ConfigError("top-level config must be a JSON object")
    merged = copy.deepcopy(DEFAULTS)
    polymorphic = {"q", "f", "measure"}   # shape depends on 'kind'; replaced whole
    for key, value in cfg.items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        if (key not in polymorphic and isinstance(DEFAULTS[key], dict)
                and DEFAULTS[key]):
            _check_section(key, value, DEFAULTS[key])
            merged[key].update(value)
        else:
            merged[key] = value
    for key, checker in _CHECKERS.items():
        msg = checker(merged[key])
        if msg:
            raise ConfigError(f"config key {key!r}: {msg}")
    lin = merged["linearization"]
    if lin["method"] not in ("cascade", "mixed-difference"):
        raise ConfigError("linearization.method must be 'cascade' or 'mixed-difference'")
    if _check_int(lin["richardson"], lo=0, hi=6):
        raise ConfigError("linearization.richardson must be an integer in [0, 6]")
    if not (_is_num(lin["delta"]) and lin["delta"] > 0):
        raise ConfigError("linearization.delta must be positive")
    rec = merged["reconstruction"]
    if rec["mode"] not in ("fourier", "moment"):
        raise ConfigError("reconstruction.mode must be 'fourier' or 'moment'")
    if _check_int(rec["kmax_factor"], lo=1, hi=16):
        raise ConfigError("reconstruction.kmax_factor must be an integer in [1, 16]")
    if _check_int(rec["basis_count"], lo=3):
        raise ConfigError("reconstruction.basis_count must be an integer >= 3")
    if rec["lambda"] != "lcurve" and not (_is_num(rec["lambda"]) and rec["lambda"] > 0):
        raise ConfigError("reconstruction.lambda must be 'lcurve' or a positive number")
    if rec["smoothing"] not in ("gradient", "identity"):
        raise ConfigError("reconstruction.smoothing must be 'gradient' or 'identity'")
    if not (_is_num(rec["noise_rel"]) and rec["noise_rel"] >= 0):
        raise ConfigError("reconstruction.noise_rel must be >= 0")
    nw = merged["newton"]
    try:
        NewtonParams(max_iter=nw["max_iter"], residual_tol=nw["residual_tol"],
                     damping_limit=nw["damping_limit"])
    except (ValueError, TypeError) as e:
        raise ConfigError(f"newton params: {e}") from None
    return merged


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    cfg = validate(raw)
    cfg["_config_dir"] = str(p.resolve().parent)
    return cfg


def apply_overrides(cfg: dict, assignments) -> dict:
    """Apply --set key=value pairs (dotted paths, JSON-parsed values)."""
    out = copy.deepcopy(cfg)
    config_dir = out.pop("_config_dir", None)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"override {key!r}: no such config section")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"override {key!r}: no such config key")
        node[parts[-1]] = value
    out = validate(out)
    if config_dir is not None:
        out["_config_dir"] = config_dir
    return out


def _resolve(cfg: dict, path: str) -> Path:
    p = Path(path)
    if not p.is_absolute() and "_config_dir" in cfg:
        p = Path(cfg["_config_dir"]) / p
    if not p.is_file():
        raise ConfigError(f"referenced file not found: {p}")
    return p


# ---------------------------------------------------------------------------
# builders: config fragments to live objects


def build_q(cfg: dict, g: Grid) -> ScalarField:
    spec = cfg["q"]
    if spec["kind"] == "constant":
        return ScalarField.constant(g, float(spec["value"]))
    if spec["kind"] == "bumps":
        vals = np.zeros(g.n_nodes)
        for b in spec["bumps"]:
            cx, cy = b["center"]
            vals += b["amplitude"] * np.exp(
                -((g.x - cx) ** 2 + (g.y - cy) ** 2) / (2.0 * b["width"] ** 2))
        return ScalarField(g, vals)
    return load_field_csv(g, _resolve(cfg, spec["path"]))


def build_f(cfg: dict, g: Grid) -> BoundaryData:
    spec = cfg["f"]
    gam = build_gamma(cfg, g)
    if spec["kind"] == "constant":
        vals = np.full(g.n_boundary, float(spec["value"]))
        if gam is not None:
            vals = np.where(gam, vals, 0.0)
        return BoundaryData(g, vals, support_mask=gam)
    if spec["kind"] == "bump":
        return boundary_bump(g, spec["center_s"], spec["halfwidth"],
                             height=spec["height"], gamma=gam)
    data = np.genfromtxt(_resolve(cfg, spec["path"]), delimiter=",", names=True)
    vals = np.asarray(data["value"], dtype=float)
    if vals.shape != (g.n_boundary,):
        raise ConfigError(f"boundary csv has {vals.shape[0]} rows, "
                          f"grid has {g.n_boundary} boundary nodes")
    if gam is not None:
        vals = np.where(gam, vals, 0.0)
    return BoundaryData(g, vals, support_mask=gam)


def build_gamma(cfg: dict, g: Grid):
    if cfg["gamma"] is None:
        return None
    s0, s1 = cfg["gamma"]
    return gamma_mask(g, s0, s1)


def build_measure(cfg: dict, g: Grid) -> BoundaryMeasure:
    spec = cfg["measure"]
    if spec["kind"] == "point":
        x0 = tuple(spec["x0"]) if "x0" in spec else point_of_arclength(spec["s0"])
        return mollified_point_mass(g, x0, float(spec["sigma"]))
    if spec["kind"] == "uniform":
        return uniform_measure(g, float(spec.get("mass", 1.0)))
    data = np.genfromtxt(_resolve(cfg, spec["path"]), delimiter=",", names=True)
    return density_measure(g, np.asarray(data["value"], dtype=float))


def build_newton(cfg: dict) -> NewtonParams:
    nw = cfg["newton"]
    return NewtonParams(max_iter=nw["max_iter"], residual_tol=nw["residual_tol"],
                        damping_limit=nw["damping_limit"])


def build_directions(cfg: dict, g: Grid) -> list:
    """The m probing directions for identity checks.

    Default: m overlapping bumps with centers marching along the boundary,
    all supported in gamma when one is configured.
    """
    lin = cfg["linearization"]
    gam = build_gamma(cfg, g)
    if lin["directions"] is not None:
        dirs = []
        for d in lin["directions"]:
            dirs.append(boundary_bump(g, d["center_s"], d["halfwidth"],
                                      height=d.get("height", 1.0), gamma=gam))
        return dirs
    m = cfg["m"]
    if gam is None:
        centers = [0.5 + 0.4 * j for j in range(m)]
        halfwidth = 0.6
    else:
        s0, s1 = cfg["gamma"]
        length = (s1 - s0) % 4.0 or 4.0
        centers = [s0 + length * (j + 1) / (m + 1) for j in range(m)]
        halfwidth = 0.4 * length
    return [boundary_bump(g, c, halfwidth, gamma=gam) for c in centers]


def thread_count(cfg: dict) -> int:
    env = os.environ.get("POINTDN_THREADS")
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"POINTDN_THREADS is not an integer: {env!r}") from None
        if n < 1:
            raise ConfigError("POINTDN_THREADS must be >= 1")
        return n
    n = cfg["threads"]
    return n if n >= 1 else (os.cpu_count() or 1)
