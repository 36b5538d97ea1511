"""Experiment configuration files (TOML).

All keys live at the top level, for example::

    kind = "interval"
    a = 0
    b = 1
    n = 2001
    potential = "x"
    alphas = [-1e-3, -5e-4]

Recognised keys depend on ``kind``; anything else is rejected with the line
and column where it appears.  ``alphas`` may be replaced by a geometric range
``alpha_start``, ``alpha_ratio``, ``alpha_count``.  ``potential`` is either an
expression in ``x`` (and ``y`` for rectangles) or the path of a CSV file,
resolved relative to the config file.
"""

from __future__ import annotations

import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError, InvalidGraphError, InvalidPotentialError
from .expr import parse_expression
from .graph import GraphFile, MetricGraph, read_graph
from .halfline import HalflineModel
from .interval import DEFAULT_N, Grid1D, PotentialSamples
from .rectangle import Grid2D, PotentialSamples2D

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

KINDS = ("interval", "bs", "rectangle", "graph", "halfline")

_COMMON = ("kind", "alphas", "alpha_start", "alpha_ratio", "alpha_count", "tolerance", "output", "format")
_KIND_KEYS = {
    "interval": ("a", "b", "n", "potential"),
    "bs": ("a", "b", "n", "potential", "bs_tol"),
    "rectangle": ("ax", "bx", "ay", "by", "nx", "ny", "potential", "method"),
    "graph": ("graph", "h"),
    "halfline": ("L", "h", "closure", "potential"),
}
# canonical key order for serialisation
KEY_ORDER = (
    "kind", "a", "b", "n", "ax", "bx", "ay", "by", "nx", "ny", "L", "h", "closure", "graph",
    "method", "potential", "alphas", "alpha_start", "alpha_ratio", "alpha_count",
    "tolerance", "bs_tol", "output", "format",
)
DEFAULTS: dict[str, dict[str, Any]] = {
    "interval": {"a": 0.0, "b": 1.0, "n": DEFAULT_N},
    "bs": {"a": 0.0, "b": 1.0, "n": DEFAULT_N, "bs_tol": 1e-10},
    "rectangle": {"ax": 0.0, "bx": 1.0, "ay": 0.0, "by": 1.0, "nx": 80, "ny": 80, "method": "auto"},
    "graph": {},
    "halfline": {"L": 300.0, "h": 0.05, "closure": "matched"},
}
LIMITS = {"n": (3, 200_001), "nx": (3, 1000), "ny": (3, 1000), "alpha_count": (1, 1000)}
DEFAULT_TOLERANCE = 0.05


@dataclass(eq=False)
class ExperimentConfig:
    """Validated configuration.  ``values`` holds the normalised key/value pairs."""

    values: dict[str, Any]
    base_dir: str = "."
    source: str = "<config>"
    potential: Any = field(default=None, repr=False)  # PotentialSamples / 2D / GraphPotential
    graph_file: GraphFile | None = field(default=None, repr=False)

    @property
    def kind(self) -> str:
        return self.values["kind"]

    @property
    def alphas(self) -> tuple[float, ...]:
        if "alphas" in self.values:
            return tuple(self.values["alphas"])
        s, r, c = self.values["alpha_start"], self.values["alpha_ratio"], self.values["alpha_count"]
        return tuple(s * r**k for k in range(c))

    @property
    def tolerance(self) -> float:
        return self.values.get("tolerance", DEFAULT_TOLERANCE)

    def get(self, key: str):
        return self.values.get(key, DEFAULTS[self.kind].get(key))


def _locate(text: str, key: str) -> tuple[int, int]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = re.match(rf"\s*({re.escape(key)}|\"{re.escape(key)}\")\s*=", line)
        if m:
            return lineno, m.start(1) + 1
    return 0, 0


def _err(text: str, source: str, key: str, msg: str) -> ConfigError:
    line, col = _locate(text, key)
    where = f"{source}:{line}:{col}" if line else source
    return ConfigError(f"{where}: {msg}")


def _number(v, key, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"'{key}' must be a number")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ValueError(f"'{key}' must be an integer")
        v = int(v)
        lo, hi = LIMITS.get(key, (-math.inf, math.inf))
        if not lo <= v <= hi:
            raise ValueError(f"'{key}' = {v} outside [{lo}, {hi}]")
        return v
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"'{key}' must be finite")
    return v


def _normalise(raw: dict) -> dict:
    kind = raw.get("kind")
    out: dict[str, Any] = {"kind": kind}
    for key, v in raw.items():
        if key == "kind":
            continue
        if key in ("n", "nx", "ny", "alpha_count"):
            out[key] = _number(v, key, integer=True)
        elif key in ("a", "b", "ax", "bx", "ay", "by", "L", "h", "alpha_start", "alpha_ratio", "tolerance", "bs_tol"):
            out[key] = _number(v, key)
        elif key == "alphas":
            if not isinstance(v, list) or not v:
                raise ValueError("'alphas' must be a non-empty list of numbers")
            out[key] = [_number(a, "alphas") for a in v]
        elif key in ("potential", "output", "graph", "closure", "method", "format"):
            if not isinstance(v, str) or not v:
                raise ValueError(f"'{key}' must be a non-empty string")
            out[key] = v
    return out


def parse_config_text(text: str, base_dir: str = ".", source: str = "<config>") -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    kind = raw.get("kind")
    if kind is None:
        raise ConfigError(f"{source}: missing required key 'kind'")
    if kind not in KINDS:
        raise _err(text, source, "kind", f"kind must be one of {', '.join(KINDS)}, got {kind!r}")
    allowed = set(_COMMON) | set(_KIND_KEYS[kind])
    for key in raw:
        if key not in allowed:
            raise _err(text, source, key, f"unknown key '{key}' for kind '{kind}'")
    try:
        values = _normalise(raw)
    except ValueError as exc:
        key = next((k for k in raw if f"'{k}'" in str(exc)), "kind")
        raise _err(text, source, key, str(exc)) from None

    cfg = ExperimentConfig(values, base_dir, source)
    _check(cfg, text)
    return cfg


def parse_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    return parse_config_text(text, os.path.dirname(os.path.abspath(path)), path)


def _check(cfg: ExperimentConfig, text: str) -> None:
    v, src = cfg.values, cfg.source

    def fail(key, msg):
        raise _err(text, src, key, msg)

    has_list = "alphas" in v
    has_range = [k in v for k in ("alpha_start", "alpha_ratio", "alpha_count")]
    if has_list and any(has_range):
        fail("alphas", "give either 'alphas' or the alpha_start/alpha_ratio/alpha_count range, not both")
    if not has_list and not all(has_range):
        if any(has_range):
            fail(next(k for k in ("alpha_start", "alpha_ratio", "alpha_count") if k in v),
                 "geometric range needs alpha_start, alpha_ratio and alpha_count")
        raise ConfigError(f"{src}: missing 'alphas'")
    if not has_list and not 0 < v["alpha_ratio"] < 1:
        fail("alpha_ratio", "alpha_ratio must lie in (0, 1)")
    alphas = cfg.alphas
    if any(a > 0 for a in alphas):
        fail("alphas" if has_list else "alpha_start", "alphas must be negative (0 allowed for a baseline row)")
    if len(set(alphas)) != len(alphas):
        fail("alphas", "alphas must be distinct")
    if "tolerance" in v and not v["tolerance"] > 0:
        fail("tolerance", "tolerance must be positive")
    if "bs_tol" in v and not 0 < v["bs_tol"] < 1e-2:
        fail("bs_tol", "bs_tol must lie in (0, 1e-2)")
    if v.get("format", "csv") not in ("csv", "json"):
        fail("format", "format must be 'csv' or 'json'")
    if "method" in v and v["method"] not in ("auto", "dense", "cg"):
        fail("method", "method must be 'auto', 'dense' or 'cg'")
    if "closure" in v and v["closure"] not in ("matched", "neumann"):
        fail("closure", "closure must be 'matched' or 'neumann'")

    kind = cfg.kind
    if kind == "graph":
        if "graph" not in v:
            raise ConfigError(f"{src}: kind 'graph' needs a 'graph' file")
        if "h" in v and not v["h"] > 0:
            fail("h", "h must be positive")
        path = os.path.join(cfg.base_dir, v["graph"])
        if not os.path.isfile(path):
            fail("graph", f"graph file not found: {v['graph']}")
        gf = read_graph(path)
        if "h" in v:
            try:
                gf = GraphFile(MetricGraph(gf.graph.vertex_count, gf.graph.edges, v["h"]), gf.potentials, gf.base_dir)
            except InvalidGraphError as exc:
                fail("h", str(exc))
        try:
            pot = gf.potential()
        except InvalidPotentialError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if pot is None:
            raise ConfigError(f"{path}: graph file defines no potential")
        cfg.graph_file, cfg.potential = gf, pot
        return

    if "potential" not in v:
        raise ConfigError(f"{src}: missing 'potential'")
    try:
        if kind in ("interval", "bs"):
            grid = Grid1D(cfg.get("a"), cfg.get("b"), cfg.get("n"))
        elif kind == "rectangle":
            grid = Grid2D(Grid1D(cfg.get("ax"), cfg.get("bx"), cfg.get("nx")),
                          Grid1D(cfg.get("ay"), cfg.get("by"), cfg.get("ny")))
        else:
            grid = HalflineModel(cfg.get("L"), cfg.get("h"), cfg.get("closure")).grid
    except ValueError as exc:
        key = next((k for k in ("a", "b", "n", "ax", "bx", "ay", "by", "nx", "ny", "L", "h") if k in v), "kind")
        fail(key, str(exc))
    try:
        cfg.potential = _potential(v["potential"], grid, cfg.base_dir)
    except (ConfigError, InvalidPotentialError) as exc:
        fail("potential", f"potential {v['potential']!r}: {exc}")


def _potential(spec: str, grid, base_dir: str):
    two_d = isinstance(grid, Grid2D)
    if spec.lower().endswith(".csv"):
        path = os.path.join(base_dir, spec)
        if not os.path.isfile(path):
            raise ConfigError(f"potential file not found: {spec}")
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
        except ValueError as exc:
            raise ConfigError(f"{spec}: {exc}") from None
        if two_d:
            return PotentialSamples2D(grid, data)
        if data.shape[1] >= 2:
            return PotentialSamples(grid, np.interp(grid.nodes, data[:, 0], data[:, 1]))
        return PotentialSamples(grid, data[:, 0])
    if two_d:
        expr = parse_expression(spec, ("x", "y"))
        X, Y = grid.mesh()
        return PotentialSamples2D(grid, expr(x=X, y=Y))
    expr = parse_expression(spec, ("x",))
    return PotentialSamples(grid, expr(x=grid.nodes))


# -- serialisation ---------------------------------------------------------------


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical TOML: known keys in a fixed order, floats as shortest repr."""
    return "".join(f"{k} = {_toml_value(cfg.values[k])}\n" for k in KEY_ORDER if k in cfg.values)
