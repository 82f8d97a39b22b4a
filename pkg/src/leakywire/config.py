"""TOML run configuration: parsing, validation, and default echoing.

Every validation error carries the dotted path of the offending key so a
config author can locate it without reading tracebacks.  The fully
resolved configuration (defaults applied) is echoed into every output
file for provenance.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .geometry import CircleLoop, CircularArc, FourierLoop, GeometryError, \
    Segment


class ConfigError(ValueError):
    """Invalid configuration; message includes the dotted key path."""


# ---------------------------------------------------------------------------
# typed extraction helpers

def _section(data, name, required=False):
    sub = data.get(name)
    if sub is None:
        if required:
            raise ConfigError(f"{name}: missing required section")
        return {}
    if not isinstance(sub, dict):
        raise ConfigError(f"{name}: expected a table")
    return sub


def _number(d, key, path, default=None, positive=False, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: missing required value")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    v = float(v)
    if positive and v <= 0:
        raise ConfigError(f"{path}.{key}: must be positive, got {v!r}")
    return v


def _integer(d, key, path, default=None, minimum=None):
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {v}")
    return v


def _string(d, key, path, default=None, choices=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: missing required value")
        return default
    v = d[key]
    if not isinstance(v, str):
        raise ConfigError(f"{path}.{key}: expected a string, got {v!r}")
    if choices is not None and v not in choices:
        raise ConfigError(
            f"{path}.{key}: expected one of {sorted(choices)}, got {v!r}")
    return v


def _number_list(d, key, path, default=None):
    if key not in d:
        return default
    v = d[key]
    if not isinstance(v, list) or any(
            isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ConfigError(f"{path}.{key}: expected a list of numbers")
    return [float(x) for x in v]


def _check_keys(d, allowed, path):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(
            f"{path}: unknown key(s) {sorted(unknown)}; "
            f"allowed: {sorted(allowed)}")


# ---------------------------------------------------------------------------
# resolved configuration

@dataclass
class RunConfig:
    alpha: float
    workers: int
    curve_spec: dict
    mesh: dict
    solver: dict
    hiatus: dict
    regcheck: dict
    eigfun: dict
    existence: dict
    source_text: str = field(repr=False, default="")

    @property
    def config_sha256(self):
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    def build_curve(self):
        spec = dict(self.curve_spec)
        kind = spec.pop("kind")
        try:
            if kind == "segment":
                return Segment(length=spec["length"])
            if kind == "circle":
                return CircleLoop(length=spec["length"])
            if kind == "arc":
                return CircularArc(radius=spec["radius"],
                                   angle=spec["angle"])
            return FourierLoop(spec["length"], spec["a0"],
                               spec["cos_coeffs"], spec["sin_coeffs"])
        except GeometryError as exc:
            raise ConfigError(f"curve: {exc}") from exc

    def echo(self):
        """Resolved configuration (defaults applied) for output metadata."""
        return {
            "alpha": self.alpha,
            "workers": self.workers,
            "curve": self.curve_spec,
            "mesh": self.mesh,
            "solver": self.solver,
            "hiatus": self.hiatus,
            "regcheck": self.regcheck,
            "eigfun": self.eigfun,
            "existence": self.existence,
        }


_TOP_KEYS = ("alpha", "workers", "curve", "mesh", "solver", "spectrum",
             "hiatus", "existence", "regcheck", "eigfun")


def parse_config(text) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    _check_keys(data, _TOP_KEYS, "config")

    alpha = _number(data, "alpha", "config", default=0.0)
    workers = _integer(data, "workers", "config", default=1, minimum=1)

    cs = _section(data, "curve", required=True)
    _check_keys(cs, ("kind", "length", "radius", "angle", "a0",
                     "cos_coeffs", "sin_coeffs"), "curve")
    kind = _string(cs, "kind", "curve", required=True,
                   choices=("segment", "circle", "arc", "fourier"))
    curve_spec = {"kind": kind}
    if kind in ("segment", "circle", "fourier"):
        curve_spec["length"] = _number(cs, "length", "curve", positive=True,
                                       required=True)
    if kind == "arc":
        curve_spec["radius"] = _number(cs, "radius", "curve", positive=True,
                                       required=True)
        curve_spec["angle"] = _number(cs, "angle", "curve", positive=True,
                                      required=True)
        if curve_spec["angle"] >= 2 * np.pi:
            raise ConfigError("curve.angle: must be below 2*pi (use 'circle' "
                              "for a full loop)")
    if kind == "fourier":
        for key in ("a0", "cos_coeffs", "sin_coeffs"):
            if key not in cs:
                raise ConfigError(f"curve.{key}: required for fourier curves")
            curve_spec[key] = cs[key]

    ms = _section(data, "mesh")
    _check_keys(ms, ("n_panels", "order", "basis", "trig_modes"), "mesh")
    mesh = {
        "n_panels": _integer(ms, "n_panels", "mesh", default=256, minimum=4),
        "order": _integer(ms, "order", "mesh", default=8, minimum=2),
        "basis": _string(ms, "basis", "mesh", default="hat",
                         choices=("hat", "trig")),
        "trig_modes": _integer(ms, "trig_modes", "mesh", default=16,
                               minimum=1),
    }

    ss = _section(data, "solver")
    _check_keys(ss, ("branch_count", "rel_tol", "cluster_tol", "bracket"),
                "solver")
    bracket = _number_list(ss, "bracket", "solver")
    if bracket is not None:
        if len(bracket) != 2 or not bracket[0] < bracket[1] < 0:
            raise ConfigError("solver.bracket: expected [lo, hi] with "
                              "lo < hi < 0")
        bracket = tuple(bracket)
    solver = {
        "branch_count": _integer(ss, "branch_count", "solver", default=6,
                                 minimum=1),
        "rel_tol": _number(ss, "rel_tol", "solver", default=1e-10,
                           positive=True),
        "cluster_tol": _number(ss, "cluster_tol", "solver", default=1e-6,
                               positive=True),
        "bracket": bracket,
    }

    _check_keys(_section(data, "spectrum"), (), "spectrum")
    _check_keys(_section(data, "existence"), (), "existence")
    existence = {}

    hs = _section(data, "hiatus")
    _check_keys(hs, ("s0", "state_index", "eps_grid", "eps_count",
                     "eps_min_frac", "eps_max_frac"), "hiatus")
    eps_grid = _number_list(hs, "eps_grid", "hiatus")
    if eps_grid is not None:
        if any(e < 0 for e in eps_grid):
            raise ConfigError("hiatus.eps_grid: entries must be >= 0")
        if list(eps_grid) != sorted(eps_grid, reverse=True):
            raise ConfigError("hiatus.eps_grid: must be decreasing")
    hiatus = {
        "s0": _number(hs, "s0", "hiatus"),
        "state_index": _integer(hs, "state_index", "hiatus", default=0,
                                minimum=0),
        "eps_grid": eps_grid,
        "eps_count": _integer(hs, "eps_count", "hiatus", default=8,
                              minimum=2),
        "eps_min_frac": _number(hs, "eps_min_frac", "hiatus", default=1e-4,
                                positive=True),
        "eps_max_frac": _number(hs, "eps_max_frac", "hiatus", default=1e-2,
                                positive=True),
    }

    rs = _section(data, "regcheck")
    _check_keys(rs, ("kappa", "points", "d_grid", "d_count", "d_max"),
                "regcheck")
    regcheck = {
        "kappa": _number(rs, "kappa", "regcheck", default=1.0,
                         positive=True),
        "points": _number_list(rs, "points", "regcheck",
                               default=[0.15, 0.35, 0.5, 0.65, 0.85]),
        "d_grid": _number_list(rs, "d_grid", "regcheck"),
        "d_count": _integer(rs, "d_count", "regcheck", default=8,
                            minimum=3),
        "d_max": _number(rs, "d_max", "regcheck", positive=True),
    }
    for frac in regcheck["points"]:
        if not 0 < frac < 1:
            raise ConfigError("regcheck.points: fractions of arc length, "
                              "each strictly inside (0, 1)")

    es = _section(data, "eigfun")
    _check_keys(es, ("state_index", "member", "grid_points", "half_width",
                     "min_distance", "center"), "eigfun")
    eigfun = {
        "state_index": _integer(es, "state_index", "eigfun", default=0,
                                minimum=0),
        "member": _integer(es, "member", "eigfun", default=0, minimum=0),
        "grid_points": _integer(es, "grid_points", "eigfun", default=12,
                                minimum=2),
        "half_width": _number(es, "half_width", "eigfun", positive=True),
        "min_distance": _number(es, "min_distance", "eigfun", default=0.05,
                                positive=True),
        "center": _number_list(es, "center", "eigfun"),
    }
    if eigfun["center"] is not None and len(eigfun["center"]) != 3:
        raise ConfigError("eigfun.center: expected [x, y, z]")

    return RunConfig(alpha=alpha, workers=workers, curve_spec=curve_spec,
                     mesh=mesh, solver=solver, hiatus=hiatus,
                     regcheck=regcheck, eigfun=eigfun, existence=existence,
                     source_text=text)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
