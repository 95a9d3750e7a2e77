"""YAML run configuration.

Every section is optional; missing keys fall back to the defaults of the
corresponding parameter class.  Layout::

    quad:        QuadrotorParams fields
    battery:     KibamParams fields
    source:      DlcParams fields
    link:        LinkParams fields
    kinematics:  t_rot, speed_factor, calibrate_flight_time
    scenario:    w0, wF, z_min, z_max, t_max, eta0, slot, recharge,
                 flight_voltage, hover_voltage, eta3_literal,
                 wind | external_force, buildings | building_layout
    sweep:       variable, range: [lo, hi, step], approach, hover_slots
    perspective: battery | energy | adjusted
    output_dir, format (csv | table), workers
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .battery import KibamParams
from .errors import ConfigParseError, ValidationError
from .laser import DlcParams
from .link import LinkParams
from .motor import ExternalForce, KinematicsConfig, QuadrotorParams
from .scenario import Building, Perspective, Scenario, default_buildings

SWEEP_VARIABLES = ("wind_x", "wind_y", "wind_z", "distance", "v_max", "eta0",
                   "battery_size", "t_max")
APPROACHES = ("optimal", "direct", "traj1", "traj2")
FORMATS = ("csv", "table")
TOP_LEVEL = ("quad", "battery", "source", "link", "kinematics", "scenario", "sweep",
             "perspective", "output_dir", "format", "workers")


@dataclass(frozen=True)
class SweepConfig:
    variable: str
    lo: float
    hi: float
    step: float
    approach: str = "optimal"
    hover_slots: int | None = None

    def __post_init__(self):
        problems = []
        if self.variable not in SWEEP_VARIABLES:
            problems.append(f"sweep.variable must be one of {SWEEP_VARIABLES} (got {self.variable!r})")
        if not all(math.isfinite(v) for v in (self.lo, self.hi, self.step)):
            problems.append("sweep.range values must be finite")
        else:
            if not self.step > 0:
                problems.append(f"sweep.range step must be > 0 (got {self.step!r})")
            if self.hi < self.lo:
                problems.append(f"sweep.range is empty: hi={self.hi} < lo={self.lo}")
        if self.approach not in APPROACHES:
            problems.append(f"sweep.approach must be one of {APPROACHES} (got {self.approach!r})")
        if self.hover_slots is not None and self.hover_slots < 0:
            problems.append(f"sweep.hover_slots must be >= 0 (got {self.hover_slots!r})")
        if problems:
            raise ValidationError(problems)

    def values(self) -> list[float]:
        n = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        # round away accumulated binary noise so printed inputs stay clean
        return [float(f"{self.lo + k * self.step:.12g}") for k in range(n)]


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario = field(default_factory=Scenario)
    perspective: Perspective = Perspective.BATTERY
    sweep: SweepConfig | None = None
    output_dir: Path = Path("results")
    format: str = "csv"
    workers: int = 1


# -- YAML helpers ------------------------------------------------------------

def _line_index(node, path=(), out=None) -> dict[tuple, int]:
    """Map every key path of a composed YAML tree to its 1-based line."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = path + (str(k.value),)
            out[p] = k.start_mark.line + 1
            _line_index(v, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            p = path + (i,)
            out[p] = v.start_mark.line + 1
            _line_index(v, p, out)
    return out


class _Reader:
    def __init__(self, lines: dict[tuple, int]):
        self.lines = lines

    def fail(self, path, msg):
        name = ".".join(str(p) for p in path)
        raise ConfigParseError(msg, line=self.lines.get(tuple(path)), field=name)

    def number(self, value, path, integer=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if integer:
            if float(value) != int(value):
                self.fail(path, f"expected an integer, got {value!r}")
            return int(value)
        return float(value)

    def optional_number(self, value, path):
        return None if value is None else self.number(value, path)

    def boolean(self, value, path):
        if not isinstance(value, bool):
            self.fail(path, f"expected true/false, got {value!r}")
        return value

    def point(self, value, path, dim=3):
        if not isinstance(value, (list, tuple)) or len(value) != dim:
            self.fail(path, f"expected a list of {dim} numbers, got {value!r}")
        return tuple(self.number(v, path + (i,)) for i, v in enumerate(value))

    def mapping(self, value, path):
        if value is None:
            return {}
        if not isinstance(value, dict):
            self.fail(path, f"expected a mapping, got {type(value).__name__}")
        return value


def _unknown(section: dict, allowed, path, problems):
    for k in section:
        if k not in allowed:
            problems.append(f"{'.'.join(path + (str(k),))}: unknown key")


def _build(cls, values: dict, section: str, problems: list):
    try:
        return cls(**values)
    except ValidationError as exc:
        problems.extend(f"{section}: {p}" for p in exc.problems)
        return None


def _params_section(rd: _Reader, raw: dict, name: str, cls, problems, points=()):
    sec = rd.mapping(raw.get(name), (name,))
    allowed = {f.name for f in fields(cls)}
    _unknown(sec, allowed, (name,), problems)
    vals = {}
    for k, v in sec.items():
        if k not in allowed:
            continue
        if k in points:
            vals[k] = rd.point(v, (name, k))
        elif k == "p_s":
            vals[k] = rd.optional_number(v, (name, k))
        else:
            vals[k] = rd.number(v, (name, k))
    return _build(cls, vals, name, problems)


_SCALAR_SCENARIO = ("z_min", "z_max", "t_max", "eta0", "slot")
_OPTIONAL_SCENARIO = ("flight_voltage", "hover_voltage")
_BOOL_SCENARIO = ("recharge", "eta3_literal")
_SCENARIO_KEYS = (("w0", "wF", "wind", "external_force", "buildings", "building_layout")
                  + _SCALAR_SCENARIO + _OPTIONAL_SCENARIO + _BOOL_SCENARIO)


def _buildings(rd: _Reader, sec: dict, problems):
    if "buildings" in sec and "building_layout" in sec:
        problems.append("scenario: give either buildings or building_layout, not both")
    if "buildings" in sec:
        items = sec["buildings"] or []
        if not isinstance(items, list):
            rd.fail(("scenario", "buildings"), "expected a list of buildings")
        out = []
        for i, b in enumerate(items):
            path = ("scenario", "buildings", i)
            b = rd.mapping(b, path)
            _unknown(b, ("position", "height"), path, problems)
            if "position" not in b or "height" not in b:
                problems.append(f"scenario.buildings.{i}: needs position and height")
                continue
            out.append(Building(rd.point(b["position"], path + ("position",)),
                                rd.number(b["height"], path + ("height",))))
        return tuple(out)
    lay = rd.mapping(sec.get("building_layout"), ("scenario", "building_layout"))
    _unknown(lay, ("count", "x_span", "lateral_offset", "heights"),
             ("scenario", "building_layout"), problems)
    kw = {}
    p = ("scenario", "building_layout")
    if "count" in lay:
        kw["count"] = rd.number(lay["count"], p + ("count",), integer=True)
        if kw["count"] < 0:
            problems.append("scenario.building_layout.count must be >= 0")
            kw["count"] = 0
    if "x_span" in lay:
        kw["x_span"] = rd.point(lay["x_span"], p + ("x_span",), dim=2)
    if "lateral_offset" in lay:
        kw["lateral_offset"] = rd.number(lay["lateral_offset"], p + ("lateral_offset",))
    if "heights" in lay:
        hs = lay["heights"]
        if not isinstance(hs, list) or not hs:
            rd.fail(p + ("heights",), "expected a non-empty list of heights")
        kw["heights"] = tuple(rd.number(h, p + ("heights", i)) for i, h in enumerate(hs))
    return default_buildings(**kw)


def _scenario(rd: _Reader, raw: dict, parts: dict, problems) -> Scenario | None:
    sec = rd.mapping(raw.get("scenario"), ("scenario",))
    _unknown(sec, _SCENARIO_KEYS, ("scenario",), problems)
    kw: dict[str, Any] = {}
    for k in ("w0", "wF"):
        if k in sec:
            kw[k] = rd.point(sec[k], ("scenario", k))
    for k in _SCALAR_SCENARIO:
        if k in sec:
            kw[k] = rd.number(sec[k], ("scenario", k))
    for k in _OPTIONAL_SCENARIO:
        if k in sec:
            kw[k] = rd.optional_number(sec[k], ("scenario", k))
    for k in _BOOL_SCENARIO:
        if k in sec:
            kw[k] = rd.boolean(sec[k], ("scenario", k))
    kw["buildings"] = _buildings(rd, sec, problems)
    quad = parts["quad"]
    if "wind" in sec and "external_force" in sec:
        problems.append("scenario: give either wind or external_force, not both")
    elif "external_force" in sec:
        kw["external_force"] = ExternalForce(*rd.point(sec["external_force"],
                                                       ("scenario", "external_force")))
    elif "wind" in sec and quad is not None:
        kw["external_force"] = ExternalForce.from_wind(rd.point(sec["wind"], ("scenario", "wind")),
                                                       quad)
    if any(parts[k] is None for k in parts):
        return None
    kw.update(quad=parts["quad"], battery=parts["battery"], source=parts["source"],
              device=parts["link"], kin=parts["kinematics"])
    return _build(Scenario, kw, "scenario", problems)


def _kinematics(rd: _Reader, raw: dict, problems):
    sec = rd.mapping(raw.get("kinematics"), ("kinematics",))
    _unknown(sec, ("t_rot", "speed_factor", "calibrate_flight_time"), ("kinematics",), problems)
    vals = {k: rd.number(sec[k], ("kinematics", k)) for k in ("t_rot", "speed_factor") if k in sec}
    target = rd.optional_number(sec.get("calibrate_flight_time"),
                                ("kinematics", "calibrate_flight_time"))
    if target is not None and "speed_factor" in sec:
        problems.append("kinematics: speed_factor and calibrate_flight_time are exclusive")
    return _build(KinematicsConfig, vals, "kinematics", problems), target


def _sweep(rd: _Reader, raw: dict, problems) -> SweepConfig | None:
    if raw.get("sweep") is None:
        return None
    sec = rd.mapping(raw["sweep"], ("sweep",))
    _unknown(sec, ("variable", "range", "approach", "hover_slots"), ("sweep",), problems)
    if "variable" not in sec or "range" not in sec:
        problems.append("sweep: needs variable and range")
        return None
    lo, hi, step = rd.point(sec["range"], ("sweep", "range"))
    hs = sec.get("hover_slots")
    hs = None if hs is None else rd.number(hs, ("sweep", "hover_slots"), integer=True)
    return _build(SweepConfig, dict(variable=str(sec["variable"]), lo=lo, hi=hi, step=step,
                                    approach=str(sec.get("approach", "optimal")),
                                    hover_slots=hs), "sweep", problems)


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    """Parse and validate a YAML config given as text."""
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigParseError(str(exc.problem or exc), line=mark.line + 1 if mark else None) from exc
    except yaml.YAMLError as exc:
        raise ConfigParseError(str(exc)) from exc
    rd = _Reader(_line_index(node) if node is not None else {})
    raw = rd.mapping(raw, ())
    problems: list[str] = []
    _unknown(raw, TOP_LEVEL, (), problems)

    parts = {
        "quad": _params_section(rd, raw, "quad", QuadrotorParams, problems),
        "battery": _params_section(rd, raw, "battery", KibamParams, problems),
        "source": _params_section(rd, raw, "source", DlcParams, problems, points=("source_pos",)),
        "link": _params_section(rd, raw, "link", LinkParams, problems, points=("device_pos",)),
    }
    parts["kinematics"], target = _kinematics(rd, raw, problems)
    sc = _scenario(rd, raw, parts, problems)
    sweep = _sweep(rd, raw, problems)

    persp = raw.get("perspective", "battery")
    if persp not in [p.value for p in Perspective]:
        problems.append(f"perspective must be battery, energy or adjusted (got {persp!r})")
        persp = "battery"
    fmt = raw.get("format", "csv")
    if fmt not in FORMATS:
        problems.append(f"format must be one of {FORMATS} (got {fmt!r})")
    workers = rd.number(raw.get("workers", 1), ("workers",), integer=True)
    if workers < 1:
        problems.append(f"workers must be >= 1 (got {workers})")
    if problems:
        raise ValidationError(problems)

    if target is not None:
        from .planner import calibrate_kinematics
        sc = sc.with_(kin=calibrate_kinematics(sc, target))
    out = Path(str(raw.get("output_dir", "results")))
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out
    return RunConfig(sc, Perspective(persp), sweep, out, fmt, workers)


def load_config(path) -> RunConfig:
    """Read a UTF-8 YAML config file; an empty file yields all defaults."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text)


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes)
