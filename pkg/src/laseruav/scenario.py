"""Mission geometry and the default laser-charging scenario."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .battery import KibamParams
from .errors import NoFeasibleHoverPoint, ValidationError
from .laser import DlcParams, max_source_power
from .link import LinkParams, max_comm_distance
from .motor import ExternalForce, KinematicsConfig, QuadrotorParams

Point = tuple[float, float, float]


class Perspective(str, Enum):
    BATTERY = "battery"
    ENERGY = "energy"
    ADJUSTED = "adjusted"


@dataclass(frozen=True)
class Building:
    position: Point
    height: float

    @property
    def rooftop(self) -> Point:
        x, y, z = self.position
        return (x, y, z + self.height)


def default_buildings(count: int = 10, x_span: tuple[float, float] = (0.0, 2000.0),
                      lateral_offset: float = 250.0,
                      heights: tuple[float, ...] = (60.0, 80.0, 100.0)) -> tuple[Building, ...]:
    """Buildings spread evenly along the x axis, lowest ones at both ends."""
    x0, x1 = x_span
    out = []
    for k in range(count):
        x = x0 + (x1 - x0) * (k + 0.5) / count
        # distance (in building slots) to the nearer end, mapped onto the height levels
        rank = min(k, count - 1 - k)
        level = min(rank * len(heights) // max((count + 1) // 2, 1), len(heights) - 1)
        out.append(Building((x, lateral_offset, 0.0), heights[level]))
    return tuple(out)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate and plan one mission.

    Times are in seconds; ``slot`` is the hover/rest quantum.  ``t_max`` is
    the mission time budget.  ``flight_voltage``/``hover_voltage`` override
    the regime voltages used by the adjusted perspective (``None`` derives
    them from the motor model).
    """

    w0: Point = (0.0, 0.0, 50.0)
    wF: Point = (2000.0, 0.0, 50.0)
    source: DlcParams = field(default_factory=DlcParams)
    device: LinkParams = field(default_factory=LinkParams)
    buildings: tuple[Building, ...] = field(default_factory=default_buildings)
    z_min: float = 50.0
    z_max: float = 100.0
    t_max: float = 800.0
    eta0: float = 0.05
    slot: float = 1.0
    quad: QuadrotorParams = field(default_factory=QuadrotorParams)
    battery: KibamParams = field(default_factory=KibamParams)
    kin: KinematicsConfig = field(default_factory=KinematicsConfig)
    external_force: ExternalForce = field(default_factory=ExternalForce)
    recharge: bool = True
    flight_voltage: float | None = None
    hover_voltage: float | None = None
    eta3_literal: bool = False

    def __post_init__(self):
        problems = []
        if not self.z_min <= self.z_max:
            problems.append(f"z_min={self.z_min} exceeds z_max={self.z_max}")
        for name in ("w0", "wF"):
            z = getattr(self, name)[2]
            if not self.z_min <= z <= self.z_max:
                problems.append(f"{name} altitude {z} outside [{self.z_min}, {self.z_max}]")
        if not self.t_max > 0:
            problems.append(f"t_max must be > 0 (got {self.t_max!r})")
        if not 0 <= self.eta0 < 1:
            problems.append(f"eta0 must lie in [0, 1) (got {self.eta0!r})")
        if not self.slot > 0:
            problems.append(f"slot must be > 0 (got {self.slot!r})")
        for name in ("flight_voltage", "hover_voltage"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                problems.append(f"{name} must be > 0 (got {v!r})")
        if problems:
            raise ValidationError(problems)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    @property
    def restable_buildings(self) -> tuple[Building, ...]:
        return tuple(b for b in self.buildings if self.z_min <= b.rooftop[2] <= self.z_max)

    @property
    def bank_capacity(self) -> float:
        return 2.0 * self.battery.capacity


@lru_cache(maxsize=256)
def comm_range(lp: LinkParams) -> float:
    return max_comm_distance(lp)


def _path_length(p, a, b) -> float:
    return math.dist(a, p) + math.dist(p, b)


@lru_cache(maxsize=256)
def hover_point(sc: Scenario) -> Point:
    """Hover location at ``z_min`` exactly at communication range from the device.

    Among points of that circle, the one minimising the ``w0 -> wU -> wF``
    path length is returned.
    """
    d_star = comm_range(sc.device)
    dx, dy, dz = sc.device.device_pos
    clearance = sc.z_min - dz
    if d_star <= abs(clearance):
        raise NoFeasibleHoverPoint(
            f"communication range {d_star:.2f} m does not reach altitude z_min={sc.z_min}")
    radius = math.sqrt(d_star ** 2 - clearance ** 2)

    def at(theta):
        return (dx + radius * math.cos(theta), dy + radius * math.sin(theta), sc.z_min)

    def cost(theta):
        return _path_length(at(theta), sc.w0, sc.wF)

    grid = np.linspace(-math.pi, math.pi, 721)
    costs = np.array([cost(t) for t in grid])
    k = int(np.argmin(costs))
    step = grid[1] - grid[0]
    res = minimize_scalar(cost, bounds=(grid[k] - step, grid[k] + step), method="bounded",
                          options={"xatol": 1e-12})
    theta = res.x if res.fun <= costs[k] else grid[k]
    return at(theta)


@lru_cache(maxsize=256)
def source_power(sc: Scenario) -> float:
    """Emitted laser power: configured value, else the charger cap at the hover point."""
    if sc.source.p_s is not None:
        return sc.source.p_s
    d = math.dist(hover_point(sc), sc.source.source_pos)
    return float(max_source_power(d, sc.battery, sc.source))


def default_scenario(**changes) -> Scenario:
    return Scenario(**changes)
