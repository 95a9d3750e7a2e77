"""Slot-by-slot mission simulation and the three state-of-charge perspectives.

A mission is a route (flight legs between waypoints) with two kinds of
dwell: hovering at the communication point, which draws motor and radio
current while harvesting, and resting on a rooftop, which only harvests.
Flight legs are cut into pieces no longer than one slot so the battery
roles are re-evaluated at slot granularity throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .battery import bank_step, charge_current_from_power, discharge_current
from .errors import Depleted, PlanExceedsBudget
from .laser import received_power
from .link import comm_energy
from .motor import (
    StagePlan, derive_constants, hover_current, hover_power, hover_rotor_speed,
    motor_current, motor_voltage, plan_stages, stage_current, travel_energy,
)
from .scenario import Building, Perspective, Point, Scenario, hover_point, source_power

HOVER = "hover"
REST = "rest"
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class Route:
    """Waypoint sequence with the dwell kind performed at each interior waypoint."""

    name: str
    waypoints: tuple[Point, ...]
    dwell: tuple[str, ...]
    building: Building | None = None

    def legs(self, sc: Scenario) -> tuple[StagePlan, ...]:
        return tuple(plan_stages(a, b, sc.kin, sc.quad.v_max)
                     for a, b in zip(self.waypoints[:-1], self.waypoints[1:]))

    def flight_time(self, sc: Scenario) -> float:
        return sum(leg.duration for leg in self.legs(sc))

    def length(self) -> float:
        return sum(math.dist(a, b) for a, b in zip(self.waypoints[:-1], self.waypoints[1:]))


def direct_route(sc: Scenario) -> Route:
    return Route("direct", (sc.w0, hover_point(sc), sc.wF), (HOVER,))


def building_routes(sc: Scenario, b: Building) -> tuple[Route, Route]:
    """Both visiting orders for resting on ``b``: hover first, then rest first."""
    wu, wb = hover_point(sc), b.rooftop
    return (Route("hover-rest", (sc.w0, wu, wb, sc.wF), (HOVER, REST), b),
            Route("rest-hover", (sc.w0, wb, wu, sc.wF), (REST, HOVER), b))


@dataclass(frozen=True)
class TrajectoryPlan:
    route: Route
    hover_slots: int
    rest_slots: int = 0

    @property
    def waypoints(self) -> tuple[Point, ...]:
        return self.route.waypoints

    @property
    def hover_point(self) -> Point:
        return self.route.waypoints[1 + self.route.dwell.index(HOVER)]

    @property
    def rest_building(self) -> Building | None:
        return self.route.building

    def stage_plans(self, sc: Scenario) -> tuple[StagePlan, ...]:
        return self.route.legs(sc)

    def dwell_counts(self) -> tuple[int, ...]:
        return tuple(self.hover_slots if k == HOVER else self.rest_slots for k in self.route.dwell)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Joules consumed in flight, while hovering (radio included), and harvested."""

    flight: float = 0.0
    hover: float = 0.0
    comm: float = 0.0
    harvest: float = 0.0


@dataclass(frozen=True)
class MissionOutcome:
    plan: TrajectoryPlan
    perspective: Perspective
    delta: int
    rest: int
    t_flight: float
    t_total: float
    eta1: float
    eta2: float
    eta3: float
    feasible: bool
    energy: EnergyBreakdown
    depletion_time: float | None = None
    spilled: float = 0.0

    @property
    def eta(self) -> float:
        return {Perspective.BATTERY: self.eta1, Perspective.ENERGY: self.eta2,
                Perspective.ADJUSTED: self.eta3}[self.perspective]


class MissionModel:
    """Currents, powers and schedule pieces derived once per scenario."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.consts = derive_constants(sc.quad)
        self.hover_pt = hover_point(sc)
        self.p_s = source_power(sc)
        f = sc.external_force
        self.hover_control_current = hover_current(f, sc.quad)
        self.hover_current = discharge_current(self.hover_control_current, sc.device.p_u, sc.battery)
        self.hover_motor_power = hover_power(f, self.consts, sc.quad)
        self.hover_total_power = self.hover_motor_power + sc.device.p_u

    # -- regime voltages used by the adjusted perspective
    @cached_property
    def flight_voltage(self) -> float:
        if self.sc.flight_voltage is not None:
            return self.sc.flight_voltage
        v = self.sc.quad.v_max
        return float(motor_voltage(motor_current(v, 0.0, self.sc.quad), v, self.sc.quad))

    @cached_property
    def hover_voltage(self) -> float:
        if self.sc.hover_voltage is not None:
            return self.sc.hover_voltage
        v = hover_rotor_speed(self.sc.external_force, self.sc.quad)
        return float(motor_voltage(motor_current(v, 0.0, self.sc.quad), v, self.sc.quad))

    def charge_current_at(self, point: Point) -> float:
        if not self.sc.recharge:
            return 0.0
        p0 = received_power(math.dist(point, self.sc.source.source_pos), self.sc.source, self.p_s)
        return float(charge_current_from_power(p0, self.sc.battery))

    def dwell(self, kind: str, point: Point) -> tuple[float, float]:
        """(discharge, charge) currents of one dwell slot at ``point``."""
        i_ch = self.charge_current_at(point)
        if kind == HOVER:
            return self.hover_current, i_ch
        return 0.0, i_ch

    def dwell_harvest_power(self, kind: str, point: Point) -> float:
        return self.charge_current_at(point) * self.sc.battery.e_nom

    def leg_chunks(self, leg: StagePlan) -> list[tuple[float, float]]:
        """(discharge current, duration) pieces of a flight leg."""
        out = []
        for st in leg.stages:
            if st.duration <= 0:
                continue
            n = max(int(math.ceil(st.duration / self.sc.slot - _TIME_EPS)), 1)
            cur = stage_current(st.kind, st.rotor_speed, self.sc.quad)
            out.extend([(cur, st.duration / n)] * n)
        return out

    def route_schedule(self, route: Route):
        """Flight chunks per leg and dwell currents per dwell point."""
        legs = route.legs(self.sc)
        chunks = [self.leg_chunks(leg) for leg in legs]
        dwells = [self.dwell(kind, route.waypoints[k + 1]) for k, kind in enumerate(route.dwell)]
        return legs, chunks, dwells

    def plan_energy(self, route: Route, counts: Sequence[int]) -> EnergyBreakdown:
        slot = self.sc.slot
        flight = sum(travel_energy(leg, self.consts) for leg in route.legs(self.sc))
        hover_s = sum(n for kind, n in zip(route.dwell, counts) if kind == HOVER) * slot
        harvest = sum(n * slot * self.dwell_harvest_power(kind, route.waypoints[k + 1])
                      for k, (kind, n) in enumerate(zip(route.dwell, counts)))
        e_comm = comm_energy(self.sc.device.p_u, hover_s)
        return EnergyBreakdown(flight, hover_s * self.hover_motor_power + e_comm, e_comm, harvest)

    # -- perspectives
    def energy_etas(self, flight, hover, harvest):
        """Energy-perspective and adjusted SOC; arguments may be arrays."""
        cap = self.sc.bank_capacity
        e0 = cap * self.sc.battery.e_nom
        e1 = cap * self.flight_voltage
        e2 = cap * self.hover_voltage
        eta2 = 1.0 - (flight + hover - harvest) / e0
        if self.sc.eta3_literal:
            eta3 = 1.0 - flight / e1 + hover / e2 - harvest / e0
        else:
            eta3 = 1.0 - flight / e1 - hover / e2 + harvest / e0
        return eta2, eta3


@lru_cache(maxsize=64)
def mission_model(sc: Scenario) -> MissionModel:
    return MissionModel(sc)


def soc_perspective(eta1: float, energy: EnergyBreakdown, persp: Perspective, sc: Scenario) -> float:
    """Terminal SOC under ``persp``; ``eta1`` is the bank state of charge."""
    persp = Perspective(persp)
    if persp == Perspective.BATTERY:
        return eta1
    eta2, eta3 = mission_model(sc).energy_etas(energy.flight, energy.hover, energy.harvest)
    return eta2 if persp == Perspective.ENERGY else eta3


class BankBatch:
    """Mutable batch of two-battery banks advanced in lock-step."""

    def __init__(self, y1, y2, dead=None, spilled=None, t=None, t_dead=None):
        self.y1 = y1
        self.y2 = y2
        m = y1.shape[0]
        self.dead = np.zeros(m, dtype=bool) if dead is None else dead
        self.spilled = np.zeros(m) if spilled is None else spilled
        self.t = np.zeros(m) if t is None else t
        self.t_dead = np.full(m, np.nan) if t_dead is None else t_dead

    @classmethod
    def full(cls, m: int, sc: Scenario) -> "BankBatch":
        p = sc.battery
        return cls(np.full((m, 2), p.y1_max), np.full((m, 2), p.y2_max))

    def __len__(self):
        return self.y1.shape[0]

    def step(self, i_dis, i_ch, dt, sc: Scenario):
        n1, n2, empty, spill = bank_step(self.y1, self.y2, i_dis, i_ch, dt, sc.battery)
        # zero-length padding steps must leave rows untouched
        active = np.broadcast_to(np.asarray(dt) > 0, empty.shape)
        empty = empty & active
        newly = empty & ~self.dead
        self.t_dead = np.where(newly, self.t, self.t_dead)
        self.dead = self.dead | empty
        live = ~self.dead & active
        self.y1 = np.where(live[:, None], n1, self.y1)
        self.y2 = np.where(live[:, None], n2, self.y2)
        self.spilled = self.spilled + np.where(live, spill, 0.0)
        self.t = self.t + dt
        return self

    def run(self, chunks, sc: Scenario):
        for i_dis, dt in chunks:
            self.step(i_dis, 0.0, dt, sc)
        return self

    def take(self, idx) -> "BankBatch":
        return BankBatch(self.y1[idx], self.y2[idx], self.dead[idx], self.spilled[idx],
                         self.t[idx], self.t_dead[idx])

    def copy(self) -> "BankBatch":
        return self.take(slice(None))

    @classmethod
    def concat(cls, batches) -> "BankBatch":
        batches = list(batches)
        return cls(*(np.concatenate([getattr(b, a) for b in batches])
                     for a in ("y1", "y2", "dead", "spilled", "t", "t_dead")))

    def soc(self, sc: Scenario):
        return (self.y1.sum(axis=1) + self.y2.sum(axis=1)) / sc.bank_capacity


def _plan_steps(model: MissionModel, plan: TrajectoryPlan):
    """Full (i_dis, i_ch, dt) sequence of a plan."""
    legs, chunks, dwells = model.route_schedule(plan.route)
    steps = [(c, 0.0, dt) for c, dt in chunks[0]]
    for k, n in enumerate(plan.dwell_counts()):
        i_dis, i_ch = dwells[k]
        steps.extend([(i_dis, i_ch, model.sc.slot)] * n)
        steps.extend((c, 0.0, dt) for c, dt in chunks[k + 1])
    return steps


def simulate_missions(plans: Sequence[TrajectoryPlan], sc: Scenario,
                      persp: Perspective) -> list[MissionOutcome]:
    """Simulate many plans at once; each one gets its own full schedule."""
    persp = Perspective(persp)
    model = mission_model(sc)
    schedules = [_plan_steps(model, p) for p in plans]
    m, length = len(plans), max((len(s) for s in schedules), default=0)
    arr = np.zeros((3, m, length))
    for j, s in enumerate(schedules):
        if s:
            arr[:, j, :len(s)] = np.asarray(s).T
    bank = BankBatch.full(m, sc)
    for k in range(length):
        bank.step(arr[0, :, k], arr[1, :, k], arr[2, :, k], sc)
    eta1 = bank.soc(sc)

    out = []
    for j, plan in enumerate(plans):
        t_fl = plan.route.flight_time(sc)
        t_total = t_fl + (plan.hover_slots + plan.rest_slots) * sc.slot
        energy = model.plan_energy(plan.route, plan.dwell_counts())
        eta2, eta3 = model.energy_etas(energy.flight, energy.hover, energy.harvest)
        etas = {Perspective.BATTERY: float(eta1[j]), Perspective.ENERGY: float(eta2),
                Perspective.ADJUSTED: float(eta3)}
        dead = bool(bank.dead[j])
        feasible = (not dead and t_total <= sc.t_max + _TIME_EPS and etas[persp] >= sc.eta0)
        out.append(MissionOutcome(
            plan=plan, perspective=persp, delta=plan.hover_slots, rest=plan.rest_slots,
            t_flight=t_fl, t_total=t_total, eta1=etas[Perspective.BATTERY],
            eta2=etas[Perspective.ENERGY], eta3=etas[Perspective.ADJUSTED], feasible=feasible,
            energy=energy, depletion_time=float(bank.t_dead[j]) if dead else None,
            spilled=float(bank.spilled[j])))
    return out


def simulate_mission(plan: TrajectoryPlan, sc: Scenario, persp: Perspective,
                     strict: bool = False) -> MissionOutcome:
    """Simulate one plan slot by slot.

    A plan longer than the time budget raises ``PlanExceedsBudget``.
    Battery depletion yields an infeasible outcome with ``depletion_time``
    set to the start of the slot in which it happened, or raises
    ``Depleted`` when ``strict``.
    """
    t_total = plan.route.flight_time(sc) + (plan.hover_slots + plan.rest_slots) * sc.slot
    if t_total > sc.t_max + _TIME_EPS:
        raise PlanExceedsBudget(f"plan lasts {t_total:.2f} s, budget is {sc.t_max} s")
    outcome = simulate_missions([plan], sc, persp)[0]
    if strict and outcome.depletion_time is not None:
        raise Depleted(outcome.depletion_time, "bank depleted during the mission")
    return outcome
