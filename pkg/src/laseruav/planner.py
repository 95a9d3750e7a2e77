"""Hover/rest time optimisation, benchmark trajectories and the flight graph."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import networkx as nx
import numpy as np
from scipy.optimize import brentq

from .errors import NoFeasibleDelta, NoFeasiblePlan, NotConverged, ValidationError
from .mission import (
    HOVER, BankBatch, MissionOutcome, Route, TrajectoryPlan, building_routes, direct_route,
    mission_model, simulate_mission,
)
from .motor import plan_stages
from .scenario import Building, Perspective, Scenario, hover_point

log = logging.getLogger(__name__)

_TIME_EPS = 1e-9
# flight time of the direct path used to pin the cruise speed
REFERENCE_FLIGHT_TIME = 59.35


def budget_slots(sc: Scenario, t_flight: float) -> int:
    """Dwell slots that fit in the time budget next to ``t_flight`` seconds of flight."""
    return int(math.floor((sc.t_max - t_flight) / sc.slot + _TIME_EPS))


# -- flight graph ------------------------------------------------------------

def build_flight_graph(sc: Scenario) -> nx.DiGraph:
    """Complete directed graph over w0, wF, wU and restable rooftops.

    Edge weight ``duration`` is the stage-model flight time between nodes.
    """
    g = nx.DiGraph()
    g.add_node("w0", pos=sc.w0)
    g.add_node("wF", pos=sc.wF)
    g.add_node("wU", pos=hover_point(sc))
    for k, b in enumerate(sc.buildings):
        if b in sc.restable_buildings:
            g.add_node(f"b{k}", pos=b.rooftop, building=b)
    for u, pu in g.nodes(data="pos"):
        for v, pv in g.nodes(data="pos"):
            if u != v:
                g.add_edge(u, v, duration=plan_stages(pu, pv, sc.kin, sc.quad.v_max).duration)
    return g


def candidate_routes(sc: Scenario, graph: nx.DiGraph | None = None) -> list[Route]:
    """Direct route followed by both orderings for every restable building (1 + 2B)."""
    g = build_flight_graph(sc) if graph is None else graph
    routes = [direct_route(sc)]
    for node, b in g.nodes(data="building"):
        if b is not None:
            routes.extend(building_routes(sc, b))
    return routes


def route_duration(graph: nx.DiGraph, nodes) -> float:
    return nx.path_weight(graph, list(nodes), weight="duration")


def calibrate_kinematics(sc: Scenario, target: float = REFERENCE_FLIGHT_TIME):
    """Cruise-speed factor making the direct path last ``target`` seconds."""
    route = direct_route(sc)

    def excess(f):
        return route.flight_time(sc.with_(kin=replace(sc.kin, speed_factor=f))) - target

    lo, hi = 1e-4, 1.0
    if excess(hi) > 0:
        raise NotConverged(f"direct path cannot be flown in {target} s")
    f = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return replace(sc.kin, speed_factor=f)


# -- exhaustive dwell grid ---------------------------------------------------

@dataclass(frozen=True)
class RouteGrid:
    """Terminal states of every dwell-count combination that fits the budget.

    ``delta`` and ``rest`` hold the hover and rest slot counts per row.
    """

    route: Route
    t_flight: float
    n_max: int
    delta: np.ndarray
    rest: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    eta3: np.ndarray
    dead: np.ndarray

    def eta(self, persp: Perspective) -> np.ndarray:
        return {Perspective.BATTERY: self.eta1, Perspective.ENERGY: self.eta2,
                Perspective.ADJUSTED: self.eta3}[Perspective(persp)]

    def feasible(self, persp: Perspective, eta0: float) -> np.ndarray:
        return ~self.dead & (self.eta(persp) >= eta0)


def _expand_dwells(sc: Scenario, route: Route, n_max: int, minimum=None):
    """Bank states just before the last leg for every admissible dwell combination.

    Each stored prefix state is advanced one slot at a time while the
    budget allows, so every distinct partial schedule is simulated once.
    Depleted prefixes are not extended.  ``minimum`` gives per-dwell lower
    bounds on the slot counts.
    """
    model = mission_model(sc)
    _, chunks, dwells = model.route_schedule(route)
    nd = len(dwells)
    minimum = [0] * nd if minimum is None else list(minimum)
    bank = BankBatch.full(1, sc).run(chunks[0], sc)
    counts = np.zeros((1, 0), dtype=int)
    for k, (i_dis, i_ch) in enumerate(dwells):
        later = sum(minimum[k + 1:])
        cur, cur_counts = bank, counts
        cur_used = counts.sum(axis=1)
        banks, blocks = [], []
        n = 0
        while len(cur):
            if n >= minimum[k]:
                banks.append(cur)
                blocks.append(np.column_stack([cur_counts, np.full(len(cur), n)]))
            keep = (cur_used + n + 1 + later <= n_max) & ~cur.dead
            if not keep.any():
                break
            cur = cur.take(keep).step(i_dis, i_ch, sc.slot, sc)
            cur_counts, cur_used = cur_counts[keep], cur_used[keep]
            n += 1
        if not banks:
            return BankBatch.full(0, sc), np.zeros((0, nd), dtype=int), chunks[-1]
        bank = BankBatch.concat(banks)
        counts = np.concatenate(blocks)
        if k + 1 < nd:
            bank.run(chunks[k + 1], sc)
    return bank, counts, chunks[-1]


def _dwell_energy(sc: Scenario, route: Route, counts: np.ndarray):
    """Analytic (delta, rest, eta2, eta3) per row of dwell counts."""
    model = mission_model(sc)
    is_hover = np.array([kind == HOVER for kind in route.dwell], dtype=bool)
    delta = counts[:, is_hover].sum(axis=1)
    rest = counts[:, ~is_hover].sum(axis=1)
    flight = model.plan_energy(route, [0] * len(route.dwell)).flight
    p_harv = np.array([model.dwell_harvest_power(kind, route.waypoints[j + 1])
                       for j, kind in enumerate(route.dwell)])
    hover_e = delta * sc.slot * model.hover_total_power
    harvest = counts @ p_harv * sc.slot
    eta2, eta3 = model.energy_etas(flight, hover_e, harvest)
    return delta, rest, np.asarray(eta2, float), np.asarray(eta3, float)


def evaluate_route_grid(sc: Scenario, route: Route) -> RouteGrid:
    """Simulate every dwell combination of ``route`` that fits the budget."""
    t_fl = route.flight_time(sc)
    n_max = budget_slots(sc, t_fl)
    if n_max < 0:
        empty = np.zeros(0)
        return RouteGrid(route, t_fl, n_max, empty.astype(int), empty.astype(int),
                         empty, empty, empty, empty.astype(bool))
    bank, counts, last = _expand_dwells(sc, route, n_max)
    bank.run(last, sc)
    delta, rest, eta2, eta3 = _dwell_energy(sc, route, counts)
    return RouteGrid(route, t_fl, n_max, delta, rest, bank.soc(sc), eta2, eta3, bank.dead)


def search_route(sc: Scenario, route: Route, persp: Perspective, min_delta: int = 0,
                 min_rest: int = 0, block: int = 4096):
    """Feasible cell of ``route`` with the largest Δ, then the smallest T′.

    Equivalent to scanning the full grid: candidates are visited in that
    preference order and the final leg is simulated block by block, so the
    scan stops at the first feasible cell.  Cells whose analytic energy
    SOC already fails, or whose prefix depleted, are never flown further.
    Returns ``(delta, rest)`` or ``None``.
    """
    persp = Perspective(persp)
    n_max = budget_slots(sc, route.flight_time(sc))
    minimum = [min_delta if kind == HOVER else min_rest for kind in route.dwell]
    if n_max < sum(minimum):
        return None
    bank, counts, last = _expand_dwells(sc, route, n_max, minimum)
    if not len(bank):
        return None
    delta, rest, eta2, eta3 = _dwell_energy(sc, route, counts)
    ok = ~bank.dead
    if persp == Perspective.ENERGY:
        ok &= eta2 >= sc.eta0
    elif persp == Perspective.ADJUSTED:
        ok &= eta3 >= sc.eta0
    idx = np.flatnonzero(ok)
    idx = idx[np.lexsort((rest[idx], -delta[idx]))]
    for start in range(0, idx.size, block):
        rows = idx[start:start + block]
        sub = bank.take(rows).run(last, sc)
        good = ~sub.dead
        if persp == Perspective.BATTERY:
            good &= sub.soc(sc) >= sc.eta0
        hit = np.flatnonzero(good)
        if hit.size:
            r = rows[hit[0]]
            return int(delta[r]), int(rest[r])
    return None


def _best_cell(grid: RouteGrid, mask: np.ndarray):
    """Row with the largest Δ, smallest T′ on ties; ``None`` if ``mask`` is empty."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None
    order = np.lexsort((grid.rest[idx], -grid.delta[idx]))
    return int(idx[order[0]])


# -- problem solvers ---------------------------------------------------------

def solve_p3(sc: Scenario, persp: Perspective) -> MissionOutcome:
    """Largest hover-slot count on the direct path meeting the SOC target.

    Each extra hover slot moves the terminal SOC in the same direction (net
    drain, or net gain when the charger outpaces the hover draw), so the
    feasible Δ form an interval touching 0 or the budget.  The budget end is
    tried first, then a binary search from Δ = 0; the result is confirmed by
    simulating Δ+1, with a full scan as fallback.
    """
    persp = Perspective(persp)
    route = direct_route(sc)
    n_max = budget_slots(sc, route.flight_time(sc))
    if n_max < 0:
        raise NoFeasibleDelta(f"direct flight alone exceeds the {sc.t_max} s budget")

    def run(d):
        return simulate_mission(TrajectoryPlan(route, d), sc, persp)

    top = run(n_max)
    if top.feasible:
        return top
    best = run(0)
    if not best.feasible:
        return _scan_direct(sc, route, persp, run)
    lo, hi = 0, n_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        out = run(mid)
        if out.feasible:
            lo, best = mid, out
        else:
            hi = mid
    if lo + 1 < n_max and run(lo + 1).feasible:
        return _scan_direct(sc, route, persp, run)
    return best


def _scan_direct(sc: Scenario, route: Route, persp: Perspective, run) -> MissionOutcome:
    log.info("hover feasibility not monotone from Δ=0; scanning every Δ")
    grid = evaluate_route_grid(sc, route)
    row = _best_cell(grid, grid.feasible(persp, sc.eta0))
    if row is None:
        raise NoFeasibleDelta("no hover duration on the direct path meets the SOC target")
    return run(int(grid.delta[row]))


@dataclass(frozen=True)
class DwellChoice:
    """Best (Δ, T′) found on one building; ``outcome`` is ``None`` when nothing passed."""

    building: Building
    delta: int
    rest: int
    route: Route | None = None
    outcome: MissionOutcome | None = None

    def as_tuple(self) -> tuple[int, int]:
        return self.delta, self.rest


def _optimise_routes(sc: Scenario, routes, persp: Perspective, min_delta: int, min_rest: int):
    best = None
    for route in routes:
        # a later route only matters if it can at least tie on Δ
        floor = min_delta if best is None else max(min_delta, best[0])
        cell = search_route(sc, route, persp, floor, min_rest)
        if cell is None:
            continue
        if best is None or (cell[0], -cell[1]) > (best[0], -best[1]):
            best = (cell[0], cell[1], route)
    return best


def algorithm1(sc: Scenario, building: Building, persp: Perspective,
               routes: tuple[Route, ...] | None = None) -> DwellChoice:
    """Exhaustive (Δ, T′) search with Δ, T′ ≥ 1 for resting on ``building``.

    Both visiting orders are searched unless ``routes`` is given.  Returns
    Δ = T′ = 0 when no pair meets the SOC target.
    """
    routes = building_routes(sc, building) if routes is None else routes
    best = _optimise_routes(sc, routes, persp, 1, 1)
    if best is None:
        return DwellChoice(building, 0, 0)
    delta, rest, route = best
    return DwellChoice(building, delta, rest, route,
                       simulate_mission(TrajectoryPlan(route, delta, rest), sc, persp))


@dataclass(frozen=True)
class PlanResult:
    kind: str
    plan: TrajectoryPlan
    outcome: MissionOutcome


def algorithm2(sc: Scenario, persp: Perspective) -> PlanResult:
    """Global plan: the direct path unless some building rest strictly lengthens Δ.

    A tie between the best building plan and the direct path goes to the
    building plan, following a strict ``Δ1 > Δ2`` test.
    """
    persp = Perspective(persp)
    try:
        direct = solve_p3(sc, persp)
    except NoFeasibleDelta:
        direct = None
    best: DwellChoice | None = None
    for b in sc.restable_buildings:
        choice = algorithm1(sc, b, persp)
        if choice.outcome is not None and (best is None or choice.delta > best.delta):
            best = choice
    if direct is None and best is None:
        raise NoFeasiblePlan("neither the direct path nor any building rest meets the SOC target")
    if best is None or (direct is not None and direct.delta > best.delta):
        return PlanResult("direct", direct.plan, direct)
    return PlanResult("building", best.outcome.plan, best.outcome)


# -- benchmarks --------------------------------------------------------------

BENCHMARKS = ("direct", "traj1", "traj2")


def _shorter(routes):
    return min(routes, key=lambda r: r.length())


def benchmark_trajectory(sc: Scenario, kind: str, persp: Perspective) -> MissionOutcome:
    """Reference trajectories optimised over (Δ, T′), passing by allowed (T′ = 0).

    ``traj1`` visits the restable building nearest the ground device;
    ``traj2`` takes the one-building route of least length.
    """
    if kind == "direct":
        return solve_p3(sc, persp)
    if kind not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {kind!r}; expected one of {BENCHMARKS}")
    cands = sc.restable_buildings
    if not cands:
        raise ValidationError([f"{kind} needs at least one restable building"])
    if kind == "traj1":
        dev = sc.device.device_pos
        b = min(cands, key=lambda b: math.dist(b.rooftop, dev))
        route = _shorter(building_routes(sc, b))
    else:
        route = _shorter([r for b in cands for r in building_routes(sc, b)])
    best = _optimise_routes(sc, [route], persp, 0, 0)
    if best is None:
        raise NoFeasibleDelta(f"{kind}: no (Δ, T′) meets the SOC target")
    delta, rest, route = best
    return simulate_mission(TrajectoryPlan(route, delta, rest), sc, persp)


def limiting_factor(sc: Scenario, outcome: MissionOutcome) -> str:
    """What stops one more hover slot: the time budget, depletion or the SOC target."""
    plan = outcome.plan
    if outcome.t_total + sc.slot > sc.t_max + _TIME_EPS:
        return "time budget"
    nxt = simulate_mission(replace(plan, hover_slots=plan.hover_slots + 1), sc,
                           outcome.perspective)
    if nxt.depletion_time is not None:
        return f"bank depletes at t={nxt.depletion_time:.6g} s with one more slot"
    return "SOC target"
