import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laseruav.battery import KibamParams
from laseruav.errors import NoFeasibleDelta, NoFeasibleHoverPoint, NoFeasiblePlan, PlanExceedsBudget
from laseruav.laser import DlcParams
from laseruav.link import LinkParams
from laseruav.mission import (
    TrajectoryPlan, building_routes, direct_route, mission_model, simulate_mission,
    simulate_missions,
)
from laseruav.motor import KinematicsConfig, plan_stages
from laseruav.planner import (
    REFERENCE_FLIGHT_TIME, algorithm1, algorithm2, benchmark_trajectory, budget_slots,
    build_flight_graph, calibrate_kinematics, candidate_routes, evaluate_route_grid,
    search_route, solve_p3,
)
from laseruav.scenario import (
    Building, Perspective, Scenario, comm_range, default_buildings, hover_point,
)

from oracles import brute_force_delta, random_small_scenario

DEFAULT = Scenario()
WU = (1000.0, 2501.0152306144205, 50.0)  # circle of radius sqrt(d*^2 - 50^2) around the device


def small(**kw) -> Scenario:
    base = dict(w0=(0.0, 0.0, 50.0), wF=(300.0, 0.0, 50.0),
                device=LinkParams(device_pos=(150.0, 520.0, 0.0)),
                source=DlcParams(source_pos=(150.0, 100.0, 50.0)),
                buildings=(Building((150.0, 60.0, 0.0), 60.0),), t_max=30.0, eta0=0.95)
    base.update(kw)
    return Scenario(**base)


# -- geometry -----------------------------------------------------------------

def test_default_hover_point():
    wu = hover_point(DEFAULT)
    assert wu == pytest.approx(WU, abs=1e-3)


@settings(max_examples=15, deadline=None)
@given(dx=st.floats(-1500, 1500), dy=st.floats(300, 2000))
def test_hover_point_beats_grid_search(dx, dy):
    sc = Scenario(device=LinkParams(device_pos=(1000.0 + dx, dy, 0.0)))
    wu = hover_point(sc)
    d_star = math.dist(wu, sc.device.device_pos)
    assert d_star == pytest.approx(comm_range(sc.device), rel=1e-12)
    r = math.sqrt(d_star ** 2 - 50.0 ** 2)
    th = np.linspace(-math.pi, math.pi, 20001)
    pts = np.stack([1000.0 + dx + r * np.cos(th), dy + r * np.sin(th), np.full_like(th, 50.0)], 1)
    cost = (np.linalg.norm(pts - np.array(sc.w0), axis=1)
            + np.linalg.norm(pts - np.array(sc.wF), axis=1))
    mine = math.dist(sc.w0, wu) + math.dist(wu, sc.wF)
    assert mine <= cost.min() + 1e-6


def test_stricter_outage_moves_hover_point_closer():
    d_loose = math.dist(hover_point(DEFAULT), DEFAULT.device.device_pos)
    strict = DEFAULT.with_(device=LinkParams(epsilon=0.001))
    assert math.dist(hover_point(strict), strict.device.device_pos) < d_loose


def test_unreachable_altitude():
    sc = Scenario(device=LinkParams(p_u=1e-4))
    with pytest.raises(NoFeasibleHoverPoint):
        hover_point(sc)


def test_default_building_layout():
    bs = default_buildings()
    assert [b.position[0] for b in bs] == pytest.approx(np.arange(100, 2000, 200))
    heights = [b.height for b in bs]
    assert heights == [60, 60, 80, 80, 100, 100, 80, 80, 60, 60]


# -- graph ----------------------------------------------------------------------

def test_graph_without_buildings():
    sc = DEFAULT.with_(buildings=())
    g = build_flight_graph(sc)
    assert set(g.nodes) == {"w0", "wF", "wU"}
    assert len(candidate_routes(sc, g)) == 1


def test_graph_sizes_and_excluded_rooftops():
    tall = Building((500.0, 250.0, 0.0), 150.0)
    sc = DEFAULT.with_(buildings=DEFAULT.buildings + (tall,))
    g = build_flight_graph(sc)
    assert g.number_of_nodes() == 3 + 10
    assert len(candidate_routes(sc, g)) == 1 + 2 * 10


def test_graph_edge_costs():
    g = build_flight_graph(DEFAULT)
    for u, v, w in g.edges(data="duration"):
        assert w == pytest.approx(g[v][u]["duration"], rel=1e-12)
        pu, pv = g.nodes[u]["pos"], g.nodes[v]["pos"]
        assert w == pytest.approx(plan_stages(pu, pv, DEFAULT.kin, DEFAULT.quad.v_max).duration)


def test_default_kinematics_are_calibrated():
    assert direct_route(DEFAULT).flight_time(DEFAULT) == pytest.approx(REFERENCE_FLIGHT_TIME, abs=1e-9)
    kin = calibrate_kinematics(DEFAULT.with_(kin=KinematicsConfig(speed_factor=0.05)))
    assert kin.speed_factor == pytest.approx(DEFAULT.kin.speed_factor, rel=1e-12)


# -- mission simulation ---------------------------------------------------------

def test_budget_guard():
    sc = small()
    with pytest.raises(PlanExceedsBudget):
        simulate_mission(TrajectoryPlan(direct_route(sc), 500), sc, "battery")


def test_zero_dwell_plan_is_feasible():
    sc = small(eta0=0.0)
    out = simulate_mission(TrajectoryPlan(direct_route(sc), 0), sc, "battery")
    assert out.feasible and out.delta == 0
    assert 0.95 < out.eta1 < 1.0
    assert out.energy.hover == 0.0 and out.energy.harvest == 0.0


def test_charge_bookkeeping():
    """Bank SOC equals the charge budget: drawn, harvested and spilled currents."""
    sc = small()
    plan = TrajectoryPlan(building_routes(sc, sc.buildings[0])[0], 6, 4)
    out = simulate_mission(plan, sc, "battery")
    model = mission_model(sc)
    drawn = sum(c * dt for leg in plan.stage_plans(sc) for c, dt in model.leg_chunks(leg))
    i_hv, i_ch_hv = model.dwell("hover", plan.hover_point)
    _, i_ch_rest = model.dwell("rest", plan.rest_building.rooftop)
    net = drawn + 6 * i_hv - 6 * i_ch_hv - 4 * i_ch_rest + out.spilled
    assert out.eta1 == pytest.approx(1 - net / sc.bank_capacity, abs=1e-12)


def test_perspective_identities():
    sc = small()
    out = simulate_mission(TrajectoryPlan(direct_route(sc), 10), sc, "energy")
    e = out.energy
    model = mission_model(sc)
    e0 = sc.bank_capacity * sc.battery.e_nom
    assert out.eta2 == pytest.approx(1 - (e.flight + e.hover - e.harvest) / e0)
    assert out.eta3 == pytest.approx(1 - e.flight / (sc.bank_capacity * model.flight_voltage)
                                     - e.hover / (sc.bank_capacity * model.hover_voltage)
                                     + e.harvest / e0)
    lit = simulate_mission(out.plan, sc.with_(eta3_literal=True), "energy")
    assert lit.eta3 - out.eta3 == pytest.approx(
        2 * e.hover / (sc.bank_capacity * model.hover_voltage) - 2 * e.harvest / e0)
    assert e.comm == pytest.approx(10 * sc.device.p_u)


def test_reference_voltage_denominators():
    sc = DEFAULT.with_(flight_voltage=15.4, hover_voltage=14.33)
    m = mission_model(sc)
    assert sc.bank_capacity * m.flight_voltage == pytest.approx(1108800.0)
    assert sc.bank_capacity * m.hover_voltage == pytest.approx(1031760.0)


def test_derived_regime_voltages():
    m = mission_model(DEFAULT)
    assert m.flight_voltage == pytest.approx(16.34561304670454)
    assert m.hover_voltage == pytest.approx(14.110302779760739)


def test_depletion_reported_not_raised():
    sc = small(battery=KibamParams(capacity=360.0, i_ch_max=0.1), t_max=40.0, eta0=0.0)
    out = simulate_mission(TrajectoryPlan(direct_route(sc), 30), sc, "battery")
    assert not out.feasible
    assert out.depletion_time is not None and out.depletion_time > 0


# -- solvers ----------------------------------------------------------------

def test_solve_p3_budget_bound():
    sc = DEFAULT.with_(t_max=300.0, eta0=0.0)
    out = solve_p3(sc, "battery")
    assert out.delta == budget_slots(sc, REFERENCE_FLIGHT_TIME) == 240


def test_solve_p3_infeasible():
    with pytest.raises(NoFeasibleDelta):
        solve_p3(small(eta0=0.9999), "battery")


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_feasibility_prefix_property(seed):
    sc, persp = random_small_scenario(np.random.default_rng(seed))
    route = direct_route(sc)
    n = budget_slots(sc, route.flight_time(sc))
    outs = simulate_missions([TrajectoryPlan(route, k) for k in range(max(n, 0) + 1)], sc, persp)
    feas = [o.feasible for o in outs]
    # feasible hover counts form one run touching Δ=0 or the budget
    if any(feas):
        first, last = feas.index(True), len(feas) - 1 - feas[::-1].index(True)
        assert all(feas[first:last + 1])
        assert first == 0 or last == len(feas) - 1


def test_search_route_matches_full_grid():
    sc = small(t_max=40.0, eta0=0.96)
    for route in building_routes(sc, sc.buildings[0]):
        grid = evaluate_route_grid(sc, route)
        for persp in Perspective:
            ok = grid.feasible(persp, sc.eta0) & (grid.delta >= 1) & (grid.rest >= 1)
            idx = np.flatnonzero(ok)
            expect = None
            if idx.size:
                k = idx[np.lexsort((grid.rest[idx], -grid.delta[idx]))[0]]
                expect = (int(grid.delta[k]), int(grid.rest[k]))
            assert search_route(sc, route, persp, 1, 1) == expect


def test_algorithm1_nothing_feasible():
    sc = small(eta0=0.9999)
    assert algorithm1(sc, sc.buildings[0], "battery").as_tuple() == (0, 0)


def test_algorithm1_tie_prefers_shortest_rest():
    # without charging, resting only burns time: every T' ties on the best Δ
    sc = small(recharge=False, eta0=0.97, t_max=60.0)
    choice = algorithm1(sc, sc.buildings[0], "battery")
    assert choice.delta > 0
    assert choice.rest == 1


def test_algorithm2_without_buildings_is_direct():
    sc = small(buildings=())
    res = algorithm2(sc, "battery")
    assert res.kind == "direct"
    assert res.outcome.delta == solve_p3(sc, "battery").delta


def test_algorithm2_raises_when_nothing_feasible():
    with pytest.raises(NoFeasiblePlan):
        algorithm2(small(eta0=0.9999), "battery")


def test_building_rest_can_win():
    # no harvest at the hover point, a strong charger next to the rooftop
    sc = small(source=DlcParams(source_pos=(150.0, 60.0, 70.0), p_s=3000.0,
                                alpha=50.0),
               battery=KibamParams(capacity=360000.0, i_ch_max=100.0), t_max=60.0)
    direct = solve_p3(sc.with_(eta0=0.0), "battery")
    sc = sc.with_(eta0=direct.eta1 + 0.002)
    res = algorithm2(sc, "battery")
    assert res.kind == "building"
    assert res.outcome.delta == brute_force_delta(sc, Perspective.BATTERY)


def test_algorithm2_matches_brute_force_on_samples():
    rng = np.random.default_rng(11)
    for _ in range(8):
        sc, persp = random_small_scenario(rng)
        ref = brute_force_delta(sc, persp)
        try:
            got = algorithm2(sc, persp).outcome.delta
        except NoFeasiblePlan:
            got = None
        assert got == ref


def test_benchmarks_dominated_by_global_plan():
    sc = small(buildings=(Building((150.0, 60.0, 0.0), 60.0), Building((100.0, 300.0, 0.0), 80.0)),
               eta0=0.96)
    best = algorithm2(sc, "battery").outcome
    for kind in ("direct", "traj1", "traj2"):
        out = benchmark_trajectory(sc, kind, "battery")
        assert out.feasible
        assert out.eta1 >= sc.eta0 - 1e-9
        assert best.delta >= out.delta


def test_single_building_benchmarks_coincide():
    sc = small()
    a = benchmark_trajectory(sc, "traj1", "battery")
    b = benchmark_trajectory(sc, "traj2", "battery")
    assert (a.delta, a.rest, a.plan.route) == (b.delta, b.rest, b.plan.route)
