"""Experiment commands behind the CLI and their CSV / text-table output."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .config import RunConfig, SweepConfig
from .errors import LaserUavError, NoFeasibleDelta
from .laser import harvesting_efficiency
from .mission import MissionOutcome, TrajectoryPlan, direct_route, mission_model, simulate_mission
from .motor import ExternalForce
from .planner import algorithm2, benchmark_trajectory, limiting_factor
from .scenario import Perspective, Scenario, hover_point, source_power

log = logging.getLogger(__name__)

FLOAT_FMT = "%.12g"


@dataclass(frozen=True)
class ResultRow:
    """One run: echoed inputs followed by outcome columns (energies in J)."""

    approach: str
    perspective: str
    variable: str
    value: float | None
    t_max: float
    eta0: float
    capacity: float
    v_max: float
    recharge: bool
    feasible: bool
    route: str
    rest_building: str
    delta: int | None
    rest: int | None
    t_flight: float | None
    t_total: float | None
    eta1: float | None
    eta2: float | None
    eta3: float | None
    E_fl: float | None
    E_hv: float | None
    E_comm: float | None
    E_harv: float | None
    zeta: float | None
    note: str = ""


@dataclass(frozen=True)
class Table2Row:
    """Reproduced value next to the stored reference for one (T_max, perspective)."""

    t_max: float
    perspective: str
    delta: int | None
    t_total: float | None
    eta1: float | None
    eta2: float | None
    eta3: float | None
    ref_delta: float
    ref_t_total: float
    ref_eta1: float
    ref_eta2: float
    ref_eta3: float
    delta_rel_dev: float | None
    eta_abs_dev_pp: float | None
    note: str = ""


# -- CSV ---------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return FLOAT_FMT % v
    return str(v)


def rows_to_csv(rows: Sequence) -> str:
    if not rows:
        return ""
    names = [f.name for f in fields(rows[0])]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=names)
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in asdict(r).items()})
    return buf.getvalue()


def write_csv(path: Path, rows: Sequence) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
    return path


def _parse_value(text: str, typ: str):
    # annotations are strings here (postponed evaluation)
    if typ == "str":
        return text
    if text == "":
        return None
    if typ == "bool":
        return text == "true"
    if typ.startswith("int"):
        return int(text)
    return float(text)


def read_csv(path: Path, cls=ResultRow) -> list:
    """Load rows written by ``write_csv`` back into ``cls`` instances."""
    types = {f.name: str(f.type) for f in fields(cls)}
    with open(path, encoding="utf-8", newline="") as fh:
        return [cls(**{k: _parse_value(v, types[k]) for k, v in rec.items()})
                for rec in csv.DictReader(fh)]


def format_table(rows: Sequence, columns: Sequence[str] | None = None) -> str:
    """Aligned plain-text table of dataclass rows."""
    if not rows:
        return "(no rows)"
    columns = list(columns or [f.name for f in fields(rows[0])])
    cells = [[_short(getattr(r, c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[j]) for row in cells)) for j, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return _fmt(v)


# -- rows from outcomes ------------------------------------------------------

def _zeta(sc: Scenario) -> float | None:
    try:
        d = math.dist(hover_point(sc), sc.source.source_pos)
        return float(harvesting_efficiency(d, sc.source, source_power(sc)))
    except LaserUavError:
        return None


def _building_label(outcome: MissionOutcome | None) -> str:
    if outcome is None or outcome.plan.rest_building is None:
        return ""
    x, y, z = outcome.plan.rest_building.rooftop
    return f"({x:g} {y:g} {z:g})"


def make_row(sc: Scenario, persp: Perspective, approach: str, outcome: MissionOutcome | None,
             variable: str = "", value: float | None = None, note: str = "") -> ResultRow:
    base = dict(approach=approach, perspective=Perspective(persp).value, variable=variable,
                value=value, t_max=float(sc.t_max), eta0=float(sc.eta0),
                capacity=float(sc.battery.capacity), v_max=float(sc.quad.v_max),
                recharge=sc.recharge, zeta=_zeta(sc), note=note)
    if outcome is None:
        return ResultRow(**base, feasible=False, route="", rest_building="", delta=None,
                         rest=None, t_flight=None, t_total=None, eta1=None, eta2=None,
                         eta3=None, E_fl=None, E_hv=None, E_comm=None, E_harv=None)
    e = outcome.energy
    if not note and outcome.depletion_time is not None:
        base["note"] = f"depleted at t={outcome.depletion_time:.6g} s"
    return ResultRow(**base, feasible=outcome.feasible, route=outcome.plan.route.name,
                     rest_building=_building_label(outcome), delta=outcome.delta,
                     rest=outcome.rest, t_flight=outcome.t_flight, t_total=outcome.t_total,
                     eta1=outcome.eta1, eta2=outcome.eta2, eta3=outcome.eta3, E_fl=e.flight,
                     E_hv=e.hover, E_comm=e.comm, E_harv=e.harvest)


def run_approach(sc: Scenario, persp: Perspective, approach: str) -> MissionOutcome:
    if approach == "optimal":
        return algorithm2(sc, persp).outcome
    return benchmark_trajectory(sc, approach, persp)


# -- plan --------------------------------------------------------------------

@dataclass(frozen=True)
class PlanReport:
    rows: list[ResultRow]
    waypoints: list[tuple[float, float, float]]
    chosen: str


def cmd_plan(cfg: RunConfig) -> PlanReport:
    """Global plan plus the three reference trajectories."""
    sc, persp = cfg.scenario, cfg.perspective
    best = algorithm2(sc, persp)
    rows = [make_row(sc, persp, "optimal", best.outcome, note=f"kind={best.kind}")]
    for kind in ("direct", "traj1", "traj2"):
        if kind != "direct" and not sc.restable_buildings:
            rows.append(make_row(sc, persp, kind, None, note="no restable building"))
            continue
        try:
            rows.append(make_row(sc, persp, kind, benchmark_trajectory(sc, kind, persp)))
        except LaserUavError as exc:
            rows.append(make_row(sc, persp, kind, None, note=f"{type(exc).__name__}: {exc}"))
    return PlanReport(rows, list(best.plan.waypoints), best.kind)


@dataclass(frozen=True)
class WaypointRow:
    index: int
    x: float
    y: float
    z: float


def waypoint_rows(report: PlanReport) -> list[WaypointRow]:
    return [WaypointRow(i, *map(float, p)) for i, p in enumerate(report.waypoints)]


# -- reference table ---------------------------------------------------------

def load_reference() -> dict:
    text = resources.files("laseruav").joinpath("data/table2_reference.yaml").read_text("utf-8")
    return yaml.safe_load(text)


def table2_scenario(cfg: RunConfig, ref: dict) -> Scenario:
    """Configured scenario with the reference regime voltages filled in where unset."""
    sc = cfg.scenario
    return sc.with_(
        flight_voltage=sc.flight_voltage if sc.flight_voltage is not None else ref["flight_voltage"],
        hover_voltage=sc.hover_voltage if sc.hover_voltage is not None else ref["hover_voltage"])


def cmd_reproduce_table2(cfg: RunConfig) -> list[Table2Row]:
    """Direct-path optimum for both budgets under all three perspectives."""
    ref = load_reference()
    base = table2_scenario(cfg, ref)
    out = []
    for r in ref["rows"]:
        sc = base.with_(t_max=float(r["t_max"]))
        persp = Perspective(r["perspective"])
        key = {"battery": "eta1", "energy": "eta2", "adjusted": "eta3"}[persp.value]
        refs = dict(ref_delta=float(r["delta"]), ref_t_total=float(r["t_total"]),
                    ref_eta1=float(r["eta1"]), ref_eta2=float(r["eta2"]),
                    ref_eta3=float(r["eta3"]))
        try:
            o = benchmark_trajectory(sc, "direct", persp)
        except NoFeasibleDelta as exc:
            out.append(Table2Row(sc.t_max, persp.value, None, None, None, None, None, **refs,
                                 delta_rel_dev=None, eta_abs_dev_pp=None, note=str(exc)))
            continue
        eta_pct = {"eta1": 100 * o.eta1, "eta2": 100 * o.eta2, "eta3": 100 * o.eta3}
        dev_delta = (o.delta - refs["ref_delta"]) / refs["ref_delta"]
        dev_eta = eta_pct[key] - refs[f"ref_{key}"]
        note = f"limited by {limiting_factor(sc, o)}"
        out.append(Table2Row(sc.t_max, persp.value, o.delta, o.t_total, eta_pct["eta1"],
                             eta_pct["eta2"], eta_pct["eta3"], **refs, delta_rel_dev=dev_delta,
                             eta_abs_dev_pp=dev_eta, note=note))
    return out


# -- sweeps ------------------------------------------------------------------

def _base_wind(sc: Scenario) -> tuple[float, float, float]:
    f = sc.external_force
    return (f.fx, f.fy, f.fz + sc.quad.weight)


def apply_sweep_value(sc: Scenario, variable: str, value: float) -> Scenario:
    """Scenario with one swept quantity replaced."""
    if variable in ("wind_x", "wind_y", "wind_z"):
        wind = list(_base_wind(sc))
        wind["xyz".index(variable[-1])] = value
        return sc.with_(external_force=ExternalForce.from_wind(wind, sc.quad))
    if variable == "distance":
        # move the source along its current bearing from the hover point,
        # keeping the emitted power of the unswept scenario
        wu = hover_point(sc)
        src = sc.source.source_pos
        d0 = math.dist(wu, src)
        u = [(s - w) / d0 for s, w in zip(src, wu)] if d0 > 0 else [0.0, 0.0, 1.0]
        pos = tuple(w + value * c for w, c in zip(wu, u))
        return sc.with_(source=replace(sc.source, source_pos=pos, p_s=source_power(sc)))
    if variable == "v_max":
        return sc.with_(quad=replace(sc.quad, v_max=value))
    if variable == "eta0":
        return sc.with_(eta0=value)
    if variable == "t_max":
        return sc.with_(t_max=value)
    if variable == "battery_size":
        b = sc.battery
        # the charge-current cap cannot exceed the 1C rate of a smaller pack
        return sc.with_(battery=replace(b, capacity=value,
                                        i_ch_max=min(b.i_ch_max, value / 3600.0)))
    raise ValueError(f"unknown sweep variable {variable!r}")


def evaluate_point(sc: Scenario, persp: Perspective, sweep: SweepConfig, value: float) -> ResultRow:
    """One sweep point; failures become infeasible rows instead of exceptions."""
    try:
        point = apply_sweep_value(sc, sweep.variable, value)
    except LaserUavError as exc:
        return make_row(sc, persp, sweep.approach, None, sweep.variable, value,
                        note=f"{type(exc).__name__}: {exc}")
    try:
        if sweep.hover_slots is not None:
            mission_model(point)
            outcome = simulate_mission(TrajectoryPlan(direct_route(point), sweep.hover_slots),
                                       point, persp)
            return make_row(point, persp, "direct-fixed", outcome, sweep.variable, value)
        outcome = run_approach(point, persp, sweep.approach)
        return make_row(point, persp, sweep.approach, outcome, sweep.variable, value)
    except LaserUavError as exc:
        return make_row(point, persp, sweep.approach, None, sweep.variable, value,
                        note=f"{type(exc).__name__}: {exc}")


def _evaluate_star(args):
    return evaluate_point(*args)


def cmd_sweep(cfg: RunConfig) -> list[ResultRow]:
    """One row per sweep value, in sweep order whatever the worker count."""
    if cfg.sweep is None:
        raise ValueError("config has no sweep section")
    jobs = [(cfg.scenario, cfg.perspective, cfg.sweep, v) for v in cfg.sweep.values()]
    if cfg.workers <= 1 or len(jobs) <= 1:
        return [_evaluate_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_evaluate_star, jobs))


def sweep_filename(sweep: SweepConfig) -> str:
    return f"sweep_{sweep.variable}.csv"


def write_outputs(out_dir: Path, named_rows: Iterable[tuple[str, Sequence]]) -> list[Path]:
    return [write_csv(Path(out_dir) / name, rows) for name, rows in named_rows]
