"""Battery-aware mission planning for a laser-charged quadrotor relay."""
from .battery import BatteryBank, KibamParams, KibamState
from .errors import (
    ConfigParseError, Depleted, HoverInfeasible, Infeasible, LaserUavError, NoFeasibleDelta,
    NoFeasibleHoverPoint, NoFeasiblePlan, PlanExceedsBudget, ValidationError,
)
from .laser import DlcParams
from .link import LinkParams
from .mission import MissionOutcome, TrajectoryPlan, simulate_mission
from .motor import ExternalForce, KinematicsConfig, QuadrotorParams
from .planner import algorithm1, algorithm2, benchmark_trajectory, solve_p3
from .scenario import Building, Perspective, Scenario, default_scenario, hover_point

__version__ = "0.1.0"

__all__ = [
    "BatteryBank", "Building", "ConfigParseError", "Depleted", "DlcParams", "ExternalForce",
    "HoverInfeasible", "Infeasible", "KibamParams", "KibamState", "KinematicsConfig",
    "LaserUavError", "LinkParams", "MissionOutcome", "NoFeasibleDelta", "NoFeasibleHoverPoint",
    "NoFeasiblePlan", "Perspective", "PlanExceedsBudget", "QuadrotorParams", "Scenario",
    "TrajectoryPlan", "ValidationError", "algorithm1", "algorithm2", "benchmark_trajectory",
    "default_scenario", "hover_point", "simulate_mission", "solve_p3",
]
