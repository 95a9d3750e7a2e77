"""Quadrotor motor electrical model and propulsion energy.

Each rotor is a DC motor: steady-state voltage ``e = R*i + kappa_E*v`` and
current ``i = (T_f + kappa_0*v**2 + D_f*v + J*dv/dt) / kappa_T``.  Their
product, summed over the four rotors, is the electrical power drawn for
motion; expanding it gives a degree-4 polynomial in rotor speed plus
acceleration terms with nine coefficients (``EnergyConstants``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import HoverInfeasible, QuadratureNotConverged, ValidationError

# 60 / (2*pi): converts a motor velocity constant in rpm/V into V*s/rad.
RPM_PER_VOLT_TO_KAPPA = 9.5493
N_ROTORS = 4

# Rotor speeds during an orientation change, as fractions of v_max.  One
# rotor is unpowered, which is why the constant term counts three motors.
ORIENTATION_SPEED_FRACTIONS = (1.0, 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 0.0)
ORIENTATION_POWERED = (True, True, True, False)


@dataclass(frozen=True)
class QuadrotorParams:
    """Electro-mechanical constants of the airframe and its four motors (SI units)."""

    R: float = 0.2
    kappa_E: float = RPM_PER_VOLT_TO_KAPPA / 920.0
    kappa_T: float = RPM_PER_VOLT_TO_KAPPA / 920.0
    T_f: float = 0.04
    kappa_0: float = 2.2518e-8
    D_f: float = 2.0e-4
    J: float = 4.1904e-5
    rho_lift: float = 3.8305e-6
    v_max: float = 1060.0
    mass: float = 1.3
    gravity: float = 9.8

    def __post_init__(self):
        bad = [f"{f.name} must be > 0 (got {getattr(self, f.name)!r})"
               for f in fields(self) if not getattr(self, f.name) > 0]
        if bad:
            raise ValidationError(bad)

    @classmethod
    def from_kv(cls, kv_rpm_per_volt: float = 920.0, **overrides) -> "QuadrotorParams":
        kappa = RPM_PER_VOLT_TO_KAPPA / kv_rpm_per_volt
        return cls(kappa_E=kappa, kappa_T=kappa, **overrides)

    @property
    def weight(self) -> float:
        return self.mass * self.gravity


@dataclass(frozen=True)
class EnergyConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float

    @property
    def speed_poly(self) -> tuple[float, float, float, float, float]:
        """Coefficients of v**0 .. v**4 in the per-rotor power."""
        return (self.c1, self.c2, self.c3, self.c4, self.c5)


def derive_constants(p: QuadrotorParams) -> EnergyConstants:
    c1 = p.R * p.T_f ** 2 / p.kappa_T ** 2
    c2 = p.T_f / p.kappa_T * (p.kappa_E + 2.0 * p.R * p.D_f / p.kappa_T)
    c3 = (p.D_f / p.kappa_T * (p.R * p.D_f / p.kappa_T + p.kappa_E)
          + 2.0 * p.R * p.T_f * p.kappa_0 / p.kappa_T ** 2)
    c4 = p.kappa_0 / p.T_f * c2
    c5 = p.kappa_0 ** 2 / p.T_f ** 2 * c1
    c6 = 2.0 * p.J / p.T_f * c1
    c7 = p.J ** 2 / p.T_f ** 2 * c1
    c8 = p.J / p.T_f * c2
    # Kept as published; the v**2 * dv/dt coefficient obtained by expanding
    # e*i directly is (kappa_0/T_f)*c6 instead.
    c9 = p.kappa_T / p.T_f * c6
    return EnergyConstants(c1, c2, c3, c4, c5, c6, c7, c8, c9)


def motor_current(v, dv_dt, p: QuadrotorParams):
    """Armature current (A) of one motor at rotor speed ``v`` and acceleration ``dv_dt``."""
    return (p.T_f + p.kappa_0 * v ** 2 + p.D_f * v + p.J * dv_dt) / p.kappa_T


def motor_voltage(i, v, p: QuadrotorParams):
    return p.R * i + p.kappa_E * v


def rotor_power(v, c: EnergyConstants):
    """Electrical power of one powered rotor turning at constant speed ``v``."""
    c1, c2, c3, c4, c5 = c.speed_poly
    return c1 + v * (c2 + v * (c3 + v * (c4 + v * c5)))


# -- hovering ---------------------------------------------------------------

@dataclass(frozen=True)
class ExternalForce:
    """Total external force on the airframe (N), gravity included."""

    fx: float = 0.0
    fy: float = 0.0
    fz: float = -12.74

    @classmethod
    def from_wind(cls, wind: Sequence[float], p: QuadrotorParams) -> "ExternalForce":
        """Gravity plus a wind force; positive ``wind[2]`` pushes upward."""
        wx, wy, wz = wind
        return cls(wx, wy, wz - p.weight)

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.fx ** 2 + self.fy ** 2 + self.fz ** 2)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.fx, self.fy, self.fz)


def max_tolerable_force(p: QuadrotorParams) -> float:
    return N_ROTORS * p.rho_lift * p.v_max ** 2


def horizontal_wind_limit(p: QuadrotorParams) -> float:
    """Largest horizontal wind force that still allows hovering against gravity."""
    fmax = max_tolerable_force(p)
    return math.sqrt(max(fmax ** 2 - p.weight ** 2, 0.0))


def vertical_wind_interval(p: QuadrotorParams) -> tuple[float, float]:
    """Feasible range of upward wind force (negative values push down)."""
    fmax = max_tolerable_force(p)
    return (p.weight - fmax, p.weight + fmax)


def _force_magnitude(f) -> float:
    if isinstance(f, ExternalForce):
        return f.magnitude
    if np.ndim(f) == 0:
        return abs(float(f))
    return float(np.linalg.norm(f))


def hover_rotor_speed(f, p: QuadrotorParams) -> float:
    """Per-rotor speed needed to balance the external force ``f``.

    ``f`` may be an ``ExternalForce``, a 3-vector or a magnitude.
    """
    mag = _force_magnitude(f)
    fmax = max_tolerable_force(p)
    # relative slack so the exact boundary force is accepted
    if mag > fmax * (1.0 + 1e-12):
        raise HoverInfeasible(f"|F_e|={mag:.4f} N exceeds rotor capability {fmax:.4f} N")
    return min(math.sqrt(mag / (N_ROTORS * p.rho_lift)), p.v_max)


def hover_power(f, c: EnergyConstants, p: QuadrotorParams) -> float:
    return N_ROTORS * rotor_power(hover_rotor_speed(f, p), c)


def hover_current(f, p: QuadrotorParams) -> float:
    """Total control current (A) of the four motors while hovering."""
    return N_ROTORS * motor_current(hover_rotor_speed(f, p), 0.0, p)


def hover_energy(delta: float, f, c: EnergyConstants, p: QuadrotorParams) -> float:
    return delta * hover_power(f, c, p)


# -- travelling ---------------------------------------------------------------

class StageKind(str, Enum):
    ORIENTATION = "orientation"
    DISPLACEMENT = "displacement"


STAGE_SEQUENCE = (StageKind.ORIENTATION, StageKind.DISPLACEMENT, StageKind.ORIENTATION,
                  StageKind.DISPLACEMENT, StageKind.ORIENTATION)


@dataclass(frozen=True)
class Stage:
    kind: StageKind
    duration: float
    rotor_speed: float


@dataclass(frozen=True)
class StagePlan:
    stages: tuple[Stage, Stage, Stage, Stage, Stage]

    def __post_init__(self):
        if len(self.stages) != 5:
            raise ValidationError(f"a stage plan has exactly 5 stages, got {len(self.stages)}")
        problems = []
        for k, (st, kind) in enumerate(zip(self.stages, STAGE_SEQUENCE), start=1):
            if st.kind != kind:
                problems.append(f"stage {k} must be {kind.value}, got {st.kind}")
            if st.duration < 0:
                problems.append(f"stage {k} has negative duration {st.duration}")
        if problems:
            raise ValidationError(problems)

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.stages)

    @classmethod
    def idle(cls, v_max: float) -> "StagePlan":
        return cls(tuple(Stage(k, 0.0, v_max) for k in STAGE_SEQUENCE))


def stage_rotor_speeds(kind: StageKind, rotor_speed: float):
    """Per-rotor speeds and powered mask during a stage."""
    if kind == StageKind.ORIENTATION:
        return (np.array(ORIENTATION_SPEED_FRACTIONS) * rotor_speed,
                np.array(ORIENTATION_POWERED))
    return np.full(N_ROTORS, float(rotor_speed)), np.ones(N_ROTORS, dtype=bool)


def stage_energy(kind: StageKind, duration: float, v_max: float, c: EnergyConstants) -> float:
    c1, c2, c3, c4, c5 = c.speed_poly
    v = v_max
    if kind == StageKind.ORIENTATION:
        power = (3.0 * c1 + (1.0 + math.sqrt(2.0)) * c2 * v + 2.0 * c3 * v ** 2
                 + (1.0 + 1.0 / math.sqrt(2.0)) * c4 * v ** 3 + 1.5 * c5 * v ** 4)
    else:
        power = N_ROTORS * rotor_power(v, c)
    return duration * power


def stage_current(kind: StageKind, rotor_speed: float, p: QuadrotorParams) -> float:
    speeds, powered = stage_rotor_speeds(kind, rotor_speed)
    return float(np.sum(motor_current(speeds[powered], 0.0, p)))


def travel_energy(plan: StagePlan, c: EnergyConstants) -> float:
    return sum(stage_energy(s.kind, s.duration, s.rotor_speed, c) for s in plan.stages)


@dataclass(frozen=True)
class KinematicsConfig:
    """Stage timing model used in place of explicit control switching times.

    Orientation stages last ``t_rot`` seconds each; displacement legs run at
    ``speed_factor * v_max`` metres per second.
    """

    t_rot: float = 1.0
    speed_factor: float = 0.09181793609180346

    def __post_init__(self):
        problems = []
        if not self.t_rot >= 0:
            problems.append(f"t_rot must be >= 0 (got {self.t_rot!r})")
        if not self.speed_factor > 0:
            problems.append(f"speed_factor must be > 0 (got {self.speed_factor!r})")
        if problems:
            raise ValidationError(problems)

    def cruise_speed(self, v_max: float) -> float:
        return self.speed_factor * v_max


def plan_stages(start: Sequence[float], end: Sequence[float], kin: KinematicsConfig,
                v_max: float) -> StagePlan:
    """Split a straight move into the five-stage orientation/displacement sequence.

    Stage 2 is the vertical leg and stage 4 the horizontal leg.  Each
    non-empty leg is preceded by an orientation stage and any motion ends with
    the levelling stage 5.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    delta = end - start
    vertical = abs(delta[2])
    horizontal = math.hypot(delta[0], delta[1])
    if vertical == 0.0 and horizontal == 0.0:
        return StagePlan.idle(v_max)
    cruise = kin.cruise_speed(v_max)
    durations = (
        kin.t_rot if vertical > 0 else 0.0,
        vertical / cruise,
        kin.t_rot if horizontal > 0 else 0.0,
        horizontal / cruise,
        kin.t_rot,
    )
    return StagePlan(tuple(Stage(k, d, v_max) for k, d in zip(STAGE_SEQUENCE, durations)))


# -- general energy integral --------------------------------------------------

@dataclass(frozen=True)
class RotorSegment:
    """Rotor speeds varying linearly from ``start`` to ``end`` over ``duration``."""

    duration: float
    start: tuple[float, float, float, float]
    end: tuple[float, float, float, float] | None = None
    powered: tuple[bool, bool, bool, bool] = (True, True, True, True)


@dataclass(frozen=True)
class RotorProfile:
    segments: tuple[RotorSegment, ...]
    t_start: float = 0.0

    @classmethod
    def constant(cls, speeds, duration: float, t_start: float = 0.0) -> "RotorProfile":
        speeds = tuple(float(s) for s in np.broadcast_to(speeds, (N_ROTORS,)))
        return cls((RotorSegment(duration, speeds),), t_start)

    @classmethod
    def from_stage_plan(cls, plan: StagePlan, t_start: float = 0.0) -> "RotorProfile":
        segs = []
        for st in plan.stages:
            if st.duration <= 0:
                continue
            speeds, powered = stage_rotor_speeds(st.kind, st.rotor_speed)
            segs.append(RotorSegment(st.duration, tuple(speeds), None, tuple(bool(b) for b in powered)))
        return cls(tuple(segs), t_start)

    @property
    def breakpoints(self) -> np.ndarray:
        return self.t_start + np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def segment_state(self, k: int, t):
        """Speeds (4, ...), accelerations and powered mask of segment ``k`` at time ``t``."""
        seg = self.segments[k]
        t0 = self.breakpoints[k]
        start = np.asarray(seg.start, dtype=float)
        if seg.end is None or seg.duration == 0:
            slope = np.zeros(N_ROTORS)
        else:
            slope = (np.asarray(seg.end, dtype=float) - start) / seg.duration
        tau = np.asarray(t, dtype=float) - t0
        speeds = start[:, None] + slope[:, None] * np.atleast_1d(tau)[None, :]
        accels = np.broadcast_to(slope[:, None], speeds.shape)
        return speeds, accels, np.asarray(seg.powered)


def energy_integrand(speeds, accels, powered, c: EnergyConstants):
    """Instantaneous motion power summed over powered rotors; arrays are (4, n)."""
    v, a = speeds, accels
    per_rotor = rotor_power(v, c) + a * (c.c6 + c.c7 * a + c.c8 * v + c.c9 * v ** 2)
    return np.sum(per_rotor * np.asarray(powered)[:, None], axis=0)


def integrate_energy(profile: RotorProfile, t0: float, tf: float, c: EnergyConstants,
                     rtol: float = 1e-11, limit: int = 200) -> float:
    """Adaptive quadrature of the full motion-power integrand over ``[t0, tf]``."""
    if tf < t0:
        raise ValueError("tf must be >= t0")
    bps = profile.breakpoints
    total = 0.0
    for k in range(len(profile.segments)):
        a, b = max(bps[k], t0), min(bps[k + 1], tf)
        if b <= a:
            continue

        def f(t, k=k):
            s, acc, pw = profile.segment_state(k, t)
            return float(energy_integrand(s, acc, pw, c)[0])

        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=limit)
            except integrate.IntegrationWarning as exc:
                raise QuadratureNotConverged(str(exc)) from exc
        total += val
    return total
