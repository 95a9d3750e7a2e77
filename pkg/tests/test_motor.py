import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laseruav.errors import HoverInfeasible, ValidationError
from laseruav.motor import (
    ExternalForce, KinematicsConfig, QuadrotorParams, RotorProfile, Stage, StageKind, StagePlan,
    derive_constants, horizontal_wind_limit, hover_current, hover_power, hover_rotor_speed,
    integrate_energy, max_tolerable_force, motor_current, motor_voltage, plan_stages,
    rotor_power, stage_current, stage_energy, travel_energy, vertical_wind_interval,
)

P = QuadrotorParams()
C = derive_constants(P)

# frozen from an independent recomputation of the motor equations
HOVER_SPEED = 911.8575220129723
HOVER_CURRENT = 23.227595230551106
HOVER_VOLTAGE = 14.110302779760739
HOVER_POWER = 1310.99360619521
VMAX_CURRENT = 26.715793494392262
VMAX_VOLTAGE = 16.34561304670454
ORIENTATION_POWER = 892.6637372989783
ORIENTATION_CURRENT = 65.74539147762124


def test_kappa_from_kv_rating():
    assert P.kappa_T == pytest.approx(9.5493 / 920)
    assert QuadrotorParams.from_kv(920.0) == P


def test_c1_value():
    assert C.c1 == pytest.approx(2.9701785568588335, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(v=st.floats(0.0, 1200.0), a=st.floats(-500.0, 500.0))
def test_constants_reproduce_voltage_times_current(v, a):
    i = motor_current(v, a, P)
    direct = motor_voltage(i, v, P) * i
    poly = (rotor_power(v, C) + C.c6 * a + C.c7 * a * a + C.c8 * v * a
            + (P.kappa_0 / P.T_f) * C.c6 * v * v * a)
    assert poly == pytest.approx(direct, rel=1e-10, abs=1e-9)


def test_c9_keeps_published_form():
    assert C.c9 == pytest.approx(P.kappa_T / P.T_f * C.c6)


def test_gravity_hover_point():
    f = ExternalForce()
    assert f.fz == pytest.approx(-P.weight)
    assert hover_rotor_speed(f, P) == pytest.approx(HOVER_SPEED, rel=1e-12)
    assert hover_current(f, P) == pytest.approx(4 * HOVER_CURRENT, rel=1e-12)
    assert motor_voltage(HOVER_CURRENT, HOVER_SPEED, P) == pytest.approx(HOVER_VOLTAGE)
    assert hover_power(f, C, P) == pytest.approx(HOVER_POWER, rel=1e-10)


def test_full_speed_regime():
    i = motor_current(P.v_max, 0.0, P)
    assert i == pytest.approx(VMAX_CURRENT, rel=1e-12)
    assert motor_voltage(i, P.v_max, P) == pytest.approx(VMAX_VOLTAGE, rel=1e-12)


def test_force_limits():
    assert max_tolerable_force(P) == pytest.approx(17.2157992)
    assert horizontal_wind_limit(P) == pytest.approx(11.579125273297658, rel=1e-12)
    lo, hi = vertical_wind_interval(P)
    assert lo == pytest.approx(-4.475799199999997, rel=1e-12)
    assert hi == pytest.approx(29.9557992, rel=1e-12)


def test_hover_rejects_excess_force():
    with pytest.raises(HoverInfeasible):
        hover_rotor_speed(ExternalForce.from_wind((12.0, 0.0, 0.0), P), P)
    # boundary force is still flyable, at full rotor speed
    lim = horizontal_wind_limit(P)
    v = hover_rotor_speed(ExternalForce.from_wind((lim, 0.0, 0.0), P), P)
    assert v == pytest.approx(P.v_max)


def test_force_input_forms_agree():
    f = ExternalForce(3.0, -2.0, -12.0)
    assert hover_rotor_speed(f, P) == hover_rotor_speed(f.as_tuple(), P)
    assert hover_rotor_speed(f, P) == pytest.approx(hover_rotor_speed(f.magnitude, P))


def test_wind_sign_convention():
    up = ExternalForce.from_wind((0.0, 0.0, P.weight), P)
    assert up.magnitude == pytest.approx(0.0, abs=1e-12)


def test_orientation_stage():
    e = stage_energy(StageKind.ORIENTATION, 2.0, P.v_max, C)
    assert e / 2.0 == pytest.approx(ORIENTATION_POWER, rel=1e-10)
    assert stage_current(StageKind.ORIENTATION, P.v_max, P) == pytest.approx(ORIENTATION_CURRENT)


def test_displacement_stage_is_four_rotors():
    e = stage_energy(StageKind.DISPLACEMENT, 1.0, P.v_max, C)
    assert e == pytest.approx(4 * VMAX_CURRENT * VMAX_VOLTAGE, rel=1e-10)


def test_stage_plan_validation():
    with pytest.raises(ValidationError):
        StagePlan(tuple(Stage(StageKind.DISPLACEMENT, 1.0, 1.0) for _ in range(5)))
    bad = list(StagePlan.idle(1.0).stages)
    bad[1] = Stage(StageKind.DISPLACEMENT, -1.0, 1.0)
    with pytest.raises(ValidationError):
        StagePlan(tuple(bad))


def test_plan_stages_layout():
    kin = KinematicsConfig(t_rot=1.0, speed_factor=0.01)
    plan = plan_stages((0, 0, 50), (300, 400, 80), kin, P.v_max)
    d = [s.duration for s in plan.stages]
    cruise = 0.01 * P.v_max
    assert d == pytest.approx([1.0, 30 / cruise, 1.0, 500 / cruise, 1.0])
    assert plan_stages((1, 2, 3), (1, 2, 3), kin, P.v_max).duration == 0.0


@given(st.tuples(*[st.floats(-2000, 2000)] * 2), st.tuples(*[st.floats(-2000, 2000)] * 2))
def test_plan_stages_symmetric_at_same_altitude(a, b):
    kin = KinematicsConfig()
    pa, pb = (*a, 50.0), (*b, 50.0)
    fwd = plan_stages(pa, pb, kin, P.v_max).duration
    back = plan_stages(pb, pa, kin, P.v_max).duration
    assert fwd == pytest.approx(back, rel=1e-12)


def test_quadrature_matches_stage_energy():
    plan = plan_stages((0, 0, 50), (800, 0, 100), KinematicsConfig(), P.v_max)
    prof = RotorProfile.from_stage_plan(plan)
    e = integrate_energy(prof, 0.0, plan.duration, C)
    assert e == pytest.approx(travel_energy(plan, C), rel=1e-9)


def test_quadrature_of_constant_hover():
    prof = RotorProfile.constant([HOVER_SPEED] * 4, 10.0)
    assert integrate_energy(prof, 0.0, 10.0, C) == pytest.approx(10 * HOVER_POWER, rel=1e-10)


def test_params_validation_lists_fields():
    with pytest.raises(ValidationError) as exc:
        QuadrotorParams(R=-1.0, mass=0.0)
    assert len(exc.value.problems) == 2
    assert "R" in str(exc.value) and "mass" in str(exc.value)


def test_rotor_power_vectorised():
    v = np.array([0.0, 500.0, 1000.0])
    out = rotor_power(v, C)
    assert out.shape == (3,)
    assert out[0] == pytest.approx(C.c1)
    assert math.isclose(out[2], rotor_power(1000.0, C))
