from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrovdc.errors import PressureBound, StrokeLimit
from hydrovdc.hydraulics import (
    ActuatorState,
    FrictionParams,
    HydraulicActuatorParams,
    chamber_pressure_rates,
    flow_coefficient_from_rating,
    friction_force,
    friction_slope,
    piston_force_from_pressures,
    piston_force_rate,
    uf_from_flows,
    upsilon,
    valve_flows,
    voltage_from_uf,
)
from hydrovdc.verification import check_hydraulic_round_trip


def params(A_a=2e-3, A_b=1.2e-3, s=0.5, c=3.5e-8, beta=1.5e9):
    return HydraulicActuatorParams(A_a, A_b, beta, c, c, c, c, 185e5, 10e5, s)


def test_piston_force_hand_values():
    assert piston_force_from_pressures(params(), ActuatorState(0.2, 0.0, 0.0, 0.0)) == 0.0
    p = params(A_a=2e-3, A_b=1e-3)
    assert piston_force_from_pressures(p, ActuatorState(0.2, 0.0, 50e5, 50e5)) == pytest.approx(1e-3 * 50e5, rel=1e-15)
    p = params(A_a=8.0e-3, A_b=5.0e-3)
    assert piston_force_from_pressures(p, ActuatorState(0.2, 0.0, 100e5, 40e5)) == pytest.approx(60000.0, rel=1e-15)


def test_pressure_rates_cancellation_and_zero():
    p = params()
    assert chamber_pressure_rates(p, ActuatorState(0.2, 0.0, 50e5, 50e5), 0.0, 0.0) == (0.0, 0.0)
    dx = 0.07
    dp_a, _ = chamber_pressure_rates(p, ActuatorState(0.2, dx, 50e5, 50e5), p.A_a * dx, 0.0)
    assert abs(dp_a) <= 1e-6
    _, dp_b = chamber_pressure_rates(p, ActuatorState(0.2, dx, 50e5, 50e5), 0.0, -p.A_b * dx)
    assert abs(dp_b) <= 1e-6
    with pytest.raises(StrokeLimit):
        chamber_pressure_rates(p, ActuatorState(0.5, 0.0, 50e5, 50e5), 0.0, 0.0)


def test_pressure_rates_against_volume_form():
    """Rate of pressure from bulk modulus times (net inflow) over chamber volume."""
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = params(A_a=rng.uniform(1e-4, 1e-2), A_b=rng.uniform(1e-4, 1e-2), s=rng.uniform(0.1, 1.0))
        x = p.s * rng.uniform(0.01, 0.99)
        dx, Q_a, Q_b = rng.normal(size=3) * (0.1, 1e-4, 1e-4)
        dp_a, dp_b = chamber_pressure_rates(p, ActuatorState(x, dx, 50e5, 50e5), Q_a, Q_b)
        V_a, V_b = p.A_a * x, p.A_b * (p.s - x)
        assert dp_a == pytest.approx(p.beta * (Q_a - p.A_a * dx) / V_a, rel=1e-12)
        assert dp_b == pytest.approx(p.beta * (Q_b + p.A_b * dx) / V_b, rel=1e-12)


def test_valve_flows_zero_cases():
    p = params()
    assert valve_flows(p, ActuatorState(0.2, 0.0, 50e5, 50e5), 0.0) == (0.0, 0.0)
    Q_a, _ = valve_flows(p, ActuatorState(0.2, 0.0, p.p_s, 50e5), 5.0)
    assert Q_a == 0.0


def test_valve_datasheet_anchor():
    c = flow_coefficient_from_rating(40.0, 35.0)
    assert c == pytest.approx((40 / 60000) / (10 * math.sqrt(35e5)), rel=1e-15)
    assert c == pytest.approx(3.5635e-8, rel=1e-4)
    p = params(c=c)
    Q_a, Q_b = valve_flows(p, ActuatorState(0.2, 0.0, p.p_s - 35e5, p.p_r + 35e5), 10.0)
    assert Q_a * 60000 == pytest.approx(40.0, rel=1e-12)
    assert -Q_b * 60000 == pytest.approx(40.0, rel=1e-12)


def test_uf_from_flows():
    s = 0.5
    st_ = ActuatorState(0.2, 0.0, 50e5, 50e5)
    assert uf_from_flows(st_, 0.0, 0.0, s) == 0.0
    assert uf_from_flows(st_, 0.2, -(s - 0.2), s) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(StrokeLimit):
        uf_from_flows(ActuatorState(0.0, 0.0, 50e5, 50e5), 0.0, 0.0, s)


def test_force_rate_identity():
    rng = np.random.default_rng(1)
    for _ in range(200):
        p = params(A_a=rng.uniform(1e-4, 1e-2), A_b=rng.uniform(1e-4, 1e-2), s=rng.uniform(0.1, 1.0))
        state = ActuatorState(p.s * rng.uniform(0.01, 0.99), rng.normal() * 0.1, *rng.uniform(11e5, 184e5, 2))
        u = rng.uniform(-10, 10)
        Q_a, Q_b = valve_flows(p, state, u)
        dp_a, dp_b = chamber_pressure_rates(p, state, Q_a, Q_b)
        direct = p.A_a * dp_a - p.A_b * dp_b
        via = piston_force_rate(p, state, uf_from_flows(state, Q_a, Q_b, p.s))
        assert via == pytest.approx(direct, rel=1e-10, abs=1e-6)


def test_voltage_inverse_signs_and_errors():
    p = params()
    state = ActuatorState(0.2, 0.0, 80e5, 60e5)
    assert voltage_from_uf(p, state, 0.0) == 0.0
    assert voltage_from_uf(p, state, 0.3) > 0
    assert voltage_from_uf(p, state, -0.3) < 0
    with pytest.raises(PressureBound):
        voltage_from_uf(p, ActuatorState(0.2, 0.0, p.p_s, 60e5), 0.1)
    with pytest.raises(PressureBound):
        voltage_from_uf(p, ActuatorState(0.2, 0.0, 80e5, p.p_r + 50.0), 0.1)


def test_round_trip_sample():
    r = check_hydraulic_round_trip(n_states=5, seed=7)
    assert r.passed, r.line()


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.05, 0.95),
    st.floats(11e5, 184e5),
    st.floats(11e5, 184e5),
    st.floats(-10, 10),
    st.floats(-10, 10),
)
def test_voltage_to_uf_is_increasing(frac, p_a, p_b, u1, u2):
    p = params()
    state = ActuatorState(frac * p.s, 0.0, p_a, p_b)

    def uf(u):
        return uf_from_flows(state, *valve_flows(p, state, u), p.s)

    if u1 < u2:
        assert uf(u1) < uf(u2)


def test_upsilon():
    assert upsilon(4.0) == 2.0 and upsilon(-9.0) == -3.0 and upsilon(0.0) == 0.0


def test_friction_properties():
    f = FrictionParams(50.0, 500.0, 5e-3)
    assert friction_force(f, 0.0) == 0.0
    rng = np.random.default_rng(2)
    for v in rng.normal(size=50):
        assert friction_force(f, -v) == -friction_force(f, v)
        assert friction_slope(f, v) >= f.viscous
    h = 1e-6
    for v in (0.5, 1.0, 3.0):
        fd = (friction_force(f, v + h) - friction_force(f, v)) / h
        assert f.viscous - 1e-6 <= fd <= f.viscous + 1e-3
        assert friction_slope(f, v) == pytest.approx(fd, rel=1e-6)
    for v in (-0.01, 0.0, 0.002):
        fd = (friction_force(f, v + h) - friction_force(f, v - h)) / (2 * h)
        assert friction_slope(f, v) == pytest.approx(fd, rel=1e-6)
    assert friction_slope(f, 10.0) == f.viscous
    assert friction_slope(f, -10.0) == f.viscous
    with pytest.raises(ValueError):
        FrictionParams(-1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        params(A_a=0.0)
    with pytest.raises(ValueError):
        HydraulicActuatorParams(1e-3, 1e-3, 1e9, 1e-8, 1e-8, 1e-8, 1e-8, 10e5, 20e5, 0.5)
