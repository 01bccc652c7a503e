"""Cylinder chamber pressures, servo-valve orifice flows and piston friction."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import PressureBound, StrokeLimit

PRESSURE_GUARD = 1e2  # Pa kept clear of p_r and p_s before inverting the valve map


@dataclass(frozen=True)
class HydraulicActuatorParams:
    A_a: float
    A_b: float
    beta: float
    c_p1: float
    c_p2: float
    c_n1: float
    c_n2: float
    p_s: float
    p_r: float
    s: float

    def __post_init__(self):
        for name in ("A_a", "A_b", "beta", "c_p1", "c_p2", "c_n1", "c_n2", "p_s", "s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not (self.p_s > self.p_r >= 0):
            raise ValueError("need p_s > p_r >= 0")


@dataclass(frozen=True)
class ActuatorState:
    x: float
    dx: float
    p_a: float
    p_b: float


@dataclass(frozen=True)
class FrictionParams:
    coulomb: float = 0.0
    viscous: float = 0.0
    transition_velocity: float = 1e-3

    def __post_init__(self):
        if self.coulomb < 0 or self.viscous < 0 or not self.transition_velocity > 0:
            raise ValueError("friction parameters must be non-negative with positive transition velocity")


def upsilon(dp: float) -> float:
    """Signed square root of a pressure drop."""
    return math.copysign(math.sqrt(abs(dp)), dp)


def _check_stroke(x: float, s: float) -> None:
    if not 0.0 < x < s:
        raise StrokeLimit(f"piston position {x!r} outside (0, {s!r})")


def piston_force_from_pressures(params: HydraulicActuatorParams, state: ActuatorState) -> float:
    return params.A_a * state.p_a - params.A_b * state.p_b


def chamber_pressure_rates(
    params: HydraulicActuatorParams, state: ActuatorState, Q_a: float, Q_b: float
) -> tuple[float, float]:
    x, s = state.x, params.s
    _check_stroke(x, s)
    dp_a = params.beta / params.A_a * (Q_a / x - params.A_a * state.dx / x)
    dp_b = params.beta / params.A_b * (Q_b / (s - x) + params.A_b * state.dx / (s - x))
    return dp_a, dp_b


def valve_flows(params: HydraulicActuatorParams, state: ActuatorState, u: float) -> tuple[float, float]:
    """Orifice flows into chamber a and chamber b for valve voltage ``u``."""
    p_s, p_r = params.p_s, params.p_r
    if u > 0:
        Q_a = params.c_p1 * upsilon(p_s - state.p_a) * u
        Q_b = -params.c_n2 * upsilon(state.p_b - p_r) * u
    elif u < 0:
        Q_a = params.c_n1 * upsilon(state.p_a - p_r) * u
        Q_b = -params.c_p2 * upsilon(p_s - state.p_b) * u
    else:
        Q_a = Q_b = 0.0
    return Q_a, Q_b


def uf_from_flows(state: ActuatorState, Q_a: float, Q_b: float, s: float) -> float:
    """Voltage-related term ``Q_a/x - Q_b/(s - x)``."""
    _check_stroke(state.x, s)
    return Q_a / state.x - Q_b / (s - state.x)


def velocity_gain(params: HydraulicActuatorParams, x: float) -> float:
    """``A_a/x + A_b/(s - x)``, the piston-velocity coefficient of the force rate."""
    _check_stroke(x, params.s)
    return params.A_a / x + params.A_b / (params.s - x)


def piston_force_rate(params: HydraulicActuatorParams, state: ActuatorState, u_f: float) -> float:
    return params.beta * (u_f - velocity_gain(params, state.x) * state.dx)


def check_pressures(params: HydraulicActuatorParams, state: ActuatorState, guard: float = PRESSURE_GUARD) -> None:
    lo, hi = params.p_r + guard, params.p_s - guard
    for name, p in (("p_a", state.p_a), ("p_b", state.p_b)):
        if not lo < p < hi:
            raise PressureBound(f"{name}={p!r} Pa outside ({params.p_r!r}, {params.p_s!r}) guard band")


def voltage_from_uf(params: HydraulicActuatorParams, state: ActuatorState, u_f: float) -> float:
    """Invert the valve map: the voltage whose flows produce ``u_f``."""
    check_pressures(params, state)
    x, s = state.x, params.s
    _check_stroke(x, s)
    if u_f > 0:
        g = params.c_p1 * upsilon(params.p_s - state.p_a) / x + params.c_n2 * upsilon(state.p_b - params.p_r) / (s - x)
        return u_f / g
    if u_f < 0:
        g = params.c_p2 * upsilon(params.p_s - state.p_b) / (s - x) + params.c_n1 * upsilon(state.p_a - params.p_r) / x
        return u_f / g
    return 0.0


def friction_force(friction: FrictionParams, dx: float) -> float:
    """Smooth Coulomb plus viscous friction; odd and non-decreasing in ``dx``."""
    return friction.coulomb * math.tanh(dx / friction.transition_velocity) + friction.viscous * dx


def friction_slope(friction: FrictionParams, dx: float) -> float:
    """d(friction_force)/d(dx)."""
    t = math.tanh(dx / friction.transition_velocity)
    return friction.coulomb * (1.0 - t * t) / friction.transition_velocity + friction.viscous


def flow_coefficient_from_rating(rated_flow_lpm: float, rated_dp_bar: float, rated_voltage: float = 10.0) -> float:
    """Per-volt orifice coefficient from a datasheet 'Q at dp per notch' rating."""
    return (rated_flow_lpm / 60000.0) / (rated_voltage * math.sqrt(rated_dp_bar * 1e5))
