"""Closed-loop plant simulation: trajectories, planar inverse kinematics, the plant ODE and RK4."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .controller import ControllerGains, TrajectorySample, VDCController
from .dynamics import actuator_jacobian, actuator_space_dynamics, forward_dynamics
from .errors import HydroVDCError, PressureBound, StrokeLimit, Unreachable
from .geometry import piston_from_angle
from .hydraulics import ActuatorState, chamber_pressure_rates, friction_force, piston_force_from_pressures, valve_flows
from .kinematics import ChainGeometry, forward_poses
from .model import ManipulatorModel
from .stability import accompanying_values, vpf_telescoping_check


# --- trajectories ----------------------------------------------------------------------


@dataclass(frozen=True)
class QuinticSegment:
    """Rest-to-rest quintic from ``p0`` to ``p1`` over duration ``T``."""

    p0: np.ndarray
    p1: np.ndarray
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("segment duration must be > 0")
        object.__setattr__(self, "p0", np.atleast_1d(np.asarray(self.p0, dtype=float)))
        object.__setattr__(self, "p1", np.atleast_1d(np.asarray(self.p1, dtype=float)))

    def __call__(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        T = self.T
        s = min(max(t / T, 0.0), 1.0)
        s2 = s * s
        s3 = s2 * s
        pos = s3 * (10.0 - 15.0 * s + 6.0 * s2)
        vel = 30.0 * s2 * (1.0 - s) ** 2 / T
        acc = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (T * T)
        d = self.p1 - self.p0
        return self.p0 + pos * d, vel * d, acc * d


def quintic_segment(p0, p1, T: float) -> QuinticSegment:
    return QuinticSegment(p0, p1, T)


class PiecewiseQuintic:
    """Chain of rest-to-rest quintics through joint-space waypoints, then a hold."""

    def __init__(self, waypoints, durations):
        pts = [np.asarray(p, dtype=float) for p in waypoints]
        if len(durations) != len(pts) - 1:
            raise ValueError("need one duration per leg")
        self.segments = [QuinticSegment(a, b, T) for a, b, T in zip(pts[:-1], pts[1:], durations)]
        self.starts = np.concatenate([[0.0], np.cumsum(durations)])
        self.final = pts[-1]

    @property
    def duration(self) -> float:
        return float(self.starts[-1])

    def __call__(self, t: float) -> TrajectorySample:
        k = int(np.searchsorted(self.starts, t, side="right")) - 1
        if k >= len(self.segments) or not self.segments:
            z = np.zeros_like(self.final)
            return TrajectorySample(self.final.copy(), z, z.copy())
        k = max(k, 0)
        p, v, a = self.segments[k](t - self.starts[k])
        return TrajectorySample(p, v, a)


# --- inverse kinematics -----------------------------------------------------------------


def _planar_angle(R: np.ndarray, tol: float = 1e-9) -> float:
    if abs(R[2, 2] - 1.0) > tol:
        raise Unreachable("planar inverse kinematics needs all frames rotated about the world z-axis only")
    return math.atan2(R[1, 0], R[0, 0])


def planar_ik(model: ManipulatorModel, target, elbow: int = 1, check: bool = True) -> np.ndarray:
    """Main-joint angles placing the tool origin at ``target`` (x, y).

    Supported for two revolute structures moving in the world x-y plane.
    ``elbow`` (+1 or -1) picks the branch; ``check`` also rejects solutions
    outside the cylinder strokes.
    """
    if model.n != 2 or any(st.prismatic is not None for st in model.structures):
        raise Unreachable("planar inverse kinematics is implemented for two revolute structures")
    s1, s2 = model.structures
    # a reference pose fixes the constant link vectors; any admissible angles work
    q_ref = np.array([s.geom.angle_from_piston(0.5 * s.geom.s_j) for s in (s1, s2)])
    geo = forward_poses(model, q_ref)
    f1, f2 = geo.frames
    R1, R2 = f1.R["B1"], f2.R["B1"]
    o1, o2 = f1.p["B1"], f2.p["B1"]
    r1 = (R1.T @ (o2 - o1))[:2]  # joint 1 -> joint 2, in joint-1 link frame
    r2 = (R2.T @ (geo.tool_position - o2))[:2]  # joint 2 -> tool, in joint-2 link frame
    a1 = _planar_angle(R1) - q_ref[0]  # world angle of link 1 is a1 + q1
    a2 = _planar_angle(R2) - _planar_angle(R1) - q_ref[1]  # link 2 is link 1 + a2 + q2
    for R in (geo.tool_rotation, model.base.rotation):
        _planar_angle(R)
    t = np.asarray(target, dtype=float)[:2] - o1[:2]
    l1, l2 = np.hypot(*r1), np.hypot(*r2)
    rho = np.hypot(*t)
    c = (rho * rho - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if not -1.0 <= c <= 1.0:
        raise Unreachable(f"target {tuple(t + o1[:2])} outside the reachable annulus")
    phi = elbow * math.acos(c)  # angle between the two link vectors
    b1, b2 = math.atan2(r1[1], r1[0]), math.atan2(r2[1], r2[0])
    # world direction of r2 = world direction of r1 + phi
    k1 = l1 + l2 * math.cos(phi)
    k2 = l2 * math.sin(phi)
    theta_r1 = math.atan2(t[1], t[0]) - math.atan2(k2, k1)
    th1 = theta_r1 - b1  # world angle of link frame 1
    th2 = theta_r1 + phi - b2
    q1 = _wrap(th1 - a1)
    q2 = _wrap(th2 - th1 - a2)
    q = np.array([q1, q2])
    if check:
        for st, qj in zip(model.structures, q):
            if not -math.pi < qj < 0.0:
                raise Unreachable(f"joint angle {qj!r} outside the admissible branch")
            try:
                piston_from_angle(st.geom, qj)
            except StrokeLimit as exc:
                raise Unreachable(str(exc)) from None
    return q


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


# --- plant ------------------------------------------------------------------------------


@dataclass
class PlantState:
    """Coordinates, rates and chamber pressures (one pair per actuator)."""

    q: np.ndarray
    dq: np.ndarray
    p_a: np.ndarray
    p_b: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.dq, self.p_a, self.p_b])

    @classmethod
    def from_vector(cls, y, ndof: int) -> "PlantState":
        y = np.asarray(y, dtype=float)
        n = ndof
        return cls(y[:n], y[n : 2 * n], y[2 * n : 3 * n], y[3 * n : 4 * n])

    @property
    def pressures(self) -> list[tuple[float, float]]:
        return list(zip(self.p_a.tolist(), self.p_b.tolist()))


def state_dimension(model: ManipulatorModel) -> int:
    return 4 * model.ndof


@dataclass
class Mechanics:
    """Everything about a plant state that does not depend on the valve voltages."""

    state: PlantState
    geometry: ChainGeometry
    actuators: list[ActuatorState]
    ddq: np.ndarray
    f_p: np.ndarray
    f_f: np.ndarray


def mechanics(model: ManipulatorModel, y, tip_wrench=None) -> Mechanics:
    """Joint accelerations driven by the current chamber pressures minus friction."""
    n = model.ndof
    st = PlantState.from_vector(y, n)
    geo = forward_poses(model, st.q)
    D = actuator_jacobian(model, geo)
    acts = model.actuators()
    states = []
    f_p = np.empty(n)
    f_f = np.empty(n)
    for a, ((params, fric), x) in enumerate(zip(acts, _actuator_positions(model, geo))):
        s = ActuatorState(x, D[a] * st.dq[a], st.p_a[a], st.p_b[a])
        if not 0.0 < x < params.s:
            raise StrokeLimit(f"actuator {a}: piston position {x!r} outside (0, {params.s!r})")
        states.append(s)
        f_p[a] = piston_force_from_pressures(params, s)
        f_f[a] = friction_force(fric, s.dx)
    ddq = forward_dynamics(model, st.q, st.dq, f_p - f_f, tip_wrench, geo=geo)
    return Mechanics(st, geo, states, ddq, f_p, f_f)


def _actuator_positions(model: ManipulatorModel, geo) -> list[float]:
    out = []
    for fr in geo.frames:
        out.append(fr.closure.x_j)
        if fr.x_t is not None:
            out.append(fr.x_t)
    return out


def pressure_rates(model: ManipulatorModel, mech: Mechanics, u) -> tuple[np.ndarray, np.ndarray]:
    n = len(mech.actuators)
    dpa = np.empty(n)
    dpb = np.empty(n)
    for a, ((params, _), s) in enumerate(zip(model.actuators(), mech.actuators)):
        Q_a, Q_b = valve_flows(params, s, float(u[a]))
        dpa[a], dpb[a] = chamber_pressure_rates(params, s, Q_a, Q_b)
    return dpa, dpb


def plant_derivative(model: ManipulatorModel, y, u, tip_wrench=None, mech: Mechanics | None = None) -> np.ndarray:
    """Time derivative of the stacked plant state for valve voltages ``u``."""
    if mech is None:
        mech = mechanics(model, y, tip_wrench)
    dpa, dpb = pressure_rates(model, mech, u)
    return np.concatenate([mech.state.dq, mech.ddq, dpa, dpb])


def rk4_step(f: Callable[[np.ndarray], np.ndarray], y, h: float, k1=None) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step; ``k1`` may be supplied if already known."""
    if not h > 0:
        raise ValueError("step must be > 0")
    y = np.asarray(y, dtype=float)
    if k1 is None:
        k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def static_pressures(model: ManipulatorModel, q, tip_wrench=None) -> tuple[np.ndarray, np.ndarray]:
    """Chamber pressures holding ``q`` at rest, with each mean pressure midway between supply and return."""
    geo = forward_poses(model, q)
    _, f = actuator_space_dynamics(model, geo, np.zeros(model.ndof), tip_wrench)
    p_a, p_b = [], []
    for (params, _), fa in zip(model.actuators(), f):
        p_m = 0.5 * (params.p_s + params.p_r)
        pa = (fa + 2.0 * p_m * params.A_b) / (params.A_a + params.A_b)
        pb = 2.0 * p_m - pa
        for name, p in (("p_a", pa), ("p_b", pb)):
            if not params.p_r < p < params.p_s:
                raise PressureBound(f"static {name}={p!r} Pa cannot hold the load")
        p_a.append(pa)
        p_b.append(pb)
    return np.array(p_a), np.array(p_b)


# --- scenario ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathSpec:
    """Tool-space waypoints visited in loops, joined by joint-space quintics.

    The run starts at rest at ``start`` (defaults to the first waypoint),
    moves to the first waypoint in ``approach_time`` (0 makes the first
    waypoint the desired position from t=0), loops ``loops`` times through
    all waypoints back to the first, then holds for ``final_hold``.
    """

    waypoints: tuple
    start: tuple | None = None
    leg_time: float = 2.0
    approach_time: float = 2.0
    loops: int = 2
    final_hold: float = 1.0
    elbow: int = 1


@dataclass(frozen=True)
class Scenario:
    path: PathSpec
    h: float = 1e-3
    duration: float | None = None
    filter_tau: float | None = None
    tip_wrench: tuple = (0.0,) * 6


def build_trajectory(model: ManipulatorModel, path: PathSpec) -> tuple[np.ndarray, PiecewiseQuintic]:
    """(initial coordinates, desired joint trajectory)."""
    wp = [planar_ik(model, p, path.elbow) for p in path.waypoints]
    q0 = wp[0] if path.start is None else planar_ik(model, path.start, path.elbow)
    pts, durs = [q0], []
    if path.approach_time > 0:
        pts.append(wp[0])
        durs.append(path.approach_time)
    else:
        pts = [wp[0]]
    if len(wp) > 1:
        for _ in range(path.loops):
            for q in wp[1:] + wp[:1]:
                pts.append(q)
                durs.append(path.leg_time)
    return q0, PiecewiseQuintic(pts, durs)


class SimulationAborted(HydroVDCError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"simulation aborted at step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass
class SimulationResult:
    columns: dict[str, np.ndarray]
    h: float
    leg_starts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_structures: int = 0
    n_actuators: int = 0

    def __getitem__(self, key: str) -> np.ndarray:
        return self.columns[key]


def _column_names(model: ManipulatorModel) -> list[str]:
    names = ["t_s"]
    for i in range(model.ndof):
        names += [f"q{i + 1}_des", f"q{i + 1}"]
    names += ["tool_x_des_m", "tool_y_des_m", "tool_x_m", "tool_y_m", "tool_err_m"]
    for a in range(model.ndof):
        k = a + 1
        names += [f"x{k}_m", f"fp{k}_N", f"fp{k}_req_N", f"pa{k}_Pa", f"pb{k}_Pa", f"u{k}_V"]
    for j in range(model.n):
        k = j + 1
        names += [f"nu{k}_J", f"rhs{k}_W", f"p_bc{k}_W", f"p_e{k}_W"]
    names += ["vpf_residual_W"]
    return names


def coordinate_units(model: ManipulatorModel) -> list[str]:
    """Unit suffix per generalized coordinate: radians for main joints, metres for telescopic strokes."""
    out = []
    for i, k in model.dof_slices:
        out.append("rad")
        if k is not None:
            out.append("m")
    return out


def run_scenario(model: ManipulatorModel, gains: ControllerGains, scenario: Scenario) -> SimulationResult:
    """Fixed-step closed-loop run; the controller output is held over each step."""
    h = scenario.h
    q0, traj = build_trajectory(model, scenario.path)
    duration = scenario.duration if scenario.duration is not None else traj.duration + scenario.path.final_hold
    steps = int(round(duration / h))
    tip = np.asarray(scenario.tip_wrench, dtype=float)
    tip_arg = tip if np.any(tip) else None
    pa, pb = static_pressures(model, q0, tip_arg)
    y = PlantState(q0.copy(), np.zeros(model.ndof), pa, pb).to_vector()
    ctrl = VDCController(model, gains, h, scenario.filter_tau)
    n = model.ndof
    names = _column_names(model)
    data = np.empty((steps + 1, len(names)))

    def f(yy):
        return plant_derivative(model, yy, u, tip_arg)

    for k in range(steps + 1):
        t = k * h
        try:
            mech = mechanics(model, y, tip_arg)
            _check_pressures(model, mech)
            sample = traj(t)
            out = ctrl.step(sample, mech.state.q, mech.state.dq, mech.state.pressures, mech.ddq, tip_arg, mech.geometry)
            rows = accompanying_values(model, out, gains)
        except HydroVDCError as exc:
            raise SimulationAborted(k, exc) from exc
        u = out.u
        tool = out.trace.geometry.tool_position
        tool_d = forward_poses(model, sample.q, check=False).tool_position
        row = [t]
        for i in range(n):
            row += [sample.q[i], mech.state.q[i]]
        row += [tool_d[0], tool_d[1], tool[0], tool[1], float(np.hypot(*(tool - tool_d)[:2]))]
        for a in range(n):
            row += [out.x[a], out.fp[a], out.fp_required[a], mech.state.p_a[a], mech.state.p_b[a], u[a]]
        for r in rows:
            row += [r.nu, r.rhs, r.p_driven, r.p_driving]
        row.append(vpf_telescoping_check(rows))
        data[k] = row
        if k == steps:
            break
        k1 = plant_derivative(model, y, u, tip_arg, mech)
        try:
            y = rk4_step(f, y, h, k1)
        except HydroVDCError as exc:
            raise SimulationAborted(k, exc) from exc
    cols = {name: data[:, i] for i, name in enumerate(names)}
    units = coordinate_units(model)
    cols = {_unit_name(name, units): v for name, v in cols.items()}
    return SimulationResult(cols, h, traj.starts.copy(), model.n, n)


def _unit_name(name: str, units: list[str]) -> str:
    if name.startswith("q") and name[1].isdigit():
        idx = int(name[1:].split("_")[0]) - 1
        return f"{name}_{units[idx]}"
    return name


def _check_pressures(model: ManipulatorModel, mech: Mechanics) -> None:
    for a, ((params, _), s) in enumerate(zip(model.actuators(), mech.actuators)):
        for name, p in (("p_a", s.p_a), ("p_b", s.p_b)):
            if not params.p_r < p < params.p_s:
                raise PressureBound(f"actuator {a + 1}: {name}={float(p)!r} Pa outside ({params.p_r!r}, {params.p_s!r})")
