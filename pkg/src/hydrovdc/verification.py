"""Randomized oracle-equivalence and invariant suites.

Each ``check_*`` function draws its own cases from a seeded generator and
returns a :class:`CheckResult`. The same suites back the ``verify`` command
and the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    forward_dynamics,
    full_backward_pass,
    inverse_dynamics,
    mechanical_energy,
    oracle_internal_forces,
    structure_bodies,
)
from .geometry import RevoluteSegmentGeom, closure_accels, closure_positions, closure_rates, with_rates
from .hydraulics import (
    ActuatorState,
    FrictionParams,
    HydraulicActuatorParams,
    uf_from_flows,
    valve_flows,
    voltage_from_uf,
)
from .kinematics import chain_velocities, forward_poses, forward_velocities
from .model import D1, D2, ManipulatorModel, PrismaticSegment, PrismaticSegmentGeom, RevoluteBodies, Structure
from .spatial import BodyParams, WrenchTransform, rot_z

# --- random admissible models and states -----------------------------------------------


def random_rotation(rng) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_geom(rng) -> RevoluteSegmentGeom:
    L, L1 = rng.uniform(0.3, 1.5, size=2)
    lo, hi = abs(L - L1), L + L1
    x0 = lo + (hi - lo) * rng.uniform(0.1, 0.4)
    s = (hi - x0) * rng.uniform(0.3, 0.8)
    return RevoluteSegmentGeom(L, L1, x0, x0 * rng.uniform(0.2, 0.8), s)


def random_body(rng, gravity=(0.0, 0.0, -9.81)) -> BodyParams:
    A = rng.normal(size=(3, 3)) * 0.3
    return BodyParams.from_com_inertia(rng.uniform(0.5, 50.0), rng.uniform(-0.5, 0.5, 3), A @ A.T + 0.01 * np.eye(3), gravity)


def random_attach(rng, spatial: bool = True) -> WrenchTransform:
    R = random_rotation(rng) if spatial else rot_z(rng.uniform(-np.pi, np.pi))
    off = rng.uniform(-0.5, 0.5, 3)
    if not spatial:
        off[2] = 0.0
    return WrenchTransform(R, off)


def actuator(s: float, A_a: float = 2e-3, A_b: float = 1.2e-3) -> HydraulicActuatorParams:
    c = 3.5e-8
    return HydraulicActuatorParams(A_a, A_b, 1.5e9, c, c, c, c, 185e5, 10e5, s)


def random_structure(rng, prismatic: bool = False, spatial: bool = True, gravity=(0.0, 0.0, -9.81)) -> Structure:
    g = random_geom(rng)
    bodies = RevoluteBodies(*(random_body(rng, gravity) for _ in range(4)))
    pr = None
    if prismatic:
        s_t = rng.uniform(0.3, 1.0)
        pg = PrismaticSegmentGeom(s_t, rng.uniform(0.0, 0.5), random_attach(rng, spatial), random_attach(rng, spatial))
        pr = PrismaticSegment(pg, actuator(s_t), FrictionParams(), *(random_body(rng, gravity) for _ in range(3)))
    return Structure(g, actuator(g.s_j), bodies, FrictionParams(), random_attach(rng, spatial), pr)


def random_model(rng, n: int = 2, prismatic=None, spatial: bool = True, gravity=(0.0, 0.0, -9.81)) -> ManipulatorModel:
    if prismatic is None:
        prismatic = [bool(rng.integers(2)) for _ in range(n)]
    sts = [random_structure(rng, p, spatial, gravity) for p in prismatic]
    return ManipulatorModel(sts, D2 if prismatic[-1] else D1, random_attach(rng, spatial))


def random_coordinates(rng, model: ManipulatorModel, margin: float = 0.05) -> np.ndarray:
    q = np.empty(model.ndof)
    for st, (i, k) in zip(model.structures, model.dof_slices):
        g = st.geom
        q[i] = g.angle_from_piston(g.s_j * rng.uniform(margin, 1 - margin))
        if k is not None:
            q[k] = st.prismatic.geom.s_t * rng.uniform(margin, 1 - margin)
    return q


# --- checks ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    worst: float  # worst observed error measure
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: cases={self.cases} worst={self.worst:.3e} tol={self.tolerance:.1e} time={self.seconds:.2f}s"


def _rel(a, b, floor: float) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


def check_closed_forms(n: int = 1000, seed: int = 1, tol: float = 1e-9, force_floor: float = 1.0) -> tuple[CheckResult, CheckResult]:
    """Closed-form actuator force and driven-point wrench against the pin-force oracle.

    Each case draws a random model (1 to 3 structures, telescopic segments at
    random), coordinates, rates, accelerations and tip load. Errors are
    relative, with magnitudes below ``force_floor`` (N or N m) treated as
    ``force_floor``.
    """
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst_f = worst_w = 0.0
    for _ in range(n):
        model = random_model(rng, int(rng.integers(1, 4)))
        q = random_coordinates(rng, model)
        dq = rng.normal(size=model.ndof)
        ddq = rng.normal(size=model.ndof)
        tip = rng.normal(size=6) * 50.0
        tr = forward_velocities(model, q, dq, ddq=ddq)
        wt = full_backward_pass(model, tr, tip)
        for st, fr, w in zip(model.structures, tr.geometry.frames, wt.structures):
            sol = oracle_internal_forces(st, fr, w.F["E1"], w.F_star)
            worst_f = max(worst_f, _rel(w.f_c, sol.f_c, force_floor))
            worst_w = max(worst_w, _rel(w.F["Bc"], sol.F["Bc"], force_floor))
    dt = time.perf_counter() - t0
    return (
        CheckResult("actuator force closed form vs pin-force oracle", n, worst_f, tol, dt),
        CheckResult("driven-point wrench closed form vs stepwise recursion", n, worst_w, tol, dt),
    )


def _closure_vector(geom: RevoluteSegmentGeom, q: float) -> np.ndarray:
    c = closure_positions(geom, q)
    return np.array([c.x_j, c.q_j1, c.q_j2])


def check_closure_derivatives(n: int = 100, seed: int = 2, tol: float = 1e-5, delta: float = 1e-5) -> CheckResult:
    """Closure rates and accelerations against central differences along random smooth trajectories."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(n):
        geom = random_geom(rng)
        lo = geom.angle_from_piston(0.9 * geom.s_j)
        hi = geom.angle_from_piston(0.1 * geom.s_j)
        lo, hi = min(lo, hi), max(lo, hi)
        mid, amp = 0.5 * (lo + hi), 0.4 * (hi - lo)
        w, ph = rng.uniform(0.5, 5.0), rng.uniform(0, 2 * np.pi)

        def path(t):
            return mid + amp * np.sin(w * t + ph)

        def rate(t):
            return amp * w * np.cos(w * t + ph)

        def rates_at(t):
            pos = closure_positions(geom, path(t))
            return np.array(closure_rates(geom, pos, rate(t)))

        for t in rng.uniform(0.0, 2.0, size=3):
            fd_rates = (_closure_vector(geom, path(t + delta)) - _closure_vector(geom, path(t - delta))) / (2 * delta)
            an_rates = rates_at(t)
            state = with_rates(geom, closure_positions(geom, path(t)), rate(t))
            an_acc = np.array(closure_accels(geom, state, -amp * w * w * np.sin(w * t + ph)))
            fd_acc = (rates_at(t + delta) - rates_at(t - delta)) / (2 * delta)
            worst = max(
                worst,
                float(np.linalg.norm(an_rates - fd_rates) / np.linalg.norm(fd_rates)),
                float(np.linalg.norm(an_acc - fd_acc) / np.linalg.norm(fd_acc)),
            )
    return CheckResult("loop-closure rates and accelerations vs central differences", n, worst, tol, time.perf_counter() - t0)


def gravity_jacobian_force(model: ManipulatorModel, q) -> np.ndarray:
    """Static actuator forces balancing gravity, from COM velocity Jacobians (no force recursion)."""
    if any(st.prismatic is not None for st in model.structures):
        raise ValueError("gravity_jacobian_force supports revolute-only models")
    geo = forward_poses(model, q)
    n = model.ndof
    J = chain_velocities(geo, model, np.eye(n))
    tau = np.zeros(n)
    for st, fr, Js in zip(model.structures, geo.frames, J):
        for name, body in structure_bodies(st).items():
            V = Js[name]
            com_vel = V[:3] + np.cross(V[3:].T, body.com_offset).T
            tau += body.mass * (body.gravity_world @ (fr.R[name] @ com_vel))
    return -tau / np.array([fr.jx for fr in geo.frames])


def check_virtual_work(n: int = 50, seed: int = 3, tol: float = 1e-8) -> CheckResult:
    """Static actuator force of one revolute structure against the Jacobian-transpose gravity force."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    model = random_model(rng, 1, prismatic=[False])
    worst = 0.0
    for _ in range(n):
        q = random_coordinates(rng, model)
        f = inverse_dynamics(model, q, np.zeros(1), np.zeros(1))
        ref = gravity_jacobian_force(model, q)
        worst = max(worst, _rel(f, ref, 1e-12))
    return CheckResult("static actuator force vs Jacobian-transpose gravity force", n, worst, tol, time.perf_counter() - t0)


def check_hydraulic_round_trip(n_states: int = 20, n_grid: int = 41, seed: int = 4, tol: float = 1e-12) -> CheckResult:
    """Voltage -> flows -> u_f -> voltage on a voltage grid over random admissible states."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    grid = np.linspace(-10.0, 10.0, n_grid)
    worst = 0.0
    for _ in range(n_states):
        s = rng.uniform(0.1, 1.0)
        A_a = rng.uniform(5e-4, 5e-3)
        c = rng.uniform(1e-8, 1e-7, size=4)
        p = HydraulicActuatorParams(A_a, A_a * rng.uniform(0.3, 0.9), 1.5e9, *c, 185e5, 10e5, s)
        st = ActuatorState(s * rng.uniform(0.05, 0.95), rng.normal() * 0.1, *rng.uniform(12e5, 183e5, size=2))
        for u in grid:
            Q_a, Q_b = valve_flows(p, st, float(u))
            back = voltage_from_uf(p, st, uf_from_flows(st, Q_a, Q_b, s))
            worst = max(worst, abs(back - u) / max(1.0, abs(u)))
    return CheckResult("hydraulic round trip voltage -> flows -> u_f -> voltage", n_states * n_grid, worst, tol, time.perf_counter() - t0)


def pendulum_model(seed: int = 5, g: float = 9.81) -> tuple[ManipulatorModel, np.ndarray]:
    """One planar revolute structure with gravity turned so that mid-stroke is a stable rest pose."""
    rng = np.random.default_rng(seed)
    st = random_structure(rng, spatial=False, gravity=(0.0, 0.0, 0.0))
    model = ManipulatorModel((st,), D1)
    q_mid = np.array([st.geom.angle_from_piston(0.5 * st.geom.s_j)])
    # gradient of the first mass moment with respect to q
    geo = forward_poses(model, q_mid)
    grad = np.zeros(3)
    for name, body in structure_bodies(st).items():
        V = chain_velocities(geo, model, np.ones(1))[0][name]
        grad += body.mass * (geo.frames[0].R[name] @ (V[:3] + np.cross(V[3:], body.com_offset)))
    grad[2] = 0.0
    n = np.array([-grad[1], grad[0], 0.0]) / np.linalg.norm(grad)
    best = None
    for sign in (1.0, -1.0):
        gv = tuple(sign * g * n)
        bodies = RevoluteBodies(*(BodyParams(b.mass, b.com_offset, b.inertia, gv) for b in (st.bodies.link_base, st.bodies.link, st.bodies.cylinder, st.bodies.piston)))
        m = ManipulatorModel((Structure(st.geom, st.actuator, bodies, st.friction, st.attach),), D1)
        h = 1e-4
        U = [mechanical_energy(m, q_mid + d, np.zeros(1))[1] for d in (-h, 0.0, h)]
        if U[0] - 2 * U[1] + U[2] > 0:
            best = m
    return best, q_mid


def check_energy_audit(duration: float = 1.0, h: float = 1e-4, tol: float = 1e-6, seed: int = 5, offset: float = 0.05) -> CheckResult:
    """Passive frictionless swing with zero actuator force: drift of kinetic plus potential energy.

    The error measure is the largest excursion of the total energy divided
    by the largest kinetic energy reached.
    """
    from .simulation import rk4_step

    t0 = time.perf_counter()
    model, q_mid = pendulum_model(seed)
    zero = np.zeros(1)

    def f(y):
        return np.concatenate([y[1:], forward_dynamics(model, y[:1], y[1:], zero)])

    y = np.array([q_mid[0] + offset, 0.0])
    T, U = mechanical_energy(model, y[:1], y[1:])
    E0, T_max, worst_abs = T + U, 0.0, 0.0
    steps = int(round(duration / h))
    for _ in range(steps):
        y = rk4_step(f, y, h)
        T, U = mechanical_energy(model, y[:1], y[1:])
        T_max = max(T_max, T)
        worst_abs = max(worst_abs, abs(T + U - E0))
    return CheckResult("passive frictionless energy conservation", steps, worst_abs / T_max, tol, time.perf_counter() - t0)


def check_model_closed_forms(model: ManipulatorModel, n: int = 200, seed: int = 6, tol: float = 1e-9) -> CheckResult:
    """Closed-form actuator forces against the pin-force oracle on a given model at random states."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(n):
        q = random_coordinates(rng, model)
        tr = forward_velocities(model, q, rng.normal(size=model.ndof), ddq=rng.normal(size=model.ndof))
        wt = full_backward_pass(model, tr)
        for st, fr, w in zip(model.structures, tr.geometry.frames, wt.structures):
            sol = oracle_internal_forces(st, fr, w.F["E1"], w.F_star)
            worst = max(worst, _rel(w.f_c, sol.f_c, 1.0), _rel(w.F["Bc"], sol.F["Bc"], 1.0))
    return CheckResult("configured model closed forms vs oracle", n, worst, tol, time.perf_counter() - t0)


def check_determinism(config, duration: float = 0.2) -> CheckResult:
    """Two short closed-loop runs of the configured scenario must agree bit for bit."""
    from dataclasses import replace

    from .simulation import run_scenario

    t0 = time.perf_counter()
    sc = replace(config.scenario, duration=duration)
    a = run_scenario(config.model, config.gains, sc).columns
    b = run_scenario(config.model, config.gains, sc).columns
    same = list(a) == list(b) and all(np.array_equal(a[k], b[k]) for k in a)
    return CheckResult("closed-loop run determinism", 2, 0.0 if same else 1.0, 0.0, time.perf_counter() - t0)


def standard_checks(config=None, quick: bool = False) -> list[CheckResult]:
    """All suites; ``quick`` shrinks case counts and the energy-audit horizon."""
    k = 10 if quick else 1
    out = [
        *check_closed_forms(1000 // k),
        check_closure_derivatives(100 // k),
        check_virtual_work(50),
        check_hydraulic_round_trip(20 // (2 if quick else 1)),
        check_energy_audit(0.1 if quick else 1.0),
    ]
    if config is not None:
        out.append(check_model_closed_forms(config.model, 200 // k))
        out.append(check_determinism(config, 0.05 if quick else 0.2))
    return out
