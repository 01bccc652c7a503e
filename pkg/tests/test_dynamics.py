from __future__ import annotations

import numpy as np
import pytest

from factories import random_coordinates, random_model, random_structure
from hydrovdc.controller import ControllerGains
from hydrovdc.dynamics import (
    actuator_jacobian,
    body_net_wrenches,
    forward_dynamics,
    full_backward_pass,
    inverse_dynamics,
    mass_matrix,
    mechanical_energy,
    oracle_internal_forces,
    prismatic_backward,
    required_backward_pass,
    revolute_actuator_force,
    revolute_driven_wrench,
    structure_bodies,
)
from hydrovdc.errors import SingularMassMatrix
from hydrovdc.kinematics import forward_poses, forward_required_velocities, forward_velocities, required_accelerations
from hydrovdc.model import D1, ManipulatorModel, RevoluteBodies, Structure
from hydrovdc.spatial import BodyParams, WrenchTransform
from hydrovdc.verification import check_closed_forms, check_virtual_work, gravity_jacobian_force


def _zero_star(st):
    return {name: np.zeros(6) for name in structure_bodies(st)}


def _frames(rng, prismatic=False, n=1):
    m = random_model(rng, n, prismatic=[prismatic] * n)
    q = random_coordinates(rng, m)
    return m, forward_poses(m, q)


def _U_between(fr, parent, child):
    R = fr.R[parent].T @ fr.R[child]
    return WrenchTransform(R, fr.R[parent].T @ (fr.p[child] - fr.p[parent])).matrix


def test_prismatic_backward_zero_and_axial_load():
    rng = np.random.default_rng(0)
    m, geo = _frames(rng, prismatic=True)
    st, fr = m.structures[0], geo.frames[0]
    f_ct, P2F, _ = prismatic_backward(fr, np.zeros(6), _zero_star(st))
    assert f_ct == 0.0 and np.array_equal(P2F, np.zeros(6))
    # a force along the slide axis is carried entirely by the telescopic actuator
    axial = np.array([123.0, 0, 0, 0, 0, 0])
    f_ct, _, F = prismatic_backward(fr, np.linalg.solve(_U_between(fr, "B5", "E2"), axial), _zero_star(st))
    assert f_ct == pytest.approx(123.0, abs=1e-9)
    assert np.allclose(F["B5"], axial, atol=1e-9)


def test_prismatic_wrench_matches_world_frame_sum():
    rng = np.random.default_rng(1)
    for _ in range(50):
        m = random_model(rng, 1, prismatic=[True])
        q = random_coordinates(rng, m)
        tr = forward_velocities(m, q, rng.normal(size=m.ndof), ddq=rng.normal(size=m.ndof))
        Fs = body_net_wrenches(m, tr.geometry, tr.V, tr.dV)[0]
        fr = tr.geometry.frames[0]
        F_E2 = rng.normal(size=6) * 20
        _, P2F, _ = prismatic_backward(fr, F_E2, Fs)
        ref = _U_between(fr, "P2", "E2") @ F_E2
        for b in ("P2", "B5", "P3"):
            ref = ref + _U_between(fr, "P2", b) @ Fs[b]
        assert np.allclose(P2F, ref, atol=1e-9 * (1 + np.abs(ref).max()))


def test_revolute_zero_loads_give_zero_force_and_wrench():
    rng = np.random.default_rng(2)
    m, geo = _frames(rng)
    st, fr = m.structures[0], geo.frames[0]
    assert revolute_actuator_force(st, fr, np.zeros(6), _zero_star(st)) == 0.0
    assert np.array_equal(revolute_driven_wrench(fr, np.zeros(6), _zero_star(st)), np.zeros(6))


def test_driven_wrench_with_only_an_end_load():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m, geo = _frames(rng)
        st, fr = m.structures[0], geo.frames[0]
        F_E1 = rng.normal(size=6) * 100
        got = revolute_driven_wrench(fr, F_E1, _zero_star(st))
        assert np.allclose(got, _U_between(fr, "Bc", "E1") @ F_E1, atol=1e-9 * np.abs(got).max())


def test_oracle_moment_balances_at_the_frictionless_joints():
    rng = np.random.default_rng(4)
    for _ in range(50):
        m = random_model(rng, 1, prismatic=[False])
        q = random_coordinates(rng, m)
        tr = forward_velocities(m, q, rng.normal(size=1), ddq=rng.normal(size=1))
        Fs = body_net_wrenches(m, tr.geometry, tr.V, tr.dV)[0]
        st, fr = m.structures[0], tr.geometry.frames[0]
        sol = oracle_internal_forces(st, fr, rng.normal(size=6) * 30, Fs)
        scale = 1 + max(np.abs(v).max() for v in sol.F.values())
        # the link pivot, the cylinder pivot and the rod pin carry no moment about z
        for name in ("B1", "B3", "P1"):
            assert abs(sol.F[name][5]) <= 1e-10 * scale
        assert sol.f_c == pytest.approx(sol.F["B4"][0], abs=0)
        assert sol.F["P1"][2:].tolist() == [0.0] * 4


def test_closed_forms_agree_with_oracle_on_a_sample():
    f, w = check_closed_forms(n=200, seed=11)
    assert f.passed and w.passed


def test_static_force_matches_virtual_work_on_a_sample():
    r = check_virtual_work(n=20, seed=12)
    assert r.passed
    with pytest.raises(ValueError):
        gravity_jacobian_force(random_model(np.random.default_rng(0), 1, prismatic=[True]), np.array([0.1, 0.2]))


def test_chain_feeds_driven_wrench_to_the_parent():
    rng = np.random.default_rng(5)
    for prismatic in ([False, False], [False, True], [True, False]):
        m = random_model(rng, 2, prismatic=prismatic)
        tr = forward_velocities(m, random_coordinates(rng, m), rng.normal(size=m.ndof), ddq=rng.normal(size=m.ndof))
        wt = full_backward_pass(m, tr, rng.normal(size=6))
        first, second = wt.structures
        parent_end = "E2" if first.f_ct is not None else "E1"
        assert np.array_equal(first.F[parent_end], second.F["Bc"])


def test_required_pass_equals_measured_pass_without_errors_and_is_linear_in_gain():
    rng = np.random.default_rng(6)
    for _ in range(20):
        m = random_model(rng, 2)
        q = random_coordinates(rng, m)
        dq, ddq = rng.normal(size=m.ndof), rng.normal(size=m.ndof)
        tr = forward_velocities(m, q, dq, ddq=ddq)
        forward_required_velocities(m, tr, dq)
        required_accelerations(m, tr, ddq)
        K = ControllerGains.uniform(2).body_gains(m)
        f_meas = full_backward_pass(m, tr).actuator_forces()
        f_req = required_backward_pass(m, tr, K).actuator_forces()
        assert np.allclose(f_req, f_meas, atol=1e-9 * (1 + np.abs(f_meas).max()))

        tr = forward_velocities(m, q, dq, ddq=ddq)
        forward_required_velocities(m, tr, dq + rng.normal(size=m.ndof))
        required_accelerations(m, tr, ddq)
        zero = [{k: np.zeros((6, 6)) for k in Ks} for Ks in K]
        double = [{k: 2 * v for k, v in Ks.items()} for Ks in K]
        base = required_backward_pass(m, tr, zero).actuator_forces()
        d1 = required_backward_pass(m, tr, K).actuator_forces() - base
        d2 = required_backward_pass(m, tr, double).actuator_forces() - base
        assert np.allclose(d2, 2 * d1, atol=1e-9 * (1 + np.abs(base).max()))


def test_actuator_power_equals_energy_rate():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = random_model(rng, int(rng.integers(1, 4)))
        q = random_coordinates(rng, m, margin=0.2)
        dq, ddq = rng.normal(size=m.ndof), rng.normal(size=m.ndof)
        f = inverse_dynamics(m, q, dq, ddq)
        D = actuator_jacobian(m, forward_poses(m, q))
        power = float(f @ (D * dq))
        d = 1e-5

        def energy(t):
            return sum(mechanical_energy(m, q + dq * t + 0.5 * ddq * t * t, dq + ddq * t))

        rate = (energy(d) - energy(-d)) / (2 * d)
        assert power == pytest.approx(rate, rel=1e-6, abs=1e-6)


def test_forward_inverse_round_trip_and_mass_matrix():
    rng = np.random.default_rng(8)
    for _ in range(50):
        m = random_model(rng, int(rng.integers(1, 4)))
        q = random_coordinates(rng, m)
        dq, ddq = rng.normal(size=m.ndof), rng.normal(size=m.ndof)
        tip = rng.normal(size=6) * 10
        f = inverse_dynamics(m, q, dq, ddq, tip_wrench=tip)
        back = forward_dynamics(m, q, dq, f, tip_wrench=tip)
        assert np.linalg.norm(back - ddq) <= 1e-8 * max(1.0, np.linalg.norm(ddq))
        M = mass_matrix(m, q)
        assert np.allclose(M, M.T, atol=1e-9 * np.abs(M).max())
        assert np.linalg.eigvalsh(M).min() > 0


def test_rest_with_zero_gravity_needs_no_force():
    rng = np.random.default_rng(9)
    m = random_model(rng, 2, gravity=(0.0, 0.0, 0.0))
    q = random_coordinates(rng, m)
    z = np.zeros(m.ndof)
    assert np.allclose(inverse_dynamics(m, q, z, z), 0.0, atol=1e-12)
    assert np.allclose(forward_dynamics(m, q, z, z), 0.0, atol=1e-12)


def test_massless_structure_is_rejected_by_forward_dynamics():
    rng = np.random.default_rng(10)
    st = random_structure(rng)
    massless = RevoluteBodies(*(BodyParams(0.0) for _ in range(4)))
    m = ManipulatorModel((Structure(st.geom, st.actuator, massless, st.friction, st.attach),), D1)
    q = random_coordinates(rng, m)
    with pytest.raises(SingularMassMatrix):
        forward_dynamics(m, q, np.zeros(1), np.ones(1))
