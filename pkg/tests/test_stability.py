from __future__ import annotations

import numpy as np
import pytest

from factories import random_coordinates, random_model
from hydrovdc.controller import ControllerGains, TrajectorySample, VDCController
from hydrovdc.stability import (
    accompanying_values,
    differentiation_noise_floor,
    numeric_rate,
    stability_violations,
    vpf,
    vpf_telescoping_check,
)


def test_vpf_cases():
    rng = np.random.default_rng(0)
    V, F = rng.normal(size=6), rng.normal(size=6)
    assert vpf(V, V, rng.normal(size=6), F) == 0.0
    assert vpf(rng.normal(size=6), V, F, F) == 0.0
    for _ in range(100):
        Vr, V, Fr, F = rng.normal(size=(4, 6))
        ref = sum((Vr[i] - V[i]) * (Fr[i] - F[i]) for i in range(6))
        assert abs(vpf(Vr, V, Fr, F) - ref) <= 1e-15 * max(1.0, abs(ref)) * 8


def _step(m, rng, q, dq, sample, pressures, ddq):
    gains = ControllerGains.uniform(m.n)
    ctrl = VDCController(m, gains, 1e-3)
    out = ctrl.step(sample, q, dq, pressures, ddq_measured=ddq)
    return out, gains


def _random_pressures(rng, m):
    return [tuple(rng.uniform(20e5, 170e5, 2)) for _ in m.actuators()]


def test_perfect_tracking_gives_zero_energies():
    rng = np.random.default_rng(1)
    for _ in range(20):
        m = random_model(rng, int(rng.integers(1, 4)))
        q = random_coordinates(rng, m, margin=0.2)
        dq, ddq = rng.normal(size=m.ndof), rng.normal(size=m.ndof)
        sample = TrajectorySample(q, dq, ddq)
        probe, gains = _step(m, rng, q, dq, sample, _random_pressures(rng, m), ddq)
        pressures = []
        for (p, _), f in zip(m.actuators(), probe.fp_required):
            p_b = 0.5 * (p.p_s + p.p_r)
            pressures.append(((f + p.A_b * p_b) / p.A_a, p_b))
        out, gains = _step(m, rng, q, dq, sample, pressures, ddq)
        for r in accompanying_values(m, out, gains):
            assert r.nu == pytest.approx(0.0, abs=1e-12)
            assert r.p_driven == 0.0 and r.p_driving == 0.0
            assert r.rhs == pytest.approx(r.p_driven - r.p_driving, abs=1e-9)


def test_single_fixed_base_structure_without_load_has_nonpositive_bound():
    rng = np.random.default_rng(2)
    for _ in range(50):
        m = random_model(rng, 1)
        q = random_coordinates(rng, m, margin=0.2)
        dq, ddq = rng.normal(size=m.ndof), rng.normal(size=m.ndof)
        sample = TrajectorySample(q + 0.01 * rng.normal(size=m.ndof), rng.normal(size=m.ndof), rng.normal(size=m.ndof))
        out, gains = _step(m, rng, q, dq, sample, _random_pressures(rng, m), ddq)
        (r,) = accompanying_values(m, out, gains)
        assert r.p_driven == 0.0 and r.p_driving == 0.0
        assert r.rhs <= 0.0
        assert r.nu > 0.0 and all(v >= 0 for v in r.nu_bodies.values()) and all(v >= 0 for v in r.nu_actuators)


def test_virtual_power_flows_telescope_between_structures():
    rng = np.random.default_rng(3)
    for _ in range(30):
        m = random_model(rng, int(rng.integers(2, 4)))
        q = random_coordinates(rng, m, margin=0.2)
        dq, ddq = rng.normal(size=m.ndof), rng.normal(size=m.ndof)
        sample = TrajectorySample(q + 0.01 * rng.normal(size=m.ndof), rng.normal(size=m.ndof), rng.normal(size=m.ndof))
        out, gains = _step(m, rng, q, dq, sample, _random_pressures(rng, m), ddq)
        rows = accompanying_values(m, out, gains)
        assert abs(vpf_telescoping_check(rows)) <= 1e-10
        assert any(abs(r.p_driving) > 1e-6 for r in rows[:-1])
        # corrupt the wrench handed from the first structure to the second
        W = out.wrenches.structures[0]
        term = out.trace.geometry.frames[0].terminal
        W.F[term] = W.F[term] + 10.0
        assert abs(vpf_telescoping_check(accompanying_values(m, out, gains))) > 1e-6


def test_accompanying_values_need_measured_wrenches():
    rng = np.random.default_rng(4)
    m = random_model(rng, 1)
    q = random_coordinates(rng, m, margin=0.2)
    z = np.zeros(m.ndof)
    gains = ControllerGains.uniform(1)
    out = VDCController(m, gains, 1e-3).step(TrajectorySample(q, z, z), q, z, _random_pressures(rng, m))
    with pytest.raises(ValueError):
        accompanying_values(m, out, gains)


def test_numeric_rate_and_violation_mask():
    h = 1e-3
    t = np.arange(0, 1, h)
    nu = t**2
    assert np.allclose(numeric_rate(nu, h)[1:-1], 2 * t[1:-1], atol=1e-12)
    floor = differentiation_noise_floor(nu, h)
    assert np.all(floor >= 0) and floor[2:-2].max() < 1e-9
    bad, _ = stability_violations(nu, 2 * t, h)
    assert not bad[1:-1].any()
    bad, _ = stability_violations(nu, 2 * t - 1.0, h)
    assert bad.all()
