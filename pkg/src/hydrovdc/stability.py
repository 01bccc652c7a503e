"""Virtual power flows, accompanying functions and the per-structure stability bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import ControllerGains, ControlOutput
from .dynamics import structure_bodies
from .model import ManipulatorModel


def vpf(V_r, V, F_r, F) -> float:
    """Virtual power flow: velocity error dotted with wrench error."""
    return float(np.dot(np.asarray(V_r) - np.asarray(V), np.asarray(F_r) - np.asarray(F)))


@dataclass(frozen=True)
class StructureStability:
    nu_bodies: dict  # frame -> kinetic-error energy (J)
    nu_actuators: tuple[float, ...]  # force-error energies (J)
    nu: float
    rhs: float  # analytic upper bound on d(nu)/dt (W)
    p_driven: float  # VPF at Bc
    p_driving: float  # VPF at the terminal frame (E1 or E2)


def accompanying_values(model: ManipulatorModel, out: ControlOutput, gains: ControllerGains) -> list[StructureStability]:
    """Accompanying functions and bound for every structure at one control step.

    Needs the measured wrenches, i.e. the control step must have been given
    measured accelerations.
    """
    if out.wrenches is None:
        raise ValueError("measured wrenches are needed; pass measured accelerations to the control step")
    tr = out.trace
    rows = []
    a = 0
    for st, g, fr, V, Vr, W, Wr in zip(
        model.structures, gains.structures, tr.geometry.frames, tr.V, tr.Vr,
        out.wrenches.structures, out.wrenches_required.structures,
    ):
        nu_b = {}
        damping = 0.0
        for name, body in structure_bodies(st).items():
            dV = Vr[name] - V[name]
            nu_b[name] = 0.5 * float(dV @ body.mass_matrix @ dV)
            damping += float(dV @ g.body_gain(name) @ dV)
        act = [(g.k_x, g.k_f, st.actuator.beta)]
        if st.prismatic is not None:
            act.append((g.k_xt, g.k_ft, st.prismatic.actuator.beta))
        nu_a = []
        force_term = 0.0
        for k_x, k_f, beta in act:
            e = out.fp_required[a] - out.fp[a]
            nu_a.append(e * e / (2.0 * beta * k_x))
            force_term += k_f / k_x * e * e
            a += 1
        term = fr.terminal
        p_in = vpf(Vr["Bc"], V["Bc"], Wr.F["Bc"], W.F["Bc"])
        p_out = vpf(Vr[term], V[term], Wr.F[term], W.F[term])
        nu = sum(nu_b.values()) + sum(nu_a)
        rows.append(StructureStability(nu_b, tuple(nu_a), nu, -damping + p_in - p_out - force_term, p_in, p_out))
    return rows


def vpf_telescoping_check(rows: list[StructureStability]) -> float:
    """Sum over interior cut frames of (driving-side VPF - driven-side VPF)."""
    return float(sum(rows[j].p_driving - rows[j + 1].p_driven for j in range(len(rows) - 1)))


def numeric_rate(values, h: float) -> np.ndarray:
    """Central differences in the interior, one-sided at the ends."""
    return np.gradient(np.asarray(values, dtype=float), h)


def differentiation_noise_floor(values, h: float) -> np.ndarray:
    """Pointwise error estimate of :func:`numeric_rate`.

    Compares the step-h and step-2h central differences (their gap measures
    the truncation error) and adds the round-off of differencing the values.
    """
    v = np.asarray(values, dtype=float)
    d1 = numeric_rate(v, h)
    d2 = np.empty_like(v)
    d2[2:-2] = (v[4:] - v[:-4]) / (4.0 * h)
    d2[:2] = d1[:2]
    d2[-2:] = d1[-2:]
    scale = np.maximum(np.abs(v), np.max(np.abs(v)) * 1e-3) if v.size else v
    return np.abs(d1 - d2) + 4.0 * np.finfo(float).eps * scale / h


def stability_violations(nu, rhs, h: float, factor: float = 3.0) -> tuple[np.ndarray, np.ndarray]:
    """Boolean mask of steps where the numeric d(nu)/dt exceeds rhs + factor x noise floor, and the rates."""
    rate = numeric_rate(nu, h)
    tol = factor * differentiation_noise_floor(nu, h)
    return rate > np.asarray(rhs) + tol, rate
