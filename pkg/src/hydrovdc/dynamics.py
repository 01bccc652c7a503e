"""Tip-to-base force recursions, closed-form actuator forces, the pin-force oracle and forward dynamics.

Wrenches follow the same convention as velocities: 6-vectors expressed in
the frame they are attached to. The wrench at a cut frame is the one the
base-side body applies to the tip-side body. All backward functions are
linear in their wrench inputs and accept (6,) or (6, k) arrays, which lets
one pass produce every column of the mass matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClosureSingularity, SingularMassMatrix, SingularSystem
from .geometry import SIN_GUARD
from .kinematics import (
    ChainGeometry,
    KinematicTrace,
    StructureFrames,
    chain_accelerations,
    chain_velocities,
    forward_poses,
    forward_velocities,
)
from .model import ManipulatorModel, Structure
from .spatial import planar_transform

def structure_bodies(st: Structure) -> dict:
    """Frame name -> BodyParams for every rigid body of a structure."""
    b = st.bodies
    out = {"B0": b.link_base, "B1": b.link, "B3": b.cylinder, "B4": b.piston}
    if st.prismatic is not None:
        p = st.prismatic
        out.update({"P2": p.mount, "B5": p.case, "P3": p.load})
    return out


def _cross(a, b) -> tuple[float, float, float]:
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _coriolis_wrench(body, V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """C(omega) @ W with omega taken from V, without forming the 6x6 matrix."""
    # scalar arithmetic: numpy's cross is slow for 3-vectors
    w = V[3:].tolist()
    wl = W[:3].tolist()
    wa = W[3:].tolist()
    m = body.mass
    c = body.com_offset.tolist()
    I = body.inertia
    Iw = (I @ V[3:]).tolist()
    t1 = _cross(w, wl)
    t2 = _cross(w, _cross(c, wa))
    t3 = _cross(c, t1)
    t4 = _cross(wa, Iw)
    return np.array(
        [
            m * (t1[0] - t2[0]),
            m * (t1[1] - t2[1]),
            m * (t1[2] - t2[2]),
            m * t3[0] + t4[0],
            m * t3[1] + t4[1],
            m * t3[2] + t4[2],
        ]
    )


def body_net_wrenches(model: ManipulatorModel, geo: ChainGeometry, V: list[dict], dV: list[dict]) -> list[dict]:
    """F* = M dV + C(omega) V + G for every body."""
    out = []
    for st, fr, Vs, As in zip(model.structures, geo.frames, V, dV):
        Fs = {}
        for name, body in structure_bodies(st).items():
            Fs[name] = body.mass_matrix @ As[name] + _coriolis_wrench(body, Vs[name], Vs[name]) + body.gravity_wrench(fr.R[name])
        out.append(Fs)
    return out


def body_required_wrenches(
    model: ManipulatorModel, trace: KinematicTrace, K_A: list[dict]
) -> list[dict]:
    """F*_r = M dV_r + C(omega) V_r + G + K_A (V_r - V) for every body."""
    out = []
    for st, fr, Vs, Vr, Ar, K in zip(model.structures, trace.geometry.frames, trace.V, trace.Vr, trace.dVr, K_A):
        Fs = {}
        for name, body in structure_bodies(st).items():
            Fs[name] = (
                body.mass_matrix @ Ar[name]
                + _coriolis_wrench(body, Vs[name], Vr[name])
                + body.gravity_wrench(fr.R[name])
                + K[name] @ (Vr[name] - Vs[name])
            )
        out.append(Fs)
    return out


@dataclass
class StructureWrenches:
    F_star: dict
    F: dict  # resolved wrenches: Bc, E1, and with a prismatic segment P2, B5, P3, E2
    f_c: np.ndarray | float
    f_ct: np.ndarray | float | None


@dataclass
class WrenchTrace:
    structures: list[StructureWrenches]

    def actuator_forces(self) -> np.ndarray:
        """Actuator forces in generalized-coordinate order (without friction)."""
        out = []
        for s in self.structures:
            out.append(s.f_c)
            if s.f_ct is not None:
                out.append(s.f_ct)
        return np.array(out, dtype=float)


def prismatic_backward(fr: StructureFrames, F_E2, F_star: dict):
    """(f_ct, F at P2, resolved wrenches) for the telescopic segment."""
    U = fr.U
    P3F = F_star["P3"] + U["P3E2"] @ F_E2
    B5F = F_star["B5"] + U["B5P3"] @ P3F
    f_ct = B5F[0]
    P2F = F_star["P2"] + U["P2B5"] @ B5F
    return f_ct, P2F, {"P3": P3F, "B5": B5F, "P2": P2F, "E2": F_E2}


def _b1_e1(fr: StructureFrames) -> np.ndarray:
    M = fr.__dict__.get("_B1E1")
    if M is None:
        M = fr.U["B1Tc"] @ fr.U["TcE1"]
        fr.__dict__["_B1E1"] = M
    return M


def revolute_actuator_force(st: Structure, fr: StructureFrames, F_E1, F_star: dict):
    """Cylinder force from the net wrenches and the E1 load, no internal forces involved."""
    c = fr.closure
    s2 = np.sin(c.q_j2)
    if abs(s2) < SIN_GUARD:
        raise ClosureSingularity("sin(q_j2) within guard of zero")
    d = c.x_j + st.geom.x_j0
    B4 = F_star["B4"]
    link_load = F_star["B1"][5] + (_b1_e1(fr) @ F_E1)[5]
    loop = F_star["B3"][5] + B4[5] + B4[1] * (d - st.geom.l_cj)
    return B4[0] - link_load / (st.geom.L_j1 * s2) - loop / (d * np.tan(c.q_j2))


def revolute_driven_wrench(fr: StructureFrames, F_E1, F_star: dict):
    """Wrench at the driven point Bc from the net wrenches and the E1 load."""
    U = fr.U
    B0B1 = U["B0B1"]
    B2B3 = U["B2B3"]
    return (
        F_star["B0"]
        + B0B1 @ (F_star["B1"] + _b1_e1(fr) @ F_E1)
        + B2B3 @ (F_star["B3"] + U["B3B4"] @ F_star["B4"])
    )


@dataclass
class InternalForceSolution:
    f_x: float
    f_y: float
    F: dict  # P1, B1, B4, B3, B0, B2, Bc
    f_c: float


def b1_p1_transform(st: Structure, fr: StructureFrames) -> np.ndarray:
    """Transform from B1 to P1: offset L_j1 along x, rotated by -q_j2."""
    return planar_transform(-fr.closure.q_j2, st.geom.L_j1)


def oracle_internal_forces(st: Structure, fr: StructureFrames, F_E1, F_star: dict, rcond: float = 1e-12) -> InternalForceSolution:
    """Solve for the q_j2 pin forces from the two frictionless moment balances, then recurse."""
    U = fr.U
    B1P1 = b1_p1_transform(st, fr)
    B3P1 = U["B3B4"] @ U["B4P1"]
    A = np.array([[B1P1[5, 0], B1P1[5, 1]], [B3P1[5, 0], B3P1[5, 1]]])
    b = np.array(
        [
            F_star["B1"][5] + (_b1_e1(fr) @ F_E1)[5],
            -(F_star["B3"][5] + (U["B3B4"] @ F_star["B4"])[5]),
        ]
    )
    scale = np.abs(A).max()
    if scale == 0 or abs(np.linalg.det(A)) <= rcond * scale * scale:
        raise SingularSystem("pin-force system is singular")
    fx, fy = np.linalg.solve(A, b)
    P1F = np.array([fx, fy, 0.0, 0.0, 0.0, 0.0])
    B1F = F_star["B1"] + _b1_e1(fr) @ F_E1 - B1P1 @ P1F
    B4F = F_star["B4"] + U["B4P1"] @ P1F
    B3F = F_star["B3"] + U["B3B4"] @ B4F
    B0F = F_star["B0"] + U["B0B1"] @ B1F
    B2F = U["B2B3"] @ B3F
    F = {"P1": P1F, "B1": B1F, "B4": B4F, "B3": B3F, "B0": B0F, "B2": B2F, "Bc": B0F + B2F}
    return InternalForceSolution(float(fx), float(fy), F, float(B4F[0]))


def backward_pass(model: ManipulatorModel, geo: ChainGeometry, F_star: list[dict], tip_wrench=None) -> WrenchTrace:
    """Tip to base: prismatic segment first, then the revolute closed form, per structure."""
    ncols = None
    first = F_star[0]["B0"]
    if first.ndim == 2:
        ncols = first.shape[1]
    if tip_wrench is None:
        F_E = np.zeros(6) if ncols is None else np.zeros((6, ncols))
    else:
        F_E = np.asarray(tip_wrench, dtype=float)
        if ncols is not None and F_E.ndim == 1:
            F_E = np.repeat(F_E[:, None], ncols, axis=1)
    out = []
    for st, fr, Fs in zip(reversed(model.structures), reversed(geo.frames), reversed(F_star)):
        F = {}
        f_ct = None
        if st.prismatic is not None:
            f_ct, F_E1, F = prismatic_backward(fr, F_E, Fs)
        else:
            F_E1 = F_E
        F["E1"] = F_E1
        f_c = revolute_actuator_force(st, fr, F_E1, Fs)
        F["Bc"] = revolute_driven_wrench(fr, F_E1, Fs)
        out.append(StructureWrenches(Fs, F, f_c, f_ct))
        F_E = F["Bc"]
    out.reverse()
    return WrenchTrace(out)


def full_backward_pass(model: ManipulatorModel, trace: KinematicTrace, tip_wrench=None) -> WrenchTrace:
    if trace.dV is None:
        raise ValueError("measured accelerations are required")
    return backward_pass(model, trace.geometry, body_net_wrenches(model, trace.geometry, trace.V, trace.dV), tip_wrench)


def required_backward_pass(model: ManipulatorModel, trace: KinematicTrace, K_A: list[dict], tip_wrench=None) -> WrenchTrace:
    return backward_pass(model, trace.geometry, body_required_wrenches(model, trace, K_A), tip_wrench)


def inverse_dynamics(model: ManipulatorModel, q, dq, ddq, tip_wrench=None, base_V=None, base_dV=None) -> np.ndarray:
    """Actuator forces (friction excluded) that produce accelerations ``ddq``."""
    tr = forward_velocities(model, q, dq, base_V, ddq, base_dV)
    return full_backward_pass(model, tr, tip_wrench).actuator_forces()


# --- forward dynamics ------------------------------------------------------------------


def actuator_jacobian(model: ManipulatorModel, geo: ChainGeometry) -> np.ndarray:
    """Diagonal d(actuator stroke)/d(coordinate): dx_j/dq_j, and 1 for telescopic joints."""
    D = np.ones(model.ndof)
    for fr, (i, _) in zip(geo.frames, model.dof_slices):
        D[i] = fr.jx
    return D


def actuator_space_dynamics(model: ManipulatorModel, geo: ChainGeometry, dq, tip_wrench=None):
    """(A, b) with actuator forces ``A @ ddq + b`` at coordinates ``geo`` and rates ``dq``."""
    n = model.ndof
    dq = np.asarray(dq, dtype=float)
    V = chain_velocities(geo, model, dq)
    # bias: velocity products and gravity at zero acceleration
    bias = chain_accelerations(geo, model, V, dq, dq, np.zeros(n))
    F_bias = body_net_wrenches(model, geo, V, bias)
    J = chain_velocities(geo, model, np.eye(n))
    # one backward pass over [bias | unit columns]
    Fc = [
        {name: np.column_stack((Fb[name], body.mass_matrix @ Js[name])) for name, body in structure_bodies(st).items()}
        for st, Js, Fb in zip(model.structures, J, F_bias)
    ]
    tip = np.zeros((6, n + 1))
    if tip_wrench is not None:
        tip[:, 0] = tip_wrench
    cols = backward_pass(model, geo, Fc, tip).actuator_forces()
    b = cols[:, 0]
    A = cols[:, 1:]
    return A, b


def inertia_columns(model: ManipulatorModel, geo: ChainGeometry) -> np.ndarray:
    """Actuator forces per unit coordinate acceleration: the A of ``A @ ddq + b``."""
    n = model.ndof
    # at zero velocity dV = J ddq, and J is the velocity recursion of unit rates
    J = chain_velocities(geo, model, np.eye(n))
    Fc = [
        {name: body.mass_matrix @ Js[name] for name, body in structure_bodies(st).items()}
        for st, Js in zip(model.structures, J)
    ]
    return backward_pass(model, geo, Fc).actuator_forces()


def mass_matrix(model: ManipulatorModel, q, geo: ChainGeometry | None = None) -> np.ndarray:
    """Joint-space mass matrix for coordinates (q_j, x_tj); symmetric positive semidefinite."""
    if geo is None:
        geo = forward_poses(model, q)
    return actuator_jacobian(model, geo)[:, None] * inertia_columns(model, geo)


def forward_dynamics(model: ManipulatorModel, q, dq, actuator_forces, tip_wrench=None, geo: ChainGeometry | None = None) -> np.ndarray:
    """Joint accelerations produced by net actuator forces (friction already subtracted)."""
    if geo is None:
        geo = forward_poses(model, q)
    A, b = actuator_space_dynamics(model, geo, dq, tip_wrench)
    D = actuator_jacobian(model, geo)
    M = D[:, None] * A
    rhs = D * (np.asarray(actuator_forces, dtype=float) - b)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise SingularMassMatrix("mass matrix is not positive definite") from None
    d = np.diag(L)
    if d.min() <= 1e-6 * d.max():
        raise SingularMassMatrix("mass matrix is numerically singular")
    return np.linalg.solve(M, rhs)


def mechanical_energy(model: ManipulatorModel, q, dq) -> tuple[float, float]:
    """(kinetic, potential) energy; potential is zero at the world origin."""
    geo = forward_poses(model, q)
    V = chain_velocities(geo, model, np.asarray(dq, dtype=float))
    T = U_pot = 0.0
    for st, fr, Vs in zip(model.structures, geo.frames, V):
        for name, body in structure_bodies(st).items():
            T += body.kinetic_energy(Vs[name])
            com = fr.p[name] + fr.R[name] @ body.com_offset
            U_pot -= body.mass * float(body.gravity_world @ com)
    return T, U_pot
