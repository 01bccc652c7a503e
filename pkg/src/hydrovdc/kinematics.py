"""Frame resolution, poses, and the measured/required velocity and acceleration recursions.

Per structure the frames are traversed along two open chains that meet at the
q_j2 joint:

* chain 1: Bc(=B0) -> B1 (revolute q_j) -> Tc(=T1)
* chain 2: Bc(=B2) -> B3 (revolute q_j1) -> B4 (prismatic x_j) -> P1 -> T2 (revolute q_j2)

followed by Tc -> E1 and, with a prismatic segment, P2(=E1) -> B5 (prismatic
x_tj) -> P3 -> E2. Velocities are 6-vectors in their own frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTopology, StrokeLimit
from .geometry import ClosureState, _angle_gains, _guard, closure_accels, closure_positions, piston_jacobian
from .model import D1, D2, ManipulatorModel
from .spatial import planar_transform

ROT = 5  # row of z_tau
LIN = 0  # row of x_f


@dataclass(frozen=True)
class FrameResolution:
    """Per structure: which frame E1 (and E2) coincides with."""

    e1_target: tuple[str, ...]
    e2_target: tuple[str | None, ...]


def resolve_frames(model: ManipulatorModel) -> FrameResolution:
    n = model.n
    e1, e2 = [], []
    for j, st in enumerate(model.structures, start=1):
        last = j == n
        if st.prismatic is not None:
            e1.append(f"P2,{j}")
            if last:
                if model.end_effector != D2:
                    raise InvalidTopology("last structure has a prismatic segment, so the end-effector must be D2")
                e2.append(f"D2,{j}")
            else:
                e2.append(f"Bc,{j + 1}")
        else:
            if last:
                if model.end_effector != D1:
                    raise InvalidTopology("last structure has no prismatic segment, so the end-effector must be D1")
                e1.append(f"D1,{j}")
            else:
                e1.append(f"Bc,{j + 1}")
            e2.append(None)
    return FrameResolution(tuple(e1), tuple(e2))


def _fixed(model: ManipulatorModel) -> list[dict]:
    """Constant attachment matrices, computed once per model instance."""
    cache = model.__dict__.get("_fixed_cache")
    if cache is None:
        cache = []
        for st in model.structures:
            d = {"TcE1": st.attach.matrix}
            if st.prismatic is not None:
                d["B5P3"] = st.prismatic.geom.tip.matrix
                d["P3E2"] = st.prismatic.geom.attach.matrix
            cache.append(d)
        object.__setattr__(model, "_fixed_cache", cache)
    return cache


@dataclass
class StructureFrames:
    """Configuration-dependent data of one structure."""

    closure: ClosureState
    x_t: float | None
    jx: float  # dx_j/dq_j
    g1: float  # dq_j1/dx_j
    g2: float  # dq_j2/dx_j
    U: dict[str, np.ndarray]
    R: dict[str, np.ndarray]
    p: dict[str, np.ndarray]

    @property
    def terminal(self) -> str:
        return "E1" if self.x_t is None else "E2"


@dataclass
class ChainGeometry:
    frames: list[StructureFrames]
    tool_rotation: np.ndarray
    tool_position: np.ndarray


def _child_pose(R: dict, p: dict, parent: str, child: str, rot: np.ndarray, off) -> None:
    Rp = R[parent]
    R[child] = Rp @ rot
    p[child] = p[parent] + Rp @ off


# frames whose pose is a planar rotation/offset of Bc
_LOOP_FRAMES = ("B1", "Tc", "B3", "B4", "P1", "T2")


def split_coordinates(model: ManipulatorModel, q) -> list[tuple[float, float | None]]:
    q = np.asarray(q, dtype=float)
    if q.shape != (model.ndof,):
        raise ValueError(f"expected {model.ndof} coordinates, got shape {q.shape}")
    return [(float(q[i]), None if k is None else float(q[k])) for i, k in model.dof_slices]


def forward_poses(model: ManipulatorModel, q, check: bool = True) -> ChainGeometry:
    """World poses and inter-frame transforms for generalized coordinates ``q``.

    ``q`` stacks, per structure, the main joint angle q_j and (if present)
    the telescopic stroke x_tj.
    """
    fixed = _fixed(model)
    R_par = model.base.rotation
    p_par = model.base.offset.copy()
    out = []
    for st, fx, (qj, xt) in zip(model.structures, fixed, split_coordinates(model, q)):
        g = st.geom
        cl = closure_positions(g, qj, check)
        _guard(cl.q_j1, cl.q_j2)
        jx = piston_jacobian(g, qj, cl.x_j)
        g1, g2 = _angle_gains(g, cl.q_j1, cl.q_j2, cl.x_j)
        d = cl.x_j + g.x_j0
        U = dict(fx)
        U["B0B1"] = planar_transform(qj, g.L_j)
        U["B1Tc"] = planar_transform(0.0, g.L_j1)
        U["B2B3"] = planar_transform(cl.q_j1, 0.0)
        U["B3B4"] = planar_transform(0.0, d - g.l_cj)
        U["B4P1"] = planar_transform(0.0, g.l_cj)
        U["P1T2"] = planar_transform(cl.q_j2, 0.0)
        # poses inside the loop, in Bc coordinates: angles and planar origins
        c, sn = math.cos(qj), math.sin(qj)
        c1, s1 = math.cos(cl.q_j1), math.sin(cl.q_j1)
        c2, s2 = math.cos(cl.q_j1 + cl.q_j2), math.sin(cl.q_j1 + cl.q_j2)
        tip = (g.L_j + g.L_j1 * c, g.L_j1 * sn)
        loc_R = np.array(
            [
                [[c, -sn, 0.0], [sn, c, 0.0], [0.0, 0.0, 1.0]],
                [[c, -sn, 0.0], [sn, c, 0.0], [0.0, 0.0, 1.0]],
                [[c1, -s1, 0.0], [s1, c1, 0.0], [0.0, 0.0, 1.0]],
                [[c1, -s1, 0.0], [s1, c1, 0.0], [0.0, 0.0, 1.0]],
                [[c1, -s1, 0.0], [s1, c1, 0.0], [0.0, 0.0, 1.0]],
                [[c2, -s2, 0.0], [s2, c2, 0.0], [0.0, 0.0, 1.0]],
            ]
        )
        loc_p = np.array(
            [
                [g.L_j, 0.0, 0.0],
                [tip[0], tip[1], 0.0],
                [0.0, 0.0, 0.0],
                [(d - g.l_cj) * c1, (d - g.l_cj) * s1, 0.0],
                [d * c1, d * s1, 0.0],
                [d * c1, d * s1, 0.0],
            ]
        )
        Rw = R_par @ loc_R
        pw = p_par + loc_p @ R_par.T
        R = {"Bc": R_par}
        p = {"Bc": p_par}
        for n_, name in enumerate(_LOOP_FRAMES):
            R[name] = Rw[n_]
            p[name] = pw[n_]
        _child_pose(R, p, "Tc", "E1", st.attach.rotation, st.attach.offset)
        if st.prismatic is not None:
            pg = st.prismatic.geom
            if xt is None:
                raise InvalidTopology("missing telescopic coordinate")
            if check and not 0.0 < xt < pg.s_t:
                raise StrokeLimit(f"telescopic stroke {xt!r} outside (0, {pg.s_t!r})")
            U["P2B5"] = planar_transform(0.0, pg.x_t0 + xt)
            R["P2"], p["P2"] = R["E1"], p["E1"]
            R["B5"], p["B5"] = R["P2"], p["P2"] + (pg.x_t0 + xt) * R["P2"][:, 0]
            _child_pose(R, p, "B5", "P3", pg.tip.rotation, pg.tip.offset)
            _child_pose(R, p, "P3", "E2", pg.attach.rotation, pg.attach.offset)
        for alias, src in (("B0", "Bc"), ("B2", "Bc"), ("T1", "Tc")):
            R[alias], p[alias] = R[src], p[src]
        sf = StructureFrames(cl, xt, jx, g1, g2, U, R, p)
        out.append(sf)
        R_par, p_par = R[sf.terminal], p[sf.terminal]
    return ChainGeometry(out, R_par, p_par)


def tool_position(model: ManipulatorModel, q) -> np.ndarray:
    return forward_poses(model, q).tool_position


# --- velocity recursion -------------------------------------------------------------


def _closure_rates(fr: StructureFrames, dq):
    dx = fr.jx * dq
    return dx, fr.g1 * dx, fr.g2 * dx


def structure_velocities(fr: StructureFrames, V_bc: np.ndarray, dq, dx, dq1, dq2, dxt=None) -> dict:
    """Velocities of all frames of one structure from explicit joint rates.

    The rates may be scalars with ``V_bc`` of shape (6,), or arrays of
    length k with ``V_bc`` of shape (6, k) for column-wise evaluation.
    """
    U = fr.U
    V = {"Bc": V_bc}
    V["B0"] = V["B2"] = V_bc
    v = U["B0B1"].T @ V_bc
    v[ROT] += dq
    V["B1"] = v
    V["Tc"] = V["T1"] = U["B1Tc"].T @ v
    v = U["B2B3"].T @ V_bc
    v[ROT] += dq1
    V["B3"] = v
    v = U["B3B4"].T @ v
    v[LIN] += dx
    V["B4"] = v
    V["P1"] = U["B4P1"].T @ v
    v = U["P1T2"].T @ V["P1"]
    v[ROT] += dq2
    V["T2"] = v
    V["E1"] = U["TcE1"].T @ V["Tc"]
    if fr.x_t is not None:
        V["P2"] = V["E1"]
        v = U["P2B5"].T @ V["P2"]
        v[LIN] += dxt
        V["B5"] = v
        V["P3"] = U["B5P3"].T @ v
        V["E2"] = U["P3E2"].T @ V["P3"]
    return V


def chain_velocities(geo: ChainGeometry, model: ManipulatorModel, dq, base_V=None) -> list[dict]:
    """Velocity recursion base to tip; ``dq`` is shaped like the coordinates, or (ndof, k)."""
    dq = np.asarray(dq, dtype=float)
    cols = dq.ndim == 2
    if base_V is None:
        V_bc = np.zeros((6, dq.shape[1])) if cols else np.zeros(6)
    else:
        V_bc = np.asarray(base_V, dtype=float)
    out = []
    for fr, (i, k) in zip(geo.frames, model.dof_slices):
        rate = dq[i]
        dx, d1, d2 = _closure_rates(fr, rate)
        V = structure_velocities(fr, V_bc, rate, dx, d1, d2, None if k is None else dq[k])
        out.append(V)
        V_bc = V[fr.terminal]
    return out


# --- acceleration recursion -----------------------------------------------------------


def _bias_rot(V: np.ndarray, rate: float) -> np.ndarray:
    """crm(V) @ (z_tau * rate)."""
    return rate * np.array([V[1], -V[0], 0.0, V[4], -V[3], 0.0])


def _bias_lin(V: np.ndarray, rate: float) -> np.ndarray:
    """crm(V) @ (x_f * rate)."""
    return rate * np.array([0.0, V[5], -V[4], 0.0, 0.0, 0.0])


def chain_accelerations(
    geo: ChainGeometry,
    model: ManipulatorModel,
    V_src: list[dict],
    dq_cfg,
    dq_src,
    ddq_src,
    base_dV=None,
) -> list[dict]:
    """Time derivative of the velocities ``V_src`` produced by rates ``dq_src``.

    The configuration evolves with the measured rates ``dq_cfg``; for the
    measured trace pass the same rates twice.
    """
    dV_bc = np.zeros(6) if base_dV is None else np.asarray(base_dV, dtype=float)
    out = []
    for st, fr, V, (i, k) in zip(model.structures, geo.frames, V_src, model.dof_slices):
        U = fr.U
        c = fr.closure
        cfg = ClosureState(c.q_j, c.q_j1, c.q_j2, c.x_j, float(dq_cfg[i]))
        ddx, ddq1, ddq2 = closure_accels(st.geom, cfg, float(ddq_src[i]), float(dq_src[i]))
        dx_c, dq1_c, dq2_c = _closure_rates(fr, float(dq_cfg[i]))
        A = {"Bc": dV_bc}
        A["B0"] = A["B2"] = dV_bc
        a = U["B0B1"].T @ dV_bc + _bias_rot(V["B1"], float(dq_cfg[i]))
        a[ROT] += ddq_src[i]
        A["B1"] = a
        A["Tc"] = A["T1"] = U["B1Tc"].T @ a
        a = U["B2B3"].T @ dV_bc + _bias_rot(V["B3"], dq1_c)
        a[ROT] += ddq1
        A["B3"] = a
        a = U["B3B4"].T @ a + _bias_lin(V["B4"], dx_c)
        a[LIN] += ddx
        A["B4"] = a
        A["P1"] = U["B4P1"].T @ a
        a = U["P1T2"].T @ A["P1"] + _bias_rot(V["T2"], dq2_c)
        a[ROT] += ddq2
        A["T2"] = a
        A["E1"] = U["TcE1"].T @ A["Tc"]
        if k is not None:
            A["P2"] = A["E1"]
            a = U["P2B5"].T @ A["P2"] + _bias_lin(V["B5"], float(dq_cfg[k]))
            a[LIN] += ddq_src[k]
            A["B5"] = a
            A["P3"] = U["B5P3"].T @ a
            A["E2"] = U["P3E2"].T @ A["P3"]
        out.append(A)
        dV_bc = A[fr.terminal]
    return out


# --- public trace API -----------------------------------------------------------------


@dataclass
class KinematicTrace:
    """Poses, measured velocities and (optionally) the required mirror of one state."""

    geometry: ChainGeometry
    dq: np.ndarray
    V: list[dict]
    dV: list[dict] | None = None
    dq_r: np.ndarray | None = None
    Vr: list[dict] | None = None
    dVr: list[dict] | None = None
    base_V: np.ndarray = field(default_factory=lambda: np.zeros(6))


def forward_velocities(model: ManipulatorModel, q, dq, base_V=None, ddq=None, base_dV=None) -> KinematicTrace:
    """Measured velocities of every frame; accelerations too when ``ddq`` is given."""
    geo = q if isinstance(q, ChainGeometry) else forward_poses(model, q)
    dq = np.asarray(dq, dtype=float)
    bV = np.zeros(6) if base_V is None else np.asarray(base_V, dtype=float)
    V = chain_velocities(geo, model, dq, bV)
    dV = None
    if ddq is not None:
        dV = chain_accelerations(geo, model, V, dq, dq, np.asarray(ddq, dtype=float), base_dV)
    return KinematicTrace(geo, dq, V, dV, base_V=bV)


def required_joint_velocity(desired_rate, desired_pos, measured_pos, lam):
    """Desired rate plus proportional position feedback."""
    return desired_rate + lam * (desired_pos - measured_pos)


def forward_required_velocities(model: ManipulatorModel, trace: KinematicTrace, dq_r) -> KinematicTrace:
    """Fill the required velocities of ``trace`` (same recursion, required rates)."""
    trace.dq_r = np.asarray(dq_r, dtype=float)
    # the base is not commanded, so its required velocity equals the measured one
    trace.Vr = chain_velocities(trace.geometry, model, trace.dq_r, trace.base_V)
    return trace


def required_accelerations(model: ManipulatorModel, trace: KinematicTrace, ddq_r, base_dV=None) -> KinematicTrace:
    """Fill d/dt(V_r) for every frame by differentiating the required recursion."""
    if trace.Vr is None:
        raise ValueError("required velocities must be computed first")
    trace.dVr = chain_accelerations(
        trace.geometry, model, trace.Vr, trace.dq, trace.dq_r, np.asarray(ddq_r, dtype=float), base_dV
    )
    return trace
