"""Virtual decomposition control: required motion, required forces and valve voltages."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import WrenchTrace, actuator_jacobian, full_backward_pass, inertia_columns, required_backward_pass, structure_bodies
from .geometry import ClosureState, closure_accels
from .hydraulics import (
    ActuatorState,
    HydraulicActuatorParams,
    friction_force,
    friction_slope,
    piston_force_from_pressures,
    velocity_gain,
    voltage_from_uf,
)
from .kinematics import (
    KinematicTrace,
    chain_accelerations,
    forward_poses,
    forward_required_velocities,
    forward_velocities,
    required_accelerations,
    required_joint_velocity,
)
from .model import ManipulatorModel

VOLTAGE_LIMIT = 10.0


@dataclass(frozen=True)
class StructureGains:
    """Gains of one structure; the ``_t`` members act on the telescopic actuator.

    ``K_A`` maps body frame names (B0, B1, B3, B4, P2, B5, P3) to 6x6
    positive-definite matrices; frames not listed use ``K_default``.
    """

    lam: float = 5.0
    lam_t: float = 5.0
    k_x: float = 1e-6
    k_xt: float = 1e-6
    k_f: float = 1e-8
    k_ft: float = 1e-8
    K_default: np.ndarray = field(default_factory=lambda: 10.0 * np.eye(6))
    K_A: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("lam", "lam_t", "k_x", "k_xt", "k_f", "k_ft"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        K0 = np.array(self.K_default, dtype=float)
        Ks = {k: np.array(v, dtype=float) for k, v in self.K_A.items()}
        for name, K in [("K_default", K0), *Ks.items()]:
            if K.shape != (6, 6) or not np.allclose(K, K.T) or np.linalg.eigvalsh(K).min() <= 0:
                raise ValueError(f"{name} must be a symmetric positive-definite 6x6 matrix")
            K.setflags(write=False)
        object.__setattr__(self, "K_default", K0)
        object.__setattr__(self, "K_A", Ks)

    def body_gain(self, frame: str) -> np.ndarray:
        return self.K_A.get(frame, self.K_default)


@dataclass(frozen=True)
class ControllerGains:
    structures: tuple[StructureGains, ...]

    def __post_init__(self):
        object.__setattr__(self, "structures", tuple(self.structures))

    @classmethod
    def uniform(cls, n: int, **kw) -> "ControllerGains":
        return cls(tuple(StructureGains(**kw) for _ in range(n)))

    def body_gains(self, model: ManipulatorModel) -> list[dict]:
        return [
            {name: g.body_gain(name) for name in structure_bodies(st)}
            for st, g in zip(model.structures, self.structures)
        ]


@dataclass(frozen=True)
class TrajectorySample:
    """Desired coordinates with their first and second time derivatives."""

    q: np.ndarray
    dq: np.ndarray
    ddq: np.ndarray


@dataclass
class ControlOutput:
    u: np.ndarray  # saturated voltages
    u_raw: np.ndarray  # before saturation
    uf_required: np.ndarray
    fp_required: np.ndarray
    fc_required: np.ndarray
    dfp_required: np.ndarray
    fp: np.ndarray  # measured from pressures
    fc: np.ndarray | None  # measured via inverse dynamics (needs accelerations)
    x: np.ndarray
    dx: np.ndarray
    dx_required: np.ndarray
    dq_required: np.ndarray
    trace: KinematicTrace
    wrenches: WrenchTrace | None
    wrenches_required: WrenchTrace


def required_uf(params: HydraulicActuatorParams, state: ActuatorState, dx_r: float, fp_r: float, dfp_r: float, k_x: float, k_f: float,
                feedforward_state: ActuatorState | None = None) -> float:
    """Required voltage-related term: feedforward force rate and piston speed plus feedback.

    ``feedforward_state`` (default ``state``) supplies the stroke and speed of
    the piston-speed feedforward only.
    """
    ff = state if feedforward_state is None else feedforward_state
    fp = piston_force_from_pressures(params, state)
    return dfp_r / params.beta + velocity_gain(params, ff.x) * ff.dx + k_x * (dx_r - state.dx) + k_f * (fp_r - fp)


def control_voltage(params: HydraulicActuatorParams, state: ActuatorState, uf_r: float, limit: float = VOLTAGE_LIMIT) -> float:
    """Valve voltage realising ``uf_r``, clipped to the valve's input range."""
    u = voltage_from_uf(params, state, uf_r)
    return min(limit, max(-limit, u))


# Both actuator kinds obey the same law; the names mirror the two segment types.
required_uf_revolute = required_uf_prismatic = required_uf
control_voltage_revolute = control_voltage_prismatic = control_voltage


def actuator_states(model: ManipulatorModel, geo, dq, pressures) -> list[ActuatorState]:
    """Piston positions, speeds and pressures in generalized-coordinate order."""
    D = actuator_jacobian(model, geo)
    out = []
    k = 0
    for fr, (i, j) in zip(geo.frames, model.dof_slices):
        out.append(ActuatorState(fr.closure.x_j, D[i] * dq[i], *pressures[k]))
        k += 1
        if j is not None:
            out.append(ActuatorState(fr.x_t, dq[j], *pressures[k]))
            k += 1
    return out


def piston_accelerations(model: ManipulatorModel, geo, dq, ddq) -> np.ndarray:
    """Actuator stroke accelerations in generalized-coordinate order."""
    out = []
    for st, fr, (i, j) in zip(model.structures, geo.frames, model.dof_slices):
        c = fr.closure
        ddx, _, _ = closure_accels(st.geom, ClosureState(c.q_j, c.q_j1, c.q_j2, c.x_j, float(dq[i])), float(ddq[i]))
        out.append(ddx)
        if j is not None:
            out.append(float(ddq[j]))
    return np.array(out)


class VDCController:
    """Stateful wrapper holding the force-rate filter between control steps.

    ``filter_tau`` is the time constant of the one-pole filter smoothing the
    backward-difference estimate of the required piston-force rate; ``0``
    uses the raw difference.

    The valve voltage is held for a whole period while the piston keeps
    accelerating. With ``hold_compensation`` (and measured accelerations
    supplied) the piston-speed term and the valve-map inversion use the
    stroke and speed predicted for the middle of the period, which removes
    the force-rate lag that holding would otherwise build up.
    """

    def __init__(self, model: ManipulatorModel, gains: ControllerGains, h: float, filter_tau: float | None = None,
                 voltage_limit: float = VOLTAGE_LIMIT, hold_compensation: bool = True):
        if len(gains.structures) != model.n:
            raise ValueError("one StructureGains per structure is required")
        if not h > 0:
            raise ValueError("control period must be > 0")
        self.model = model
        self.gains = gains
        self.h = h
        self.filter_tau = 10.0 * h if filter_tau is None else filter_tau
        if self.filter_tau < 0:
            raise ValueError("filter_tau must be >= 0")
        self.voltage_limit = voltage_limit
        self.hold_compensation = hold_compensation
        self._K = gains.body_gains(model)
        kx, kf, lam = [], [], []
        for g, st in zip(gains.structures, model.structures):
            kx.append(g.k_x)
            kf.append(g.k_f)
            lam.append(g.lam)
            if st.prismatic is not None:
                kx.append(g.k_xt)
                kf.append(g.k_ft)
                lam.append(g.lam_t)
        self.k_x = np.array(kx)
        self.k_f = np.array(kf)
        self.lam = np.array(lam)
        self._act = model.actuators()
        self.reset()

    def reset(self) -> None:
        self._fp_prev: np.ndarray | None = None
        self._dfp: np.ndarray = np.zeros(len(self._act))
        self._steps = 0

    def required_rates(self, sample: TrajectorySample, q, dq) -> tuple[np.ndarray, np.ndarray]:
        """Required joint rates (desired rate plus position feedback) and their derivatives."""
        dq_r = required_joint_velocity(sample.dq, sample.q, q, self.lam)
        ddq_r = sample.ddq + self.lam * (sample.dq - dq)
        return dq_r, ddq_r

    def _held_uf(self, geo, dq, ddq, states, dx_r, fp_r, dfp, fp):
        """Voltage-related terms whose force rates, averaged over the hold period, follow the control law.

        Over one period the piston speed moves by its acceleration and, to
        second order, by the jerk the changing piston force itself causes;
        both are predicted and cancelled. Returns the terms and the
        mid-period strokes at which to invert the valve map.
        """
        h = self.h
        model = self.model
        beta = np.array([p.beta for p, _ in self._act])
        x0 = np.array([st.x for st in states])
        v0 = np.array([st.dx for st in states])
        a0 = piston_accelerations(model, geo, dq, ddq)
        x_m = x0 + 0.5 * h * v0
        v_m = v0 + 0.5 * h * a0
        ups0 = np.array([velocity_gain(p, x) for (p, _), x in zip(self._act, x0)])
        ups_m = np.array([velocity_gain(p, x) for (p, _), x in zip(self._act, x_m)])
        slope = np.array([friction_slope(fr, v) for (_, fr), v in zip(self._act, v0)])
        D = actuator_jacobian(model, geo)
        M = D[:, None] * inertia_columns(model, geo)
        G = D[:, None] * np.linalg.solve(M, np.diag(D))  # d(piston acceleration)/d(piston force)
        target = dfp + beta * (self.k_x * (dx_r - v0) + self.k_f * (fp_r - fp))
        c = h * h / 6.0
        lhs = np.eye(len(x0)) - c * (beta * ups_m)[:, None] * G
        rhs = target / beta + ups_m * v_m - c * ups_m * (G @ (beta * ups0 * v0 + slope * a0))
        return np.linalg.solve(lhs, rhs), x_m

    def step(self, sample: TrajectorySample, q, dq, pressures, ddq_measured=None, tip_wrench=None, geo=None) -> ControlOutput:
        model = self.model
        q = np.asarray(q, dtype=float)
        dq = np.asarray(dq, dtype=float)
        if geo is None:
            geo = forward_poses(model, q)
        # measured side
        tr = forward_velocities(model, geo, dq)
        wrenches = None
        if ddq_measured is not None:
            tr.dV = chain_accelerations(geo, model, tr.V, dq, dq, np.asarray(ddq_measured, dtype=float))
            wrenches = full_backward_pass(model, tr, tip_wrench)
        # required side
        dq_r, ddq_r = self.required_rates(sample, q, dq)
        forward_required_velocities(model, tr, dq_r)
        required_accelerations(model, tr, ddq_r)
        wrenches_r = required_backward_pass(model, tr, self._K, tip_wrench)
        fc_r = wrenches_r.actuator_forces()

        states = actuator_states(model, geo, dq, pressures)
        D = actuator_jacobian(model, geo)
        dx_r = D * dq_r
        fp_r = np.array([fc + friction_force(fr_p, v) for fc, (_, fr_p), v in zip(fc_r, self._act, dx_r)])
        if self._fp_prev is None:
            dfp = np.zeros_like(fp_r)
        else:
            raw = (fp_r - self._fp_prev) / self.h
            alpha = self.h / (self.filter_tau + self.h)
            dfp = self._dfp + alpha * (raw - self._dfp)
        dfp_prev = self._dfp
        self._fp_prev = fp_r
        self._dfp = dfp
        if self.hold_compensation and self._steps > 1:
            # the filtered difference lags by filter_tau + h/2; project it to mid-period
            dfp = dfp + (self.filter_tau + self.h) / self.h * (dfp - dfp_prev)
        self._steps += 1

        fp = np.array([piston_force_from_pressures(params, st) for (params, _), st in zip(self._act, states)])
        if self.hold_compensation and ddq_measured is not None:
            uf_r, x_inv = self._held_uf(geo, dq, ddq_measured, states, dx_r, fp_r, dfp, fp)
        else:
            uf_r = np.array([
                required_uf(params, st, dx_r[a], fp_r[a], dfp[a], self.k_x[a], self.k_f[a])
                for a, ((params, _), st) in enumerate(zip(self._act, states))
            ])
            x_inv = [st.x for st in states]
        u_raw = np.array([
            voltage_from_uf(params, replace(st, x=xi), uf)
            for (params, _), st, xi, uf in zip(self._act, states, x_inv, uf_r)
        ])
        lim = self.voltage_limit
        u = np.clip(u_raw, -lim, lim)
        return ControlOutput(
            u=u,
            u_raw=u_raw,
            uf_required=uf_r,
            fp_required=fp_r,
            fc_required=fc_r,
            dfp_required=dfp,
            fp=fp,
            fc=None if wrenches is None else wrenches.actuator_forces(),
            x=np.array([s.x for s in states]),
            dx=np.array([s.dx for s in states]),
            dx_required=dx_r,
            dq_required=dq_r,
            trace=tr,
            wrenches=wrenches,
            wrenches_required=wrenches_r,
        )


def control_step(controller: VDCController, sample: TrajectorySample, q, dq, pressures, ddq_measured=None, tip_wrench=None) -> ControlOutput:
    """One pass of the control pipeline (see :meth:`VDCController.step`)."""
    return controller.step(sample, q, dq, pressures, ddq_measured, tip_wrench)
