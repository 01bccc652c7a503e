"""6D linear/angular vectors, force/moment transforms and rigid-body net wrenches.

Every 6-vector is stored as a numpy array ordered linear-then-angular:
velocities as (v, omega), wrenches as (f, m), both expressed in the frame they
are attached to.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Z_TAU = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
X_F = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
Y_F = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


def spatial_vec(linear, angular) -> np.ndarray:
    """Stack a linear and an angular 3-vector into one 6-vector."""
    return np.concatenate([np.asarray(linear, dtype=float), np.asarray(angular, dtype=float)])


def skew(r) -> np.ndarray:
    """Cross-product matrix: ``skew(r) @ v == np.cross(r, v)``."""
    rx, ry, rz = r
    return np.array([[0.0, -rz, ry], [rz, 0.0, -rx], [-ry, rx, 0.0]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def transform_matrix(rotation: np.ndarray, offset) -> np.ndarray:
    """6x6 force/moment transform with ``skew(offset) @ rotation`` lower-left block."""
    U = np.zeros((6, 6))
    U[:3, :3] = rotation
    U[3:, 3:] = rotation
    U[3:, :3] = skew(offset) @ rotation
    return U


def planar_transform(angle: float, dx: float, dy: float = 0.0) -> np.ndarray:
    """Transform for a child frame rotated ``angle`` about z and offset in the x-y plane."""
    c, s = np.cos(angle), np.sin(angle)
    U = np.zeros((6, 6))
    U[0, 0] = U[1, 1] = U[3, 3] = U[4, 4] = c
    U[0, 1] = U[3, 4] = -s
    U[1, 0] = U[4, 3] = s
    U[2, 2] = U[5, 5] = 1.0
    # skew((dx, dy, 0)) @ R
    U[3, 2] = dy
    U[4, 2] = -dx
    U[5, 0] = -dy * c + dx * s
    U[5, 1] = dy * s + dx * c
    return U


def motion_cross(V: np.ndarray) -> np.ndarray:
    """6x6 matrix ``X`` with ``X @ W`` the spatial cross product of motion vectors V x W."""
    v, w = V[:3], V[3:]
    X = np.zeros((6, 6))
    W = skew(w)
    X[:3, :3] = W
    X[:3, 3:] = skew(v)
    X[3:, 3:] = W
    return X


@dataclass(frozen=True)
class WrenchTransform:
    """Pose of frame B seen from frame A: rotation ``A_R_B`` and offset ``A_r_AB``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        r = np.array(self.offset, dtype=float).reshape(3)
        R.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "offset", r)

    @classmethod
    def planar(cls, angle: float = 0.0, offset=(0.0, 0.0, 0.0)) -> "WrenchTransform":
        return cls(rot_z(angle), offset)

    @property
    def matrix(self) -> np.ndarray:
        return transform_matrix(self.rotation, self.offset)

    def compose(self, other: "WrenchTransform") -> "WrenchTransform":
        """Pose of C in A given self = (A->B) and other = (B->C)."""
        return WrenchTransform(self.rotation @ other.rotation, self.offset + self.rotation @ other.offset)

    def inverse(self) -> "WrenchTransform":
        Rt = self.rotation.T
        return WrenchTransform(Rt, -Rt @ self.offset)

    def is_proper(self, tol: float = 1e-12) -> bool:
        R = self.rotation
        return bool(np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0) and abs(np.linalg.det(R) - 1.0) <= tol)


def transform_velocity(U, v_parent: np.ndarray) -> np.ndarray:
    """Express a parent-frame velocity in the child frame (``U.T @ V``)."""
    M = U.matrix if isinstance(U, WrenchTransform) else U
    return M.T @ v_parent


def transform_wrench(U, f_child: np.ndarray) -> np.ndarray:
    """Express a child-frame wrench in the parent frame (``U @ F``)."""
    M = U.matrix if isinstance(U, WrenchTransform) else U
    return M @ f_child


@dataclass(frozen=True)
class BodyParams:
    """Inertial data of one rigid body, expressed in its own frame.

    ``inertia`` is taken about the frame origin, not about the centre of mass.
    """

    mass: float = 0.0
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    gravity_world: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_GRAVITY))

    def __post_init__(self):
        c = np.array(self.com_offset, dtype=float).reshape(3)
        I = np.array(self.inertia, dtype=float).reshape(3, 3)
        g = np.array(self.gravity_world, dtype=float).reshape(3)
        if self.mass < 0:
            raise ValueError("mass must be non-negative")
        if not np.allclose(I, I.T, atol=1e-12, rtol=0):
            raise ValueError("inertia must be symmetric")
        if np.linalg.eigvalsh(I).min() < -1e-12 * max(1.0, np.abs(I).max()):
            raise ValueError("inertia must be positive semidefinite")
        for a in (c, I, g):
            a.setflags(write=False)
        object.__setattr__(self, "com_offset", c)
        object.__setattr__(self, "inertia", I)
        object.__setattr__(self, "gravity_world", g)
        m = float(self.mass)
        M = np.zeros((6, 6))
        M[:3, :3] = m * np.eye(3)
        M[:3, 3:] = -m * skew(c)
        M[3:, :3] = m * skew(c)
        M[3:, 3:] = I
        M.setflags(write=False)
        object.__setattr__(self, "_M", M)

    @classmethod
    def from_com_inertia(cls, mass: float, com_offset, inertia_com, gravity_world=DEFAULT_GRAVITY) -> "BodyParams":
        """Build from an inertia tensor about the centre of mass (parallel-axis shift)."""
        c = np.asarray(com_offset, dtype=float)
        I_o = np.asarray(inertia_com, dtype=float) + mass * (c @ c * np.eye(3) - np.outer(c, c))
        return cls(mass, c, I_o, gravity_world)

    @property
    def mass_matrix(self) -> np.ndarray:
        return self._M

    def coriolis_matrix(self, omega) -> np.ndarray:
        """Skew-symmetric C(omega) with ``C(omega) @ V`` the velocity-product wrench."""
        m = self.mass
        W = skew(omega)
        Cx = skew(self.com_offset)
        C = np.empty((6, 6))
        C[:3, :3] = m * W
        C[:3, 3:] = -m * (W @ Cx)
        C[3:, :3] = m * (Cx @ W)
        C[3:, 3:] = -skew(self.inertia @ np.asarray(omega))
        return C

    def gravity_wrench(self, frame_orientation_world: np.ndarray) -> np.ndarray:
        """G term: minus the gravity wrench about the frame origin."""
        fx, fy, fz = (self.mass * (frame_orientation_world.T @ self.gravity_world)).tolist()
        cx, cy, cz = self.com_offset.tolist()
        return -np.array([fx, fy, fz, cy * fz - cz * fy, cz * fx - cx * fz, cx * fy - cy * fx])

    def kinetic_energy(self, V: np.ndarray) -> float:
        return 0.5 * float(V @ self._M @ V)


def net_wrench(body: BodyParams, frame_orientation_world, V, dV) -> np.ndarray:
    """Net force/moment ``M dV + C(omega) V + G`` acting on a body."""
    V = np.asarray(V, dtype=float)
    return body.mass_matrix @ dV + body.coriolis_matrix(V[3:]) @ V + body.gravity_wrench(frame_orientation_world)


def required_net_wrench(body: BodyParams, frame_orientation_world, V, Vr, dVr, K_A) -> np.ndarray:
    """Required net wrench: the net-wrench model driven by V_r plus ``K_A (V_r - V)``."""
    V = np.asarray(V, dtype=float)
    Vr = np.asarray(Vr, dtype=float)
    return (
        body.mass_matrix @ dVr
        + body.coriolis_matrix(V[3:]) @ Vr
        + body.gravity_wrench(frame_orientation_world)
        + np.asarray(K_A) @ (Vr - V)
    )
