"""Loop-closure relations of the three-bar revolute segment.

The triangle has vertices at the cylinder-case pivot (q_j1 joint), the main
passive joint (q_j joint) and the rod-eye pivot (q_j2 joint). Side lengths are
``L_j``, ``L_j1`` and the cylinder length ``x_j + x_j0``. Angles follow the
negative convention: with admissible geometry all three of q_j, q_j1 and q_j2
lie in (-pi, 0) and ``q_j = q_j1 + q_j2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ClosureSingularity, DegenerateTriangle, StrokeLimit

ARCCOS_CLAMP = 1e-9
SIN_GUARD = 1e-8


def geometry_problems(L_j: float, L_j1: float, x_j0: float, l_cj: float, s_j: float) -> list[str]:
    """Every violated invariant of a revolute segment geometry, as messages."""
    vals = {"L_j": L_j, "L_j1": L_j1, "x_j0": x_j0, "l_cj": l_cj, "s_j": s_j}
    out = [f"{name} must be > 0" for name, v in vals.items() if not v > 0]
    if out:
        return out
    if not l_cj < x_j0:
        out.append("l_cj must be < x_j0")
    if not (abs(L_j - L_j1) < x_j0 and x_j0 + s_j < L_j + L_j1):
        out.append("triangle inequality |L_j - L_j1| < x + x_j0 < L_j + L_j1 violated over the stroke")
    return out


@dataclass(frozen=True)
class RevoluteSegmentGeom:
    L_j: float
    L_j1: float
    x_j0: float
    l_cj: float
    s_j: float

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        return geometry_problems(self.L_j, self.L_j1, self.x_j0, self.l_cj, self.s_j)

    def angle_from_piston(self, x_j: float) -> float:
        """Inverse of :func:`piston_from_angle` on the negative branch."""
        d = x_j + self.x_j0
        c = (d * d - self.L_j**2 - self.L_j1**2) / (2.0 * self.L_j * self.L_j1)
        return -math.acos(_clamped(c))


@dataclass(frozen=True)
class ClosureState:
    q_j: float
    q_j1: float
    q_j2: float
    x_j: float
    dq_j: float = 0.0
    dq_j1: float = 0.0
    dq_j2: float = 0.0
    dx_j: float = 0.0


def _clamped(c: float) -> float:
    if abs(c) > 1.0 + ARCCOS_CLAMP:
        raise DegenerateTriangle(f"arccos argument {c!r} outside [-1, 1]")
    return min(1.0, max(-1.0, c))


def piston_from_angle(geom: RevoluteSegmentGeom, q_j: float, check: bool = True) -> float:
    x = math.sqrt(geom.L_j**2 + geom.L_j1**2 + 2.0 * geom.L_j * geom.L_j1 * math.cos(q_j)) - geom.x_j0
    if check and not 0.0 < x < geom.s_j:
        raise StrokeLimit(f"piston position {x!r} outside (0, {geom.s_j!r})")
    return x


def closure_angles(geom: RevoluteSegmentGeom, x_j: float, check: bool = True) -> tuple[float, float]:
    if check and not 0.0 < x_j < geom.s_j:
        raise StrokeLimit(f"piston position {x_j!r} outside (0, {geom.s_j!r})")
    d = x_j + geom.x_j0
    L, L1 = geom.L_j, geom.L_j1
    q_j1 = -math.acos(_clamped((L1 * L1 - d * d - L * L) / (-2.0 * d * L)))
    q_j2 = -math.acos(_clamped((L * L - d * d - L1 * L1) / (-2.0 * d * L1)))
    return q_j1, q_j2


def closure_positions(geom: RevoluteSegmentGeom, q_j: float, check: bool = True) -> ClosureState:
    x = piston_from_angle(geom, q_j, check)
    q1, q2 = closure_angles(geom, x, check)
    return ClosureState(q_j, q1, q2, x)


def _guard(q_j1: float, q_j2: float) -> None:
    if abs(math.sin(q_j1)) < SIN_GUARD or abs(math.sin(q_j2)) < SIN_GUARD:
        raise ClosureSingularity("closure angle within guard of 0 or pi")


def piston_jacobian(geom: RevoluteSegmentGeom, q_j: float, x_j: float) -> float:
    """dx_j/dq_j."""
    return -geom.L_j * geom.L_j1 * math.sin(q_j) / (x_j + geom.x_j0)


def _angle_gains(geom: RevoluteSegmentGeom, q_j1: float, q_j2: float, x_j: float) -> tuple[float, float]:
    d = x_j + geom.x_j0
    g1 = -(d - geom.L_j * math.cos(q_j1)) / (d * geom.L_j * math.sin(q_j1))
    g2 = -(d - geom.L_j1 * math.cos(q_j2)) / (d * geom.L_j1 * math.sin(q_j2))
    return g1, g2


def closure_rates(geom: RevoluteSegmentGeom, pos: ClosureState, dq_j: float) -> tuple[float, float, float]:
    """(dx_j, dq_j1, dq_j2) from the main-joint rate."""
    _guard(pos.q_j1, pos.q_j2)
    dx = piston_jacobian(geom, pos.q_j, pos.x_j) * dq_j
    g1, g2 = _angle_gains(geom, pos.q_j1, pos.q_j2, pos.x_j)
    return dx, g1 * dx, g2 * dx


def with_rates(geom: RevoluteSegmentGeom, pos: ClosureState, dq_j: float) -> ClosureState:
    dx, d1, d2 = closure_rates(geom, pos, dq_j)
    return ClosureState(pos.q_j, pos.q_j1, pos.q_j2, pos.x_j, dq_j, d1, d2, dx)


def closure_accels(
    geom: RevoluteSegmentGeom,
    state: ClosureState,
    ddq_j: float,
    dq_j_required: float | None = None,
) -> tuple[float, float, float]:
    """Time derivatives of the closure rates.

    ``state`` carries positions and the rates at which they evolve. When
    ``dq_j_required`` is given the result differentiates the closure rates
    generated by that (required) main-joint rate while the configuration
    moves with ``state.dq_j``; ``ddq_j`` is then the derivative of the
    required rate.
    """
    _guard(state.q_j1, state.q_j2)
    L, L1 = geom.L_j, geom.L_j1
    d = state.x_j + geom.x_j0
    q, q1, q2 = state.q_j, state.q_j1, state.q_j2
    dq = state.dq_j
    dq_r = dq if dq_j_required is None else dq_j_required

    Jx = -L * L1 * math.sin(q) / d
    dx = Jx * dq  # configuration rate
    # dJx/dq, with dd/dq = Jx
    dJx = -L * L1 * math.cos(q) / d + L * L1 * math.sin(q) * Jx / (d * d)
    dx_r = Jx * dq_r
    ddx_r = dJx * dq * dq_r + Jx * ddq_j

    g1, g2 = _angle_gains(geom, q1, q2, state.x_j)

    def gain_slope(Ls: float, qa: float, g: float) -> float:
        s, c = math.sin(qa), math.cos(qa)
        num = d - Ls * c
        den = d * Ls * s
        dnum = 1.0 + Ls * s * g
        dden = Ls * s + d * Ls * c * g
        return -(dnum * den - num * dden) / (den * den)

    dg1 = gain_slope(L, q1, g1)
    dg2 = gain_slope(L1, q2, g2)
    ddq1 = dg1 * dx * dx_r + g1 * ddx_r
    ddq2 = dg2 * dx * dx_r + g2 * ddx_r
    return ddx_r, ddq1, ddq2
