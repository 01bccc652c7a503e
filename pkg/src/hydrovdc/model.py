"""Manipulator description: structures of a revolute segment plus an optional prismatic segment."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidTopology
from .geometry import RevoluteSegmentGeom
from .hydraulics import FrictionParams, HydraulicActuatorParams
from .spatial import BodyParams, WrenchTransform

D1 = "D1"
D2 = "D2"


@dataclass(frozen=True)
class RevoluteBodies:
    """Bodies of the closed loop, each expressed in its own frame."""

    link_base: BodyParams = field(default_factory=BodyParams)  # frame B0 (=Bc)
    link: BodyParams = field(default_factory=BodyParams)  # frame B1
    cylinder: BodyParams = field(default_factory=BodyParams)  # frame B3
    piston: BodyParams = field(default_factory=BodyParams)  # frame B4


@dataclass(frozen=True)
class PrismaticSegmentGeom:
    """Telescopic joint: B5 slides along the x-axis of P2.

    ``x_t0`` is the P2->B5 distance at zero stroke; ``tip`` places P3 on the
    sliding body and ``attach`` places the next driven point (or D2) on P3.
    """

    s_t: float
    x_t0: float = 0.0
    tip: WrenchTransform = field(default_factory=WrenchTransform)
    attach: WrenchTransform = field(default_factory=WrenchTransform)

    def __post_init__(self):
        if not self.s_t > 0:
            raise ValueError("s_t must be > 0")


@dataclass(frozen=True)
class PrismaticSegment:
    geom: PrismaticSegmentGeom
    actuator: HydraulicActuatorParams
    friction: FrictionParams = field(default_factory=FrictionParams)
    mount: BodyParams = field(default_factory=BodyParams)  # frame P2, fixed to the link
    case: BodyParams = field(default_factory=BodyParams)  # frame B5, sliding part
    load: BodyParams = field(default_factory=BodyParams)  # frame P3, mass object


@dataclass(frozen=True)
class Structure:
    """One revolute segment, optionally followed by a prismatic segment.

    ``attach`` is the pose of E1 seen from Tc: the next driven point, the
    prismatic mount P2, or the end-effector frame D1.
    """

    geom: RevoluteSegmentGeom
    actuator: HydraulicActuatorParams
    bodies: RevoluteBodies = field(default_factory=RevoluteBodies)
    friction: FrictionParams = field(default_factory=FrictionParams)
    attach: WrenchTransform = field(default_factory=WrenchTransform)
    prismatic: PrismaticSegment | None = None
    name: str = ""


@dataclass(frozen=True)
class ManipulatorModel:
    structures: tuple[Structure, ...]
    end_effector: str = D1
    base: WrenchTransform = field(default_factory=WrenchTransform)

    def __post_init__(self):
        object.__setattr__(self, "structures", tuple(self.structures))
        if not self.structures:
            raise InvalidTopology("model needs at least one structure")
        if self.end_effector not in (D1, D2):
            raise InvalidTopology(f"end_effector must be {D1!r} or {D2!r}")

    @property
    def n(self) -> int:
        return len(self.structures)

    @property
    def dof_slices(self) -> list[tuple[int, int | None]]:
        """Per structure: index of q_j and index of x_tj (None if absent)."""
        out, k = [], 0
        for st in self.structures:
            if st.prismatic is None:
                out.append((k, None))
                k += 1
            else:
                out.append((k, k + 1))
                k += 2
        return out

    @property
    def ndof(self) -> int:
        return sum(1 if st.prismatic is None else 2 for st in self.structures)

    def actuators(self) -> list[tuple[HydraulicActuatorParams, FrictionParams]]:
        """Actuators in generalized-coordinate order."""
        out = []
        for st in self.structures:
            out.append((st.actuator, st.friction))
            if st.prismatic is not None:
                out.append((st.prismatic.actuator, st.prismatic.friction))
        return out
