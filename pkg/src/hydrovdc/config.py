"""YAML configuration: model, hydraulics, controller gains and scenario.

Loading validates the whole document and reports every problem with its key
path. ``write_config`` emits the same dialect, so a loaded configuration can
be written back and reloaded without loss.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from .controller import ControllerGains, StructureGains
from .errors import ParseError, ValidationError
from .geometry import RevoluteSegmentGeom, geometry_problems
from .hydraulics import FrictionParams, HydraulicActuatorParams, flow_coefficient_from_rating
from .model import D1, ManipulatorModel, PrismaticSegment, PrismaticSegmentGeom, RevoluteBodies, Structure
from .simulation import PathSpec, Scenario
from .spatial import BodyParams, WrenchTransform, rot_z

DEFAULT_CONFIG = "desk_scale.yaml"

Num = Annotated[float, Field(allow_inf_nan=False)]
Pos = Annotated[float, Field(gt=0, allow_inf_nan=False)]
NonNeg = Annotated[float, Field(ge=0, allow_inf_nan=False)]
Vec3 = Annotated[list[Num], Field(min_length=3, max_length=3)]
Vec6 = Annotated[list[Num], Field(min_length=6, max_length=6)]
Point2 = Annotated[list[Num], Field(min_length=2, max_length=2)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class TransformCfg(_Strict):
    angle: Num | None = None  # rotation about z (rad)
    rotation: Annotated[list[Vec3], Field(min_length=3, max_length=3)] | None = None
    offset: Vec3 = Field(default_factory=lambda: [0.0, 0.0, 0.0])

    @model_validator(mode="after")
    def _one_rotation(self):
        if self.angle is not None and self.rotation is not None:
            raise ValueError("give either angle or rotation, not both")
        if self.rotation is not None and not WrenchTransform(self.rotation).is_proper(1e-9):
            raise ValueError("rotation must be orthonormal with determinant +1")
        return self


class BodyCfg(_Strict):
    mass: NonNeg = 0.0
    com: Vec3 = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    inertia_com: Vec3 | Annotated[list[Vec3], Field(min_length=3, max_length=3)] = Field(
        default_factory=lambda: [0.0, 0.0, 0.0]
    )

    def inertia_matrix(self) -> np.ndarray:
        I = np.asarray(self.inertia_com, dtype=float)
        return np.diag(I) if I.ndim == 1 else I

    @model_validator(mode="after")
    def _inertia(self):
        I = self.inertia_matrix()
        if not np.allclose(I, I.T, atol=1e-12, rtol=0):
            raise ValueError("inertia_com must be symmetric")
        if np.linalg.eigvalsh(I).min() < -1e-12 * max(1.0, np.abs(I).max()):
            raise ValueError("inertia_com must be positive semidefinite")
        return self


class FrictionCfg(_Strict):
    coulomb: NonNeg = 0.0
    viscous: NonNeg = 0.0
    transition_velocity: Pos = 1e-3


class ValveRatingCfg(_Strict):
    rated_flow_lpm: Pos
    rated_dp_bar: Pos
    rated_voltage: Pos = 10.0


class ActuatorCfg(_Strict):
    A_a: Pos
    A_b: Pos
    c_p1: Pos | None = None
    c_p2: Pos | None = None
    c_n1: Pos | None = None
    c_n2: Pos | None = None
    valve: ValveRatingCfg | None = None
    beta: Pos | None = None  # overrides the shared hydraulics value
    p_s: Pos | None = None
    p_r: NonNeg | None = None

    @model_validator(mode="after")
    def _coefficients(self):
        given = [c is not None for c in (self.c_p1, self.c_p2, self.c_n1, self.c_n2)]
        if self.valve is not None and any(given):
            raise ValueError("give either valve or the four coefficients c_p1, c_p2, c_n1, c_n2, not both")
        if self.valve is None and not all(given):
            raise ValueError("valve rating or all four coefficients c_p1, c_p2, c_n1, c_n2 are required")
        return self

    def coefficients(self) -> tuple[float, float, float, float]:
        if self.valve is None:
            return self.c_p1, self.c_p2, self.c_n1, self.c_n2
        c = flow_coefficient_from_rating(self.valve.rated_flow_lpm, self.valve.rated_dp_bar, self.valve.rated_voltage)
        r = self.A_b / self.A_a
        return c, c * r, c, c * r


class RevoluteCfg(_Strict):
    L_j: Pos
    L_j1: Pos
    x_j0: Pos
    l_cj: Pos
    s_j: Pos

    @model_validator(mode="after")
    def _triangle(self):
        problems = geometry_problems(self.L_j, self.L_j1, self.x_j0, self.l_cj, self.s_j)
        if problems:
            raise ValueError("; ".join(problems))
        return self


class RevoluteBodiesCfg(_Strict):
    link_base: BodyCfg = Field(default_factory=BodyCfg)
    link: BodyCfg = Field(default_factory=BodyCfg)
    cylinder: BodyCfg = Field(default_factory=BodyCfg)
    piston: BodyCfg = Field(default_factory=BodyCfg)


class PrismaticCfg(_Strict):
    s_t: Pos
    x_t0: NonNeg = 0.0
    tip: TransformCfg = Field(default_factory=TransformCfg)
    attach: TransformCfg = Field(default_factory=TransformCfg)
    actuator: ActuatorCfg
    friction: FrictionCfg = Field(default_factory=FrictionCfg)
    mount: BodyCfg = Field(default_factory=BodyCfg)
    case: BodyCfg = Field(default_factory=BodyCfg)
    load: BodyCfg = Field(default_factory=BodyCfg)


class StructureCfg(_Strict):
    name: str = ""
    revolute: RevoluteCfg
    actuator: ActuatorCfg
    friction: FrictionCfg = Field(default_factory=FrictionCfg)
    bodies: RevoluteBodiesCfg = Field(default_factory=RevoluteBodiesCfg)
    attach: TransformCfg = Field(default_factory=TransformCfg)
    prismatic: PrismaticCfg | None = None


class ModelCfg(_Strict):
    gravity: Vec3 = Field(default_factory=lambda: [0.0, 0.0, -9.81])
    base: TransformCfg = Field(default_factory=TransformCfg)
    end_effector: Literal["D1", "D2"] = D1
    structures: Annotated[list[StructureCfg], Field(min_length=1)]

    @model_validator(mode="after")
    def _end_effector(self):
        last = self.structures[-1].prismatic is not None
        if (self.end_effector == "D2") != last:
            raise ValueError("end_effector must be D2 exactly when the last structure has a prismatic segment")
        return self


class HydraulicsCfg(_Strict):
    beta: Pos = 1.4e9
    p_s: Pos = 185e5
    p_r: NonNeg = 10e5

    @model_validator(mode="after")
    def _order(self):
        if not self.p_s > self.p_r:
            raise ValueError("p_s must exceed p_r")
        return self


GainMatrix = Pos | Vec6 | Annotated[list[Vec6], Field(min_length=6, max_length=6)]


class StructureGainsCfg(_Strict):
    lam: Pos = 5.0
    lam_t: Pos = 5.0
    k_x: Pos = 1e-6
    k_xt: Pos = 1e-6
    k_f: Pos = 1e-8
    k_ft: Pos = 1e-8
    K_default: GainMatrix = 10.0
    K_A: dict[Literal["B0", "B1", "B3", "B4", "P2", "B5", "P3"], GainMatrix] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _definite(self):
        for name, K in [("K_default", self.K_default), *self.K_A.items()]:
            M = _gain_matrix(K)
            if not np.allclose(M, M.T) or np.linalg.eigvalsh(M).min() <= 0:
                raise ValueError(f"{name} must be symmetric positive definite")
        return self


class GainsCfg(_Strict):
    filter_tau: NonNeg | None = None  # force-rate filter time constant (s); default 10 steps
    structures: Annotated[list[StructureGainsCfg], Field(min_length=1)]


class PathCfg(_Strict):
    waypoints: Annotated[list[Point2], Field(min_length=1)]
    start: Point2 | None = None
    leg_time: Pos = 2.0
    approach_time: NonNeg = 2.0
    loops: Annotated[int, Field(ge=0)] = 2
    final_hold: NonNeg = 1.0
    elbow: Literal[-1, 1] = 1


class ScenarioCfg(_Strict):
    path: PathCfg
    duration: Pos | None = None
    step: Pos = 1e-3
    tip_wrench: Vec6 = Field(default_factory=lambda: [0.0] * 6)


class ConfigDocument(_Strict):
    model: ModelCfg
    hydraulics: HydraulicsCfg = Field(default_factory=HydraulicsCfg)
    gains: GainsCfg
    scenario: ScenarioCfg

    @model_validator(mode="after")
    def _gain_count(self):
        if len(self.gains.structures) != len(self.model.structures):
            raise ValueError("gains.structures needs one entry per model structure")
        return self


# --- conversion to domain objects ------------------------------------------------------


@dataclass(frozen=True)
class Config:
    model: ManipulatorModel
    gains: ControllerGains
    scenario: Scenario


def _gain_matrix(K) -> np.ndarray:
    A = np.asarray(K, dtype=float)
    if A.ndim == 0:
        return float(A) * np.eye(6)
    if A.ndim == 1:
        return np.diag(A)
    return A


def _transform(t: TransformCfg) -> WrenchTransform:
    R = rot_z(t.angle or 0.0) if t.rotation is None else np.asarray(t.rotation, dtype=float)
    return WrenchTransform(R, t.offset)


def _body(b: BodyCfg, gravity) -> BodyParams:
    return BodyParams.from_com_inertia(b.mass, b.com, b.inertia_matrix(), gravity)


def _actuator(a: ActuatorCfg, hyd: HydraulicsCfg, stroke: float) -> HydraulicActuatorParams:
    beta = hyd.beta if a.beta is None else a.beta
    p_s = hyd.p_s if a.p_s is None else a.p_s
    p_r = hyd.p_r if a.p_r is None else a.p_r
    return HydraulicActuatorParams(a.A_a, a.A_b, beta, *a.coefficients(), p_s, p_r, stroke)


def _friction(f: FrictionCfg) -> FrictionParams:
    return FrictionParams(f.coulomb, f.viscous, f.transition_velocity)


def build_config(doc: ConfigDocument) -> Config:
    g = doc.model.gravity
    hyd = doc.hydraulics
    structures = []
    for s in doc.model.structures:
        r = s.revolute
        geom = RevoluteSegmentGeom(r.L_j, r.L_j1, r.x_j0, r.l_cj, r.s_j)
        b = s.bodies
        bodies = RevoluteBodies(_body(b.link_base, g), _body(b.link, g), _body(b.cylinder, g), _body(b.piston, g))
        pr = None
        if s.prismatic is not None:
            p = s.prismatic
            pg = PrismaticSegmentGeom(p.s_t, p.x_t0, _transform(p.tip), _transform(p.attach))
            pr = PrismaticSegment(
                pg, _actuator(p.actuator, hyd, p.s_t), _friction(p.friction),
                _body(p.mount, g), _body(p.case, g), _body(p.load, g),
            )
        structures.append(
            Structure(geom, _actuator(s.actuator, hyd, r.s_j), bodies, _friction(s.friction), _transform(s.attach), pr, s.name)
        )
    model = ManipulatorModel(tuple(structures), doc.model.end_effector, _transform(doc.model.base))
    gains = ControllerGains(
        tuple(
            StructureGains(
                gs.lam, gs.lam_t, gs.k_x, gs.k_xt, gs.k_f, gs.k_ft,
                _gain_matrix(gs.K_default), {k: _gain_matrix(v) for k, v in gs.K_A.items()},
            )
            for gs in doc.gains.structures
        )
    )
    sc = doc.scenario
    p = sc.path
    path = PathSpec(
        tuple(tuple(w) for w in p.waypoints), None if p.start is None else tuple(p.start),
        p.leg_time, p.approach_time, p.loops, p.final_hold, p.elbow,
    )
    scenario = Scenario(path, sc.step, sc.duration, doc.gains.filter_tau, tuple(sc.tip_wrench))
    return Config(model, gains, scenario)


def _format_loc(loc) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        elif part == "float" or any(c in str(part) for c in "-["):
            continue  # union-branch tags; field names never contain these
        else:
            out += ("." if out else "") + str(part)
    return out or "<root>"


def validate_document(data) -> Config:
    """Validate a parsed document; raise :class:`ValidationError` listing every problem."""
    if not isinstance(data, dict):
        raise ValidationError([("<root>", "top level must be a mapping")])
    try:
        doc = ConfigDocument.model_validate(data)
    except PydanticValidationError as exc:
        problems, seen = [], set()
        for err in exc.errors():
            item = (_format_loc(err["loc"]), err["msg"].removeprefix("Value error, "))
            if item not in seen:
                seen.add(item)
                problems.append(item)
        raise ValidationError(problems) from None
    return build_config(doc)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot or sign, such as 1e5."""


_Loader.yaml_implicit_resolvers = {k: list(v) for k, v in yaml.SafeLoader.yaml_implicit_resolvers.items()}
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def parse_yaml(text: str):
    try:
        return yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else None
        col = mark.column + 1 if mark is not None else None
        raise ParseError(str(exc.problem or exc.context or "malformed YAML"), line, col) from None
    except yaml.YAMLError as exc:
        raise ParseError(str(exc)) from None


def loads_config(text: str) -> Config:
    return validate_document(parse_yaml(text))


def load_config(path) -> Config:
    """Read and validate a configuration file."""
    return loads_config(Path(path).read_text(encoding="utf-8"))


def default_config_text() -> str:
    return resources.files("hydrovdc").joinpath("data", DEFAULT_CONFIG).read_text(encoding="utf-8")


def load_default_config() -> Config:
    """The shipped desk-scale configuration."""
    return loads_config(default_config_text())


# --- writing ---------------------------------------------------------------------------


def _f(x) -> float:
    return float(x)


def _vec(v) -> list[float]:
    return [float(a) for a in np.asarray(v, dtype=float).ravel()]


def _transform_doc(t: WrenchTransform) -> dict:
    R = t.rotation
    if np.allclose(R[2], [0.0, 0.0, 1.0], atol=1e-15, rtol=0) and np.allclose(R[:, 2], [0.0, 0.0, 1.0], atol=1e-15, rtol=0):
        return {"angle": math.atan2(R[1, 0], R[0, 0]), "offset": _vec(t.offset)}
    return {"rotation": [_vec(row) for row in R], "offset": _vec(t.offset)}


def _body_doc(b: BodyParams) -> dict:
    c = b.com_offset
    I_c = b.inertia - b.mass * (c @ c * np.eye(3) - np.outer(c, c))
    I_c = 0.5 * (I_c + I_c.T)
    return {"mass": _f(b.mass), "com": _vec(c), "inertia_com": [_vec(row) for row in I_c]}


def _friction_doc(f: FrictionParams) -> dict:
    return {"coulomb": _f(f.coulomb), "viscous": _f(f.viscous), "transition_velocity": _f(f.transition_velocity)}


def _actuator_doc(a: HydraulicActuatorParams, shared: HydraulicActuatorParams) -> dict:
    d = {"A_a": _f(a.A_a), "A_b": _f(a.A_b), "c_p1": _f(a.c_p1), "c_p2": _f(a.c_p2), "c_n1": _f(a.c_n1), "c_n2": _f(a.c_n2)}
    for name in ("beta", "p_s", "p_r"):
        if getattr(a, name) != getattr(shared, name):
            d[name] = _f(getattr(a, name))
    return d


def _gain_doc(K: np.ndarray):
    return [_vec(row) for row in K]


def config_document(config: Config) -> dict:
    """Plain-data document for ``config`` in the load dialect."""
    model, gains, sc = config.model, config.gains, config.scenario
    shared = model.structures[0].actuator
    gravity = model.structures[0].bodies.link.gravity_world
    structures = []
    for st in model.structures:
        g = st.geom
        b = st.bodies
        d = {
            "name": st.name,
            "revolute": {"L_j": g.L_j, "L_j1": g.L_j1, "x_j0": g.x_j0, "l_cj": g.l_cj, "s_j": g.s_j},
            "actuator": _actuator_doc(st.actuator, shared),
            "friction": _friction_doc(st.friction),
            "bodies": {k: _body_doc(getattr(b, k)) for k in ("link_base", "link", "cylinder", "piston")},
            "attach": _transform_doc(st.attach),
        }
        if st.prismatic is not None:
            p = st.prismatic
            d["prismatic"] = {
                "s_t": p.geom.s_t, "x_t0": p.geom.x_t0,
                "tip": _transform_doc(p.geom.tip), "attach": _transform_doc(p.geom.attach),
                "actuator": _actuator_doc(p.actuator, shared), "friction": _friction_doc(p.friction),
                "mount": _body_doc(p.mount), "case": _body_doc(p.case), "load": _body_doc(p.load),
            }
        structures.append(d)
    path = sc.path
    return {
        "model": {
            "gravity": _vec(gravity),
            "base": _transform_doc(model.base),
            "end_effector": model.end_effector,
            "structures": structures,
        },
        "hydraulics": {"beta": _f(shared.beta), "p_s": _f(shared.p_s), "p_r": _f(shared.p_r)},
        "gains": {
            "filter_tau": None if sc.filter_tau is None else _f(sc.filter_tau),
            "structures": [
                {
                    "lam": _f(gs.lam), "lam_t": _f(gs.lam_t), "k_x": _f(gs.k_x), "k_xt": _f(gs.k_xt),
                    "k_f": _f(gs.k_f), "k_ft": _f(gs.k_ft), "K_default": _gain_doc(gs.K_default),
                    "K_A": {k: _gain_doc(v) for k, v in gs.K_A.items()},
                }
                for gs in gains.structures
            ],
        },
        "scenario": {
            "path": {
                "waypoints": [_vec(w) for w in path.waypoints],
                "start": None if path.start is None else _vec(path.start),
                "leg_time": _f(path.leg_time), "approach_time": _f(path.approach_time),
                "loops": int(path.loops), "final_hold": _f(path.final_hold), "elbow": int(path.elbow),
            },
            "duration": None if sc.duration is None else _f(sc.duration),
            "step": _f(sc.h),
            "tip_wrench": _vec(sc.tip_wrench),
        },
    }


def dumps_config(config: Config) -> str:
    return yaml.safe_dump(config_document(config), sort_keys=False, default_flow_style=None, width=120)


def write_config(config: Config, path) -> None:
    """Write ``config`` so that :func:`load_config` reproduces it."""
    Path(path).write_text(dumps_config(config), encoding="utf-8")
