#  Copyright (c) Michele De Stefano - 2026.
"""
Torso + tail rigid-body models.

Frames: the torso long axis is local Y. The tail hangs from the center of
the posterior torso face and extends along -Y. Every vertebra is a uniformly
dense cuboid whose mass is the tail linear density times its length.
"""

import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import ModelConfigError
from .spatial import skew

logger = logging.getLogger(__name__)

MAX_LINKS: int = 6
TOTAL_TAIL_LENGTH: float = 1.5  # m
LENGTH_LOWER_BOUND: float = 0.2  # m
# Relative tolerance used when checking that the vertebrae fill the tail.
LENGTH_SUM_RTOL: float = 1e-9


@dataclass(frozen=True)
class JointLimits:
    """
    Bounds shared by every tail joint DOF, plus the torso bounds.
    All angles are in radians.

    Attributes:
        rom:            Tail joint position bound (symmetric), rad.
        vel:            Tail joint velocity bound, rad/s.
        torque:         Per-DOF torque bound, N m.
        effort_bound:   Bound E on u'u, N^2 m^2.
        rate_bound:     Bound R on the torque rate, N m/s.
        torso_angle:    Torso angle bound, rad.
        torso_vel:      Torso angular rate bound, rad/s.
    """

    rom: float = math.radians(60.0)
    vel: float = math.radians(360.0)
    torque: float = 5.0
    effort_bound: float = 50.0
    rate_bound: float = 200.0
    torso_angle: float = math.radians(180.0)
    torso_vel: float = math.radians(360.0)

    def __post_init__(self) -> None:
        for name in (
            "rom",
            "vel",
            "torque",
            "effort_bound",
            "rate_bound",
            "torso_angle",
            "torso_vel",
        ):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ModelConfigError(
                    f"must be strictly positive, got {value}",
                    field=f"limits.{name}",
                )
        # A single vertebra (2 DOF) must be able to saturate the effort ball.
        if self.effort_bound > 2.0 * self.torque**2 * (1.0 + 1e-12):
            raise ModelConfigError(
                f"E = {self.effort_bound} exceeds 2 * torque^2 = "
                f"{2.0 * self.torque**2}",
                field="limits.effort_bound",
            )


@dataclass(frozen=True, eq=False)
class SpatialInertia:
    """
    Inertia of a rigid body expressed in its own frame.

    Attributes:
        mass:           Mass, kg.
        com:            Center of mass in the body frame, m.
        inertia_com:    3x3 rotational inertia about the center of mass,
                        kg m^2.
    """

    mass: float
    com: np.ndarray
    inertia_com: np.ndarray

    def spatial(self) -> np.ndarray:
        """
        Returns:
            The 6x6 spatial inertia about the body frame origin, in the
            (angular, linear) ordering of spatial vectors.
        """
        cx = skew(self.com)
        out = np.empty((6, 6))
        out[:3, :3] = self.inertia_com + self.mass * cx @ cx.T
        out[:3, 3:] = self.mass * cx
        out[3:, :3] = self.mass * cx.T
        out[3:, 3:] = self.mass * np.eye(3)
        return out


@dataclass(frozen=True)
class PhysicalParams:
    """
    Physical parameter set from which models are built (defaults are the
    reference torso and tail).
    """

    torso_mass: float = 5.0
    torso_dims: tuple[float, float, float] = (0.3, 1.0, 0.3)
    tail_total_length: float = TOTAL_TAIL_LENGTH
    tail_total_mass: float = 1.5
    cross_section: tuple[float, float] = (0.1, 0.1)
    limits: JointLimits = field(default_factory=JointLimits)


@dataclass(frozen=True)
class ModelSpec:
    """
    Full physical description of a torso with an n-link tail.

    The kinematic chain is an unactuated 3-DOF torso joint at the torso
    center (yaw about Z, then pitch about X, then roll about Y), followed by
    one 2-DOF (pitch about X, then yaw about Z) actuated joint per vertebra.
    """

    torso_mass: float
    torso_dims: tuple[float, float, float]
    n_links: int
    link_lengths: tuple[float, ...]
    cross_section: tuple[float, float]
    linear_density: float
    attach_offset: tuple[float, float, float]
    limits: JointLimits
    total_length: float
    total_mass: float
    torso_spheres: tuple[tuple[float, float, float, float], ...] | None = None
    tail_sphere_radius: float | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.n_links <= MAX_LINKS:
            raise ModelConfigError(
                f"must be in [1, {MAX_LINKS}], got {self.n_links}",
                field="tail.n_links",
            )
        if len(self.link_lengths) != self.n_links:
            raise ModelConfigError(
                f"{len(self.link_lengths)} lengths for {self.n_links} links",
                field="tail.lengths_m",
            )
        _check_positive(self.torso_mass, "torso.mass_kg")
        for value in self.torso_dims:
            _check_positive(value, "torso.dims_m")
        for value in self.cross_section:
            _check_positive(value, "tail.cross_section_m")
        for value in self.link_lengths:
            _check_positive(value, "tail.lengths_m")
        _check_positive(self.total_length, "tail.total_length_m")
        _check_positive(self.total_mass, "tail.total_mass_kg")
        _check_positive(self.linear_density, "tail.linear_density")
        if not math.isclose(
            math.fsum(self.link_lengths),
            self.total_length,
            rel_tol=LENGTH_SUM_RTOL,
        ):
            raise ModelConfigError(
                f"lengths sum to {math.fsum(self.link_lengths)} m, the total "
                f"tail length is {self.total_length} m",
                field="tail.total_length_m",
            )
        if not math.isclose(
            self.linear_density * self.total_length,
            self.total_mass,
            rel_tol=1e-12,
        ):
            raise ModelConfigError(
                "linear density is not total mass / total length",
                field="tail.linear_density",
            )
        if self.tail_sphere_radius is not None:
            _check_positive(self.tail_sphere_radius, "collision.tail_radius_m")
        if self.torso_spheres is not None:
            if len(self.torso_spheres) == 0:
                raise ModelConfigError(
                    "at least one sphere is needed",
                    field="collision.torso_spheres",
                )
            for sphere in self.torso_spheres:
                if len(sphere) != 4:
                    raise ModelConfigError(
                        "spheres are [x, y, z, radius]",
                        field="collision.torso_spheres",
                    )
                _check_positive(sphere[3], "collision.torso_spheres")

    @property
    def n_q(self) -> int:
        """Number of generalized coordinates (3 torso + 2 per vertebra)."""
        return 2 * self.n_links + 3

    @property
    def n_u(self) -> int:
        """Number of actuated DOF."""
        return 2 * self.n_links

    @property
    def link_masses(self) -> tuple[float, ...]:
        rho = self.linear_density
        return tuple(rho * length for length in self.link_lengths)

    def torso_inertia(self) -> SpatialInertia:
        return cuboid_inertia(self.torso_mass, self.torso_dims)

    def link_inertias(
        self, lengths: Sequence[float] | None = None
    ) -> list[SpatialInertia]:
        """
        Inertias of the vertebrae, each in its own joint frame.

        Args:
            lengths:    Optional vertebral lengths overriding the stored ones
                        (masses follow the linear density).
        """
        lengths = self.link_lengths if lengths is None else lengths
        return [
            link_inertia(
                length, self.cross_section, self.linear_density * length
            )
            for length in lengths
        ]

    def with_lengths(self, lengths: Sequence[float]) -> "ModelSpec":
        """
        Returns a copy of the model with different vertebral lengths (same
        number of vertebrae and same total length).
        """
        return replace(self, link_lengths=tuple(float(x) for x in lengths))

    @property
    def params(self) -> PhysicalParams:
        """The physical parameters the model was built from."""
        return PhysicalParams(
            torso_mass=self.torso_mass,
            torso_dims=self.torso_dims,
            tail_total_length=self.total_length,
            tail_total_mass=self.total_mass,
            cross_section=self.cross_section,
            limits=self.limits,
        )

    def with_links(self, n_links: int) -> "ModelSpec":
        """
        Uniform-length model with the same physical parameters and collision
        settings, and n_links vertebrae.
        """
        return replace(
            build_uniform_model(n_links, self.params),
            torso_spheres=self.torso_spheres,
            tail_sphere_radius=self.tail_sphere_radius,
        )


def cuboid_inertia(
    mass: float,
    dims: Sequence[float],
    com: Sequence[float] = (0.0, 0.0, 0.0),
) -> SpatialInertia:
    """
    Inertia of a uniformly dense cuboid.

    Args:
        mass:   Mass, kg.
        dims:   Edge lengths along local X, Y and Z, m.
        com:    Position of the geometric center in the body frame, m.

    Returns:
        The SpatialInertia with principal moments m/12 (a^2 + b^2).
    """
    if not (mass > 0.0 and all(d > 0.0 for d in dims)):
        raise ModelConfigError(
            f"cuboid needs positive mass and dimensions, got m={mass}, "
            f"dims={tuple(dims)}"
        )
    a, b, c = (float(d) for d in dims)
    moments = (
        mass / 12.0 * np.array([b * b + c * c, a * a + c * c, a * a + b * b])
    )
    return SpatialInertia(
        mass=float(mass),
        com=np.asarray(com, dtype=float),
        inertia_com=np.diag(moments),
    )


def link_inertia(
    length: float, cross_section: Sequence[float], mass: float
) -> SpatialInertia:
    """
    Inertia of one vertebra in its joint frame. The vertebra extends from the
    joint along -Y, so its center of mass is at (0, -length/2, 0).

    Args:
        length:         Vertebral length, m.
        cross_section:  Width (X) and height (Z), m.
        mass:           Vertebral mass, kg.
    """
    width, height = cross_section
    return cuboid_inertia(
        mass, (width, length, height), com=(0.0, -0.5 * length, 0.0)
    )


def build_variable_model(
    lengths: Sequence[float], params: PhysicalParams | None = None
) -> ModelSpec:
    """
    Builds a model with arbitrary vertebral lengths.

    Args:
        lengths:    Vertebral lengths (proximal to distal), m. Every length
                    must be at least LENGTH_LOWER_BOUND and they must sum to
                    the total tail length.
        params:     Physical parameters. Defaults to PhysicalParams().

    Returns:
        The model. Masses and inertias follow from the linear density.
    """
    params = params or PhysicalParams()
    lengths = tuple(float(x) for x in lengths)
    for i, length in enumerate(lengths):
        if length < LENGTH_LOWER_BOUND:
            raise ModelConfigError(
                f"vertebra {i} is {length} m, below the lower bound "
                f"{LENGTH_LOWER_BOUND} m",
                field="tail.lengths_m",
            )
    return _assemble(lengths, params)


def build_uniform_model(
    n_links: int, params: PhysicalParams | None = None
) -> ModelSpec:
    """
    Builds a model whose n_links vertebrae share the tail length equally.

    Args:
        n_links:    Number of vertebrae, in [1, 6].
        params:     Physical parameters. Defaults to PhysicalParams().
    """
    params = params or PhysicalParams()
    if not 1 <= n_links <= MAX_LINKS:
        raise ModelConfigError(
            f"must be in [1, {MAX_LINKS}], got {n_links}", field="tail.n_links"
        )
    _check_positive(params.tail_total_length, "tail.total_length_m")
    length = params.tail_total_length / n_links
    return _assemble((length,) * n_links, params)


def load_model(config_text: str) -> ModelSpec:
    """
    Parses a model config (JSON).

    Args:
        config_text:    The config file content.

    Returns:
        The validated model.

    Raises:
        ModelConfigError:   On malformed JSON (with line and column), on
                            missing or mistyped fields, and on invariant
                            violations (naming the field).
    """
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as e:
        raise ModelConfigError(e.msg, line=e.lineno, column=e.colno) from e
    if not isinstance(doc, dict):
        raise ModelConfigError("top level must be an object")

    torso = _section(doc, "torso")
    tail = _section(doc, "tail")
    limits_doc = _section(doc, "limits")

    limits = JointLimits(
        rom=math.radians(_number(limits_doc, "limits", "rom_deg")),
        vel=math.radians(_number(limits_doc, "limits", "vel_deg_s")),
        torque=_number(limits_doc, "limits", "torque_nm"),
        effort_bound=_number(limits_doc, "limits", "effort_bound"),
        rate_bound=_number(limits_doc, "limits", "rate_bound_nm_s"),
        torso_angle=math.radians(
            _number(limits_doc, "limits", "torso_angle_deg")
        ),
        torso_vel=math.radians(
            _number(limits_doc, "limits", "torso_vel_deg_s")
        ),
    )
    if "total_mass_kg" not in tail and "total_mass_m" in tail:
        tail = dict(tail, total_mass_kg=tail["total_mass_m"])
    params = PhysicalParams(
        torso_mass=_number(torso, "torso", "mass_kg"),
        torso_dims=_vector(torso, "torso", "dims_m", 3),
        tail_total_length=_number(tail, "tail", "total_length_m"),
        tail_total_mass=_number(tail, "tail", "total_mass_kg"),
        cross_section=_vector(tail, "tail", "cross_section_m", 2),
        limits=limits,
    )
    n_links = tail.get("n_links")
    if not isinstance(n_links, int) or isinstance(n_links, bool):
        raise ModelConfigError("must be an integer", field="tail.n_links")

    if tail.get("lengths_m") is not None:
        lengths = _vector(tail, "tail", "lengths_m", n_links)
        for length in lengths:
            _check_positive(length, "tail.lengths_m")
        model = _assemble(lengths, params)
    else:
        model = build_uniform_model(n_links, params)

    collision = doc.get("collision")
    if collision is not None:
        if not isinstance(collision, dict):
            raise ModelConfigError("must be an object", field="collision")
        spheres = collision.get("torso_spheres")
        if spheres is not None:
            spheres = tuple(
                tuple(float(v) for v in sphere) for sphere in spheres
            )
        radius = collision.get("tail_radius_m")
        model = replace(
            model,
            torso_spheres=spheres,
            tail_sphere_radius=None if radius is None else float(radius),
        )
    logger.debug(f"Loaded model with {model.n_links} links")
    return model


def save_model(model: ModelSpec) -> str:
    """
    Serializes a model to config text accepted by load_model.
    """
    limits = model.limits
    doc: dict[str, Any] = {
        "torso": {
            "mass_kg": model.torso_mass,
            "dims_m": list(model.torso_dims),
        },
        "tail": {
            "n_links": model.n_links,
            "total_length_m": model.total_length,
            "total_mass_kg": model.total_mass,
            "cross_section_m": list(model.cross_section),
            "lengths_m": list(model.link_lengths),
        },
        "limits": {
            "rom_deg": math.degrees(limits.rom),
            "vel_deg_s": math.degrees(limits.vel),
            "torque_nm": limits.torque,
            "effort_bound": limits.effort_bound,
            "rate_bound_nm_s": limits.rate_bound,
            "torso_angle_deg": math.degrees(limits.torso_angle),
            "torso_vel_deg_s": math.degrees(limits.torso_vel),
        },
    }
    if model.torso_spheres is not None or model.tail_sphere_radius is not None:
        doc["collision"] = {
            "torso_spheres": (
                None
                if model.torso_spheres is None
                else [list(s) for s in model.torso_spheres]
            ),
            "tail_radius_m": model.tail_sphere_radius,
        }
    return json.dumps(doc, indent=2) + "\n"


def _assemble(lengths: tuple[float, ...], params: PhysicalParams) -> ModelSpec:
    _check_positive(params.tail_total_mass, "tail.total_mass_kg")
    _check_positive(params.tail_total_length, "tail.total_length_m")
    return ModelSpec(
        torso_mass=float(params.torso_mass),
        torso_dims=tuple(float(d) for d in params.torso_dims),
        n_links=len(lengths),
        link_lengths=lengths,
        cross_section=tuple(float(d) for d in params.cross_section),
        linear_density=params.tail_total_mass / params.tail_total_length,
        attach_offset=(0.0, -0.5 * float(params.torso_dims[1]), 0.0),
        limits=params.limits,
        total_length=float(params.tail_total_length),
        total_mass=float(params.tail_total_mass),
    )


def _check_positive(value: float, field_name: str) -> None:
    if not (isinstance(value, int | float) and math.isfinite(value)):
        raise ModelConfigError(
            f"must be a finite number, got {value!r}", field_name
        )
    if value <= 0.0:
        raise ModelConfigError(f"must be positive, got {value}", field_name)


def _section(doc: dict, name: str) -> dict:
    section = doc.get(name)
    if not isinstance(section, dict):
        raise ModelConfigError("missing or not an object", field=name)
    return section


def _number(section: dict, section_name: str, key: str) -> float:
    value = section.get(key)
    if not isinstance(value, int | float) or isinstance(value, bool):
        raise ModelConfigError(
            "missing or not a number", field=f"{section_name}.{key}"
        )
    return float(value)


def _vector(
    section: dict, section_name: str, key: str, size: int
) -> tuple[float, ...]:
    value = section.get(key)
    if (
        not isinstance(value, list)
        or len(value) != size
        or not all(
            isinstance(v, int | float) and not isinstance(v, bool)
            for v in value
        )
    ):
        raise ModelConfigError(
            f"must be a list of {size} numbers", field=f"{section_name}.{key}"
        )
    return tuple(float(v) for v in value)
