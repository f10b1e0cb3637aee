"""Device description: particle, chip geometry, wire segments, stage plans.

Coordinate system: x along the levitation wires, z against gravity, y
completes the right-handed frame. The origin sits at the geometric
centre of the device. Positive current flows toward +x (levitation
wires) or +z (separation wires).
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .errors import ConfigError


class SpinBranch(Enum):
    """Frozen classical spin label; the value is S_x."""

    UP = 1
    DOWN = -1
    NEUTRAL = 0   # virtual midpoint trajectory, used for stage timing only

    @property
    def s_x(self) -> int:
        return self.value


@dataclass(frozen=True)
class Particle:
    """Point-mass, point-dipole nanoparticle."""

    mass: float                    # kg
    spin_branch: SpinBranch = SpinBranch.NEUTRAL

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError("mass must be positive")


@dataclass(frozen=True)
class ChipConfig:
    """Geometry and drive of the two wire assemblies.

    Lengths in metres, currents in ampere, field in tesla.

    a, b            half-spacings of the levitation wires in y and z
    w               wire width = thickness (square cross-section)
    L               half-spacing of the separation wires (square of side 2L)
    wire_half_length    half-length of the levitation wires (enters only the
                        heating estimate; the field model treats them as long)
    sep_half_length     half-length of the separation wires. The default is
                        deliberately much larger than L so the assembly
                        realises the intended linear-gradient regime at the
                        device centre; shorten it to study end effects.
    I_L             levitation current magnitude
    B0              uniform bias field along +x
    """

    a: float = 9e-6
    b: float = 7e-6
    w: float = 10e-6
    L: float = 200e-6
    wire_half_length: float = 200e-6
    sep_half_length: float = 2e-3
    I_L: float = 24.0
    B0: float = 0.5

    def __post_init__(self):
        for name in ("a", "b", "w", "L", "wire_half_length", "sep_half_length"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"chip parameter {name} must be positive")
        if not 2 * self.a > self.w:
            raise ConfigError("levitation wires overlap: need 2a > w")
        if not 2 * self.b > self.w:
            raise ConfigError("levitation wires overlap: need 2b > w")

    def with_updates(self, **kwargs) -> "ChipConfig":
        return replace(self, **kwargs)


class WireModel(Enum):
    RECT_X = "rect_x"               # rectangular cross-section, axis || x
    THIN_FINITE_Z = "thin_finite_z"  # infinitely thin, finite length, axis || z
    THIN_INFINITE = "thin_infinite"  # infinitely thin and long, axis || x or z


@dataclass(frozen=True)
class WireSegment:
    """One straight conductor.

    ``center`` is the position in the plane transverse to the wire axis:
    (y, z) for x-parallel wires, (x, y) for z-parallel wires. ``current``
    is signed by the flow direction (+x resp. +z is positive).
    """

    model: WireModel
    center: Tuple[float, float]
    current: float
    half_length: Optional[float] = None   # THIN_FINITE_Z only
    half_width: Optional[float] = None    # RECT_X only
    axis: str = "x"                       # THIN_INFINITE only: "x" or "z"

    def __post_init__(self):
        if self.model is WireModel.RECT_X and not (self.half_width and self.half_width > 0):
            raise ConfigError("RECT_X wire needs a positive half_width")
        if self.model is WireModel.THIN_FINITE_Z and not (self.half_length and self.half_length > 0):
            raise ConfigError("THIN_FINITE_Z wire needs a positive half_length")
        if self.axis not in ("x", "z"):
            raise ConfigError("wire axis must be 'x' or 'z'")


class EndRule(Enum):
    SCHEDULED = "scheduled"
    MIDPOINT_CROSSES_ZERO = "midpoint_crosses_zero"
    SEPARATION_RETURNS_TO_INITIAL = "separation_returns_to_initial"
    CLOSURE = "closure"


@dataclass(frozen=True)
class StageSpec:
    """One stage of the splitting protocol.

    eta_sign is the sign of the separation gradient eta_S during the
    stage (stage field B_x = B0 + eta_S * x); the current pattern in the
    separation assembly is flipped globally when eta_sign flips.
    separation_current is the drive magnitude; None means "to be solved"
    (closure stage).
    """

    eta_sign: int
    separation_current: Optional[float]
    end_rule: EndRule
    duration: Optional[float] = None      # SCHEDULED only

    def __post_init__(self):
        if self.eta_sign not in (-1, 1):
            raise ConfigError("eta_sign must be +1 or -1")
        if self.separation_current is not None and self.separation_current < 0:
            raise ConfigError("separation_current must be non-negative")
        if self.end_rule is EndRule.SCHEDULED and not (self.duration and self.duration > 0):
            raise ConfigError("SCHEDULED stage needs a positive duration")


@dataclass(frozen=True)
class StagePlan:
    stages: Tuple[StageSpec, ...]

    def __post_init__(self):
        if len(self.stages) == 0:
            raise ConfigError("plan needs at least one stage")


def default_plan(current: float = 10.0, closure_current: Optional[float] = None) -> StagePlan:
    """Three-stage split / hold / recombine plan.

    Stage 1 drives the branches apart (eta_S = -eta1), stage 2 reverses
    every current to turn them around (eta_S = +eta1), stage 3 reverses
    again with a fine-tuned magnitude to close the loop.
    """
    return StagePlan(stages=(
        StageSpec(-1, current, EndRule.MIDPOINT_CROSSES_ZERO),
        StageSpec(+1, current, EndRule.SEPARATION_RETURNS_TO_INITIAL),
        StageSpec(-1, closure_current, EndRule.CLOSURE),
    ))


# Current sign pattern of the four wires, in table order; multiplied by
# -eta_sign so the stage-1 plan (eta_sign = -1) reproduces the canonical
# (-I, +I, -I, +I) layout.
_QUAD_PATTERN = (-1.0, 1.0, -1.0, 1.0)


def build_levitation_assembly(config: ChipConfig) -> Tuple[WireSegment, ...]:
    """Four x-parallel rectangular wires at (+-a, +-b) with alternating currents."""
    a, b = config.a, config.b
    positions = ((a, b), (-a, b), (-a, -b), (a, -b))
    return tuple(
        WireSegment(
            model=WireModel.RECT_X,
            center=pos,
            current=sign * config.I_L,
            half_width=config.w / 2,
        )
        for pos, sign in zip(positions, _QUAD_PATTERN)
    )


def build_separation_assembly(config: ChipConfig, stage: StageSpec) -> Tuple[WireSegment, ...]:
    """Four z-parallel thin wires at (+-L, +-L); stage drives sign and magnitude."""
    if stage.separation_current is None:
        raise ConfigError("stage has no separation current set (unsolved closure stage)")
    L = config.L
    positions = ((L, L), (-L, L), (-L, -L), (L, -L))
    global_sign = -float(stage.eta_sign)
    return tuple(
        WireSegment(
            model=WireModel.THIN_FINITE_Z,
            center=pos,
            current=global_sign * sign * stage.separation_current,
            half_length=config.sep_half_length,
        )
        for pos, sign in zip(positions, _QUAD_PATTERN)
    )


def thin_levitation_assembly(config: ChipConfig) -> Tuple[WireSegment, ...]:
    """Idealised infinitely-thin version of the levitation assembly, used by
    the analytic cross-checks."""
    a, b = config.a, config.b
    positions = ((a, b), (-a, b), (-a, -b), (a, -b))
    return tuple(
        WireSegment(model=WireModel.THIN_INFINITE, center=pos,
                    current=sign * config.I_L, axis="x")
        for pos, sign in zip(positions, _QUAD_PATTERN)
    )


__all__ = [
    "SpinBranch", "Particle", "ChipConfig", "WireModel", "WireSegment",
    "EndRule", "StageSpec", "StagePlan", "default_plan",
    "build_levitation_assembly", "build_separation_assembly",
    "thin_levitation_assembly", "PhysicalConstants", "DEFAULT_CONSTANTS",
]
