"""Flat key=value run configuration.

Format: INI-like sections ``[chip] [particle] [protocol] [numeric]``,
one ``key=value`` per line, ``#`` comments. Keys carry their unit as a
suffix (``a_um=9``, ``IL_A=24``, ``mass_kg=1e-19``); every omitted key
falls back to the device defaults. README carries a full annotated
example.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .errors import ConfigError
from .model import ChipConfig, Particle, SpinBranch, StagePlan, default_plan


@dataclass(frozen=True)
class NumericParams:
    dt: float = 1e-5               # integrator step, s
    quad_order: int = 32           # rect-wire Gauss-Legendre order
    jac_step: float = 1e-8         # Jacobian stencil, m
    tol_dx: float = 1e-8           # closure position tolerance, m
    tol_dv: float = 1e-7           # closure velocity tolerance, m/s
    max_iter: int = 50             # closure bisection budget
    horizon_factor: float = 3.0    # stage-3 horizon in units of tau2 - tau1
    sample_every: int = 10         # CSV subsampling of trajectory rows
    switching: str = "event"       # or "scheduled"

    def __post_init__(self):
        for name in ("dt", "jac_step", "tol_dx", "tol_dv", "horizon_factor"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"numeric parameter {name} must be positive")
        for name in ("quad_order", "max_iter", "sample_every"):
            if not getattr(self, name) >= 1:
                raise ConfigError(f"numeric parameter {name} must be >= 1")
        if self.switching not in ("scheduled", "event"):
            raise ConfigError("switching must be 'scheduled' or 'event'")


@dataclass(frozen=True)
class RunConfig:
    chip: ChipConfig
    particle: Particle
    x0: float
    plan: StagePlan
    numeric: NumericParams
    output_dir: str = "out"
    constants: PhysicalConstants = DEFAULT_CONSTANTS
    stage_current: float = 10.0
    stage3_current: Optional[float] = None   # None: solved by close-loop


# key -> (section, target attribute, scale to SI, validator)
def _positive(key):
    def check(v):
        if not v > 0:
            raise ConfigError(f"{key} must be positive")
    return check


_SCHEMA = {
    "chip": {
        "a_um": ("a", 1e-6, _positive("a_um")),
        "b_um": ("b", 1e-6, _positive("b_um")),
        "w_um": ("w", 1e-6, _positive("w_um")),
        "L_um": ("L", 1e-6, _positive("L_um")),
        "l_um": ("wire_half_length", 1e-6, _positive("l_um")),
        "lsep_um": ("sep_half_length", 1e-6, _positive("lsep_um")),
        "IL_A": ("I_L", 1.0, None),
        "B0_T": ("B0", 1.0, None),
    },
    "particle": {
        "mass_kg": ("mass", 1.0, _positive("mass_kg")),
    },
    "protocol": {
        "x0_um": ("x0", 1e-6, _positive("x0_um")),
        "I_A": ("stage_current", 1.0, _positive("I_A")),
        "I3_A": ("stage3_current", 1.0, _positive("I3_A")),
    },
    "numeric": {
        "dt_s": ("dt", 1.0, _positive("dt_s")),
        "quad_order": ("quad_order", 1, None),
        "jac_step_m": ("jac_step", 1.0, _positive("jac_step_m")),
        "tol_dx_m": ("tol_dx", 1.0, _positive("tol_dx_m")),
        "tol_dv_mps": ("tol_dv", 1.0, _positive("tol_dv_mps")),
        "max_iter": ("max_iter", 1, None),
        "horizon_factor": ("horizon_factor", 1.0, _positive("horizon_factor")),
        "sample_every": ("sample_every", 1, None),
        "switching": ("switching", None, None),
    },
}

_INT_KEYS = {"quad_order", "max_iter", "sample_every"}
_STR_KEYS = {"switching"}


def parse_config(text: str, output_dir: str = "out") -> RunConfig:
    """Parse config text into a validated RunConfig (defaults for every
    omitted key). Errors name the offending key."""
    values: Dict[str, Dict[str, object]] = {s: {} for s in _SCHEMA}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}] (line {lineno})")
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value on line {lineno}: {raw!r}")
        if section is None:
            raise ConfigError(
                f"key outside any section on line {lineno}: {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key} in section [{section}]")
        attr, scale, check = _SCHEMA[section][key]
        if key in _STR_KEYS:
            parsed: object = val
        else:
            try:
                parsed = int(val) if key in _INT_KEYS else float(val)
            except ValueError:
                raise ConfigError(f"cannot parse value for {key}: {val!r}")
            if check is not None:
                check(parsed)
            if key not in _INT_KEYS:
                parsed = parsed * scale
        values[section][attr] = parsed

    try:
        chip = ChipConfig(**values["chip"])
    except TypeError as exc:
        raise ConfigError(f"bad chip configuration: {exc}")
    mass = values["particle"].get("mass", 1e-19)
    particle = Particle(mass=mass, spin_branch=SpinBranch.NEUTRAL)
    proto = values["protocol"]
    x0 = proto.get("x0", 40e-6)
    stage_current = proto.get("stage_current", 10.0)
    stage3_current = proto.get("stage3_current")
    numeric = NumericParams(**values["numeric"])
    plan = default_plan(stage_current, stage3_current)
    return RunConfig(chip=chip, particle=particle, x0=x0, plan=plan,
                     numeric=numeric, output_dir=output_dir,
                     stage_current=stage_current,
                     stage3_current=stage3_current)


def load_config(path: Optional[str], output_dir: str = "out") -> RunConfig:
    """RunConfig from a file path; None or missing text means all defaults."""
    if path is None:
        return parse_config("", output_dir)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    return parse_config(text, output_dir)


__all__ = ["NumericParams", "RunConfig", "parse_config", "load_config"]
