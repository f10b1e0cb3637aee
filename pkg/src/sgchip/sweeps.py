"""Parameter sweeps and engineering estimates behind the CLI.

Sweeps use the thin-wire gradient formulas (the design-exploration
regime); the trajectory machinery is deliberately not involved, which
keeps every sweep well under a second.
"""

import math
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .analytic import delta_x_max
from .magnetostatics import eta_L_thin, eta_S_thin
from .model import ChipConfig

DEFAULT_CURRENTS = (24.0, 18.0, 12.0)


def default_spacing_grid() -> np.ndarray:
    """2a values from 12 to 40 um in 0.5 um steps."""
    return np.round(np.arange(12e-6, 40e-6 + 1e-12, 0.5e-6), 12)


def sweep_gradient_vs_spacing(two_a_values: Sequence[float] = None,
                              b: float = 7e-6,
                              currents: Sequence[float] = DEFAULT_CURRENTS,
                              constants: PhysicalConstants = DEFAULT_CONSTANTS,
                              ) -> List[Tuple[float, float, float]]:
    """Rows (two_a_um, IL_A, etaL_Tpm): central gradient vs wire spacing,
    one curve per levitation current."""
    if two_a_values is None:
        two_a_values = default_spacing_grid()
    rows = []
    for I_L in currents:
        for two_a in two_a_values:
            eta = eta_L_thin(two_a / 2.0, b, I_L, constants)
            rows.append((two_a * 1e6, I_L, eta))
    return rows


def sweep_bz_vs_spacing(two_a_values: Sequence[float] = None,
                        b: float = 7e-6,
                        currents: Sequence[float] = DEFAULT_CURRENTS,
                        constants: PhysicalConstants = DEFAULT_CONSTANTS,
                        ) -> List[Tuple[float, float, float]]:
    """Rows (two_a_um, IL_A, Bz_T): residual vertical field at the levitation
    height, B_z(z_L) = g mu0 / (chi eta_L)."""
    if two_a_values is None:
        two_a_values = default_spacing_grid()
    rows = []
    for I_L in currents:
        for two_a in two_a_values:
            eta = eta_L_thin(two_a / 2.0, b, I_L, constants)
            bz = constants.g * constants.mu0 / (constants.chi_rho * eta)
            rows.append((two_a * 1e6, I_L, bz))
    return rows


def sweep_size_vs_x0(masses: Sequence[float] = (1e-19, 1e-17, 1e-15),
                     x0_values: Sequence[float] = None,
                     eta1: float = None, B0: float = 0.5,
                     L: float = 200e-6, current: float = 10.0,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS,
                     ) -> List[Tuple[float, float, float]]:
    """Rows (mass_kg, x0_um, dxmax_m): peak superposition size vs release
    point, one curve per mass."""
    if x0_values is None:
        x0_values = np.round(np.arange(1e-6, 40e-6 + 1e-12, 0.5e-6), 12)
    if eta1 is None:
        eta1 = eta_S_thin(L, current, constants)
    rows = []
    for mass in masses:
        for x0 in x0_values:
            rows.append((mass, x0 * 1e6, delta_x_max(x0, eta1, B0, mass,
                                                     constants)))
    return rows


def heating_estimate(current: float, config: ChipConfig, duration: float,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS,
                     ) -> Tuple[float, float]:
    """(R, Q): resistance of one gold wire of length 2 * wire_half_length
    and square cross-section w x w, and the Joule heat I^2 R dt."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    length = 2.0 * config.wire_half_length
    R = constants.rho_gold * length / config.w ** 2
    Q = current * current * R * duration
    return R, Q


def diffusion_length(duration: float,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Thermal diffusion length sqrt(alpha_si * duration) in the silicon
    carrier over the protocol duration."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    return math.sqrt(constants.alpha_si * duration)


__all__ = [
    "DEFAULT_CURRENTS", "default_spacing_grid", "sweep_gradient_vs_spacing",
    "sweep_bz_vs_spacing", "sweep_size_vs_x0", "heating_estimate",
    "diffusion_length",
]
