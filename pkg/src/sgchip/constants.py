"""Physical constants used throughout the simulator.

Everything is SI. Signs follow the physics: both the electron
gyromagnetic ratio and the mass magnetic susceptibility of diamond are
stored *negative*; any place that needs a magnitude takes abs() locally.
"""

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class PhysicalConstants:
    """Single source of truth for every physical constant.

    Attributes
    ----------
    mu0 : vacuum permeability, T m/A
    hbar : reduced Planck constant, J s
    gamma_e : electron gyromagnetic ratio, rad/(s T), negative
    chi_rho : mass magnetic susceptibility of diamond, m^3/kg, negative
    g : gravitational acceleration, m/s^2
    D : NV zero-field splitting, Hz (enters no force; kept for reporting)
    rho_gold : electrical resistivity of gold, Ohm m
    alpha_si : thermal diffusivity of silicon, m^2/s
    """

    mu0: float = 1.2566e-6
    hbar: float = 1.05e-34
    gamma_e: float = -1.8e11
    chi_rho: float = -6.2e-9
    g: float = 9.8
    D: float = 2.8e9
    rho_gold: float = 2.44e-8
    alpha_si: float = 8.0e-5

    def __post_init__(self):
        if not self.chi_rho < 0:
            raise ConfigError("chi_rho must be negative (diamagnetic material)")
        if not self.gamma_e < 0:
            raise ConfigError("gamma_e must be negative (electron)")
        for name in ("mu0", "hbar", "g"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def gradient_to_omega(self) -> float:
        """sqrt(-chi_rho/mu0): converts a field gradient (T/m) to a trap
        angular frequency (rad/s)."""
        return (-self.chi_rho / self.mu0) ** 0.5


DEFAULT_CONSTANTS = PhysicalConstants()
