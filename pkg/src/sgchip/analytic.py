"""Closed-form trap properties and the three-stage splitting protocol.

The x-motion of each spin branch in the linear stage field
B_x = B0 + eta_S x is a driven harmonic oscillation around the
branch-dependent centre k(S_x). Stage 1 (eta_S = -eta1) releases the
particle from -x0 and separates the branches, stage 2 (+eta1) turns
them around, stage 3 (-eta2) recombines them.

Sign bookkeeping: with the signed constants (gamma_e < 0, chi_rho < 0)
the branch with S_x = -1 leads, so the raw difference
x(+1) - x(-1) opens negative. All *reported* separations are oriented
with ``separation_orientation`` so that they open positive, which also
makes the amplitude/phase forms below well defined.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .errors import ClosureError, ConfigError


@dataclass(frozen=True)
class TrapParams:
    """Harmonic-trap summary for gradients (eta_L, eta_S)."""

    eta_L: float          # T/m, levitation quadrupole gradient (> 0)
    eta_S: float          # T/m, separation gradient, signed
    omega_y: float        # rad/s
    omega_z: float        # rad/s
    omega_x: float        # rad/s
    z_L: float            # m, levitation height (< 0)
    Bz_at_zL: float       # T, residual vertical field component at z_L


def trap_params(eta_L: float, eta_S: float,
                constants: PhysicalConstants = DEFAULT_CONSTANTS) -> TrapParams:
    """Trap frequencies, levitation height and residual B_z.

    omega_y = (eta_L + eta_S) sqrt(-chi/mu0), omega_z = eta_L sqrt(-chi/mu0),
    omega_x = |eta_S| sqrt(-chi/mu0), z_L = -g/omega_z^2,
    B_z(z_L) = g mu0 / (chi eta_L).
    """
    if eta_L <= 0:
        raise ConfigError("eta_L must be positive")
    if eta_L + eta_S <= 0:
        raise ConfigError("effective y gradient eta_L + eta_S must be positive")
    conv = constants.gradient_to_omega
    omega_z = eta_L * conv
    return TrapParams(
        eta_L=eta_L,
        eta_S=eta_S,
        omega_y=(eta_L + eta_S) * conv,
        omega_z=omega_z,
        omega_x=abs(eta_S) * conv,
        z_L=-constants.g / omega_z ** 2,
        Bz_at_zL=constants.g * constants.mu0 / (constants.chi_rho * eta_L),
    )


def ground_state_width(mass: float, omega: float,
                       constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """sqrt(hbar / 2 m omega), the harmonic ground-state position width."""
    return math.sqrt(constants.hbar / (2.0 * mass * omega))


# ---------------------------------------------------------------------------
# branch centres and orientation

def k_branch(s_x: float, eta: float, B0: float, mass: float,
             constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Oscillation centre k(S_x) = (B0 - mu0 gamma_e hbar S_x / (m chi)) / eta."""
    if eta <= 0:
        raise ConfigError("eta must be positive")
    c = constants.mu0 * constants.gamma_e * constants.hbar / (mass * constants.chi_rho)
    return (B0 - c * s_x) / eta


def delta_k(eta: float, mass: float,
            constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Signed branch-centre split k(+1) - k(-1) = -2 mu0 hbar gamma_e / (eta m chi)."""
    return -2.0 * constants.mu0 * constants.hbar * constants.gamma_e / (
        eta * mass * constants.chi_rho)


def separation_orientation(constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """+1 if the S_x = +1 branch leads (k(+1) > k(-1)), else -1. Multiplying
    raw x(+1) - x(-1) differences by this makes the separation open positive."""
    return 1.0 if constants.gamma_e / constants.chi_rho < 0 else -1.0


def stage_omega(eta: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """omega = eta sqrt(-chi/mu0) for a stage of gradient magnitude eta."""
    return eta * constants.gradient_to_omega


# ---------------------------------------------------------------------------
# stage solutions

@dataclass(frozen=True)
class StageEndpoints:
    """Branch positions/velocities at the end of a stage (absolute time tau).

    The virtual S_x = 0 midpoint state rides along for stage timing.
    """

    X_plus: float
    X_minus: float
    V_plus: float
    V_minus: float
    tau: float
    X_zero: Optional[float] = None
    V_zero: Optional[float] = None


def _endpoint(endpoints: StageEndpoints, s_x: float) -> Tuple[float, float]:
    if s_x > 0:
        return endpoints.X_plus, endpoints.V_plus
    if s_x < 0:
        return endpoints.X_minus, endpoints.V_minus
    if endpoints.X_zero is None:
        raise ConfigError("endpoints carry no midpoint (S_x = 0) state")
    return endpoints.X_zero, endpoints.V_zero


def stage1(t, x0: float, eta1: float, B0: float, mass: float, s_x: float,
           constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Branch state during stage 1 (release from -x0 at rest).

    x(t) = (-x0 - k1) cos(w1 t) + k1,  v(t) = w1 (x0 + k1) sin(w1 t).
    """
    w = stage_omega(eta1, constants)
    k = k_branch(s_x, eta1, B0, mass, constants)
    t = np.asarray(t, dtype=float)
    x = (-x0 - k) * np.cos(w * t) + k
    v = w * (x0 + k) * np.sin(w * t)
    return x, v


def tau1(x0: float, eta1: float, B0: float,
         constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Moment the virtual S_x = 0 midpoint reaches x = 0:
    (1/w1) arccos(B0 / (eta1 x0 + B0))."""
    if x0 < 0:
        raise ConfigError("x0 must be non-negative (release point is -x0)")
    w = stage_omega(eta1, constants)
    return math.acos(B0 / (eta1 * x0 + B0)) / w


def stage1_endpoints(x0: float, eta1: float, B0: float, mass: float,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS,
                     tau: Optional[float] = None) -> StageEndpoints:
    if tau is None:
        tau = tau1(x0, eta1, B0, constants)
    xp, vp = stage1(tau, x0, eta1, B0, mass, +1, constants)
    xm, vm = stage1(tau, x0, eta1, B0, mass, -1, constants)
    x0_, v0_ = stage1(tau, x0, eta1, B0, mass, 0, constants)
    return StageEndpoints(float(xp), float(xm), float(vp), float(vm), tau,
                          float(x0_), float(v0_))


def stage2(t, endpoints1: StageEndpoints, eta1: float, B0: float, mass: float,
           s_x: float, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Branch state during stage 2 (gradient reversed, same magnitude)."""
    w = stage_omega(eta1, constants)
    k = k_branch(s_x, eta1, B0, mass, constants)
    X, V = _endpoint(endpoints1, s_x)
    dt = np.asarray(t, dtype=float) - endpoints1.tau
    x = (X + k) * np.cos(w * dt) - k + (V / w) * np.sin(w * dt)
    v = -w * (X + k) * np.sin(w * dt) + V * np.cos(w * dt)
    return x, v


def _oriented_deltas(endpoints: StageEndpoints, eta: float, mass: float,
                     constants: PhysicalConstants):
    s = separation_orientation(constants)
    dX = s * (endpoints.X_plus - endpoints.X_minus)
    dV = s * (endpoints.V_plus - endpoints.V_minus)
    dk = abs(delta_k(eta, mass, constants))
    return dX, dV, dk


def separation_size_stage2(t, endpoints1: StageEndpoints, eta1: float,
                           B0: float, mass: float,
                           constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Oriented separation during stage 2 and its amplitude/phase:
    dx(t) = R sin[w1 (t - tau1) + phi] - dk1. Returns (dx, R, phi)."""
    w = stage_omega(eta1, constants)
    dX, dV, dk = _oriented_deltas(endpoints1, eta1, mass, constants)
    R = math.hypot(dV / w, dX + dk)
    phi = math.atan2(w * (dX + dk), dV)
    dt = np.asarray(t, dtype=float) - endpoints1.tau
    dx = R * np.sin(w * dt + phi) - dk
    return dx, R, phi


def t_max(endpoints1: StageEndpoints, eta1: float, B0: float, mass: float,
          constants: PhysicalConstants = DEFAULT_CONSTANTS) -> Tuple[float, float]:
    """(t_max, tau2): the moment the stage-2 separation peaks, and the
    stage end chosen so the separation returns to its initial value,
    tau2 = (pi - 2 phi)/w1 + tau1 (symmetric about t_max)."""
    w = stage_omega(eta1, constants)
    _, _, phi = separation_size_stage2(endpoints1.tau, endpoints1, eta1, B0,
                                       mass, constants)
    tm = (math.pi - 2.0 * phi) / (2.0 * w) + endpoints1.tau
    tau2 = (math.pi - 2.0 * phi) / w + endpoints1.tau
    return tm, tau2


def delta_x_max(x0: float, eta1: float, B0: float, mass: float,
                constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Peak separation dk1 (sqrt((B0 + 5 x0 eta1)/(B0 + x0 eta1)) - 1),
    reached during stage 2. Exactly proportional to 1/mass."""
    dk = abs(delta_k(eta1, mass, constants))
    return dk * (math.sqrt((B0 + 5.0 * x0 * eta1) / (B0 + x0 * eta1)) - 1.0)


def stage2_endpoints(endpoints1: StageEndpoints, eta1: float, B0: float,
                     mass: float,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS,
                     tau: Optional[float] = None) -> StageEndpoints:
    if tau is None:
        _, tau = t_max(endpoints1, eta1, B0, mass, constants)
    xp, vp = stage2(tau, endpoints1, eta1, B0, mass, +1, constants)
    xm, vm = stage2(tau, endpoints1, eta1, B0, mass, -1, constants)
    x0_, v0_ = stage2(tau, endpoints1, eta1, B0, mass, 0, constants)
    return StageEndpoints(float(xp), float(xm), float(vp), float(vm), tau,
                          float(x0_), float(v0_))


def stage3(t, endpoints2: StageEndpoints, eta2: float, B0: float, mass: float,
           s_x: float, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Branch state during stage 3 (recombination, gradient magnitude eta2):
    x(t) = -(k2 - X2) cos[w2 (t - tau2)] + k2 + (V2/w2) sin[w2 (t - tau2)]."""
    if eta2 <= 0:
        raise ConfigError("eta2 must be positive")
    w = stage_omega(eta2, constants)
    k = k_branch(s_x, eta2, B0, mass, constants)
    X, V = _endpoint(endpoints2, s_x)
    dt = np.asarray(t, dtype=float) - endpoints2.tau
    x = -(k - X) * np.cos(w * dt) + k + (V / w) * np.sin(w * dt)
    v = w * (k - X) * np.sin(w * dt) + V * np.cos(w * dt)
    return x, v


def stage3_separation(t, endpoints2: StageEndpoints, eta2: float, B0: float,
                      mass: float,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Oriented stage-3 separation dx(t) = R2 sin[w2 (t - tau2) + phi2] + dk2.
    Returns (dx, R2, phi2)."""
    w = stage_omega(eta2, constants)
    dX, dV, dk = _oriented_deltas(endpoints2, eta2, mass, constants)
    R2 = math.hypot(dV / w, dX - dk)
    phi2 = math.atan2(w * (dX - dk), dV)
    dt = np.asarray(t, dtype=float) - endpoints2.tau
    dx = R2 * np.sin(w * dt + phi2) + dk
    return dx, R2, phi2


def tau3_crossing(endpoints2: StageEndpoints, eta2: float, B0: float,
                  mass: float,
                  constants: PhysicalConstants = DEFAULT_CONSTANTS,
                  rtol: float = 1e-9) -> float:
    """First moment after tau2 at which the stage-3 separation reaches zero
    on a descending branch. Raises ClosureError when the stage-3 swing
    cannot reach zero (R2 < dk2)."""
    w = stage_omega(eta2, constants)
    _, R2, phi2 = stage3_separation(endpoints2.tau, endpoints2, eta2, B0,
                                    mass, constants)
    _, _, dk = _oriented_deltas(endpoints2, eta2, mass, constants)
    q = dk / R2
    if q > 1.0 + rtol:
        raise ClosureError(
            f"stage-3 separation cannot reach zero: dk2/R2 = {q:.6f} > 1")
    q = min(q, 1.0)
    theta = -math.pi + math.asin(q)      # descending zero of sin(theta) = -q
    while theta <= phi2 + 1e-15:
        theta += 2.0 * math.pi
    return endpoints2.tau + (theta - phi2) / w


# ---------------------------------------------------------------------------
# potential / energy helpers (used by tests and diagnostics)

def stage_potential(x, eta_signed: float, B0: float, mass: float, s_x: float,
                    constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """U(S_x) = -chi m/(2 mu0) (B0 + eta_S x)^2 + hbar gamma_e S_x (B0 + eta_S x),
    the x-potential of one branch in the linear stage field (eta_S signed)."""
    Bx = B0 + eta_signed * np.asarray(x, dtype=float)
    return (-constants.chi_rho * mass / (2.0 * constants.mu0) * Bx * Bx
            + constants.hbar * constants.gamma_e * s_x * Bx)


def stage_energy(x, v, eta_signed: float, B0: float, mass: float, s_x: float,
                 constants: PhysicalConstants = DEFAULT_CONSTANTS):
    v = np.asarray(v, dtype=float)
    return 0.5 * mass * v * v + stage_potential(x, eta_signed, B0, mass, s_x,
                                                constants)


# ---------------------------------------------------------------------------
# full protocol

@dataclass(frozen=True)
class AnalyticProtocol:
    """Stitched three-stage closed-form solution for both branches."""

    mass: float
    x0: float
    eta1: float
    eta2: float
    B0: float
    constants: PhysicalConstants
    end1: StageEndpoints
    end2: StageEndpoints
    tau3: float
    t_peak: float          # moment of maximum separation
    dx_peak: float         # oriented separation at t_peak

    @property
    def tau1(self) -> float:
        return self.end1.tau

    @property
    def tau2(self) -> float:
        return self.end2.tau

    def eta_signed(self, t: float) -> float:
        if t <= self.end1.tau:
            return -self.eta1
        if t <= self.end2.tau:
            return +self.eta1
        return -self.eta2

    def stage_index(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t <= self.end1.tau, 1,
                        np.where(t <= self.end2.tau, 2, 3)).astype(int)

    def state(self, t, s_x: float):
        """(x, v) of one branch at times t (piecewise closed form)."""
        t = np.asarray(t, dtype=float)
        x1, v1 = stage1(t, self.x0, self.eta1, self.B0, self.mass, s_x,
                        self.constants)
        x2, v2 = stage2(t, self.end1, self.eta1, self.B0, self.mass, s_x,
                        self.constants)
        x3, v3 = stage3(t, self.end2, self.eta2, self.B0, self.mass, s_x,
                        self.constants)
        idx = self.stage_index(t)
        x = np.where(idx == 1, x1, np.where(idx == 2, x2, x3))
        v = np.where(idx == 1, v1, np.where(idx == 2, v2, v3))
        return x, v

    def separation(self, t):
        """Oriented separation and relative velocity at times t."""
        s = separation_orientation(self.constants)
        xp, vp = self.state(t, +1)
        xm, vm = self.state(t, -1)
        return s * (xp - xm), s * (vp - vm)

    def sample(self, dt: float = 1e-4) -> np.ndarray:
        """Row-per-time table: t, x_up, v_up, x_dn, v_dn, dx, dv, stage."""
        n = int(math.floor(self.tau3 / dt)) + 1
        t = np.minimum(np.arange(n + 1) * dt, self.tau3)
        t[-1] = self.tau3
        xp, vp = self.state(t, +1)
        xm, vm = self.state(t, -1)
        s = separation_orientation(self.constants)
        return np.column_stack([
            t, xp, vp, xm, vm, s * (xp - xm), s * (vp - vm),
            self.stage_index(t).astype(float),
        ])

    def write_csv(self, path) -> str:
        from .csvio import write_rows
        rows = self.sample()
        out = [list(r[:-1]) + [int(r[-1])] for r in rows]
        return write_rows(path, "t_s,x_up_m,v_up_mps,x_dn_m,v_dn_mps,dx_m,dv_mps,stage", out)


def analytic_protocol(mass: float, x0: float, eta1: float, B0: float,
                      eta2: Optional[float] = None,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS) -> AnalyticProtocol:
    """Build the full closed-form protocol. eta2 defaults to eta1, for
    which the recombination is exact (time-reversal of the separation)."""
    if eta2 is None:
        eta2 = eta1
    end1 = stage1_endpoints(x0, eta1, B0, mass, constants)
    end2 = stage2_endpoints(end1, eta1, B0, mass, constants)
    tau3 = tau3_crossing(end2, eta2, B0, mass, constants)
    tm, _ = t_max(end1, eta1, B0, mass, constants)
    dx_peak, _, _ = separation_size_stage2(tm, end1, eta1, B0, mass, constants)
    return AnalyticProtocol(mass=mass, x0=x0, eta1=eta1, eta2=eta2, B0=B0,
                            constants=constants, end1=end1, end2=end2,
                            tau3=tau3, t_peak=tm, dx_peak=float(dx_peak))


__all__ = [
    "TrapParams", "trap_params", "ground_state_width", "k_branch", "delta_k",
    "separation_orientation", "stage_omega", "StageEndpoints", "stage1",
    "tau1", "stage1_endpoints", "stage2", "separation_size_stage2", "t_max",
    "delta_x_max", "stage2_endpoints", "stage3", "stage3_separation",
    "tau3_crossing", "stage_potential", "stage_energy", "AnalyticProtocol",
    "analytic_protocol",
]
