"""Classical trajectory integration through the simulated chip field.

Both spin branches (plus the virtual S_x = 0 midpoint used for stage
timing) are advanced together by fixed-step RK4; the acceleration of
each comes from the local field Jacobian:

    a = (chi/mu0) J^T B - (hbar gamma_e S_x / m) grad(B_x) - g e_z

Stage switches are instantaneous current changes. By default they
fire on the protocol's own events located in the integration (midpoint
reaches x = 0, separation returns to its initial value), which keeps
the recombination stage symmetric in the real, slightly nonlinear
field; clock-scheduled switching at the closed-form times is available
as an option.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import analytic
from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .errors import BracketingError, ConfigError, NonFiniteStateError
from .magnetostatics import (LinearFieldModel, device_field_model,
                             field_jacobian)
from .model import ChipConfig, SpinBranch, StagePlan, StageSpec, default_plan


@dataclass(frozen=True)
class TrajectoryState:
    t: float
    position: np.ndarray     # (3,)
    velocity: np.ndarray     # (3,)
    branch: SpinBranch
    stage_index: int = 1


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of one branch."""

    t: np.ndarray            # (n,)
    position: np.ndarray     # (n, 3)
    velocity: np.ndarray     # (n, 3)
    stage: np.ndarray        # (n,)
    branch: SpinBranch
    stage_boundaries: Tuple[float, ...]

    def state(self, i: int) -> TrajectoryState:
        return TrajectoryState(float(self.t[i]), self.position[i].copy(),
                               self.velocity[i].copy(), self.branch,
                               int(self.stage[i]))


# ---------------------------------------------------------------------------
# stage-model factories

@dataclass(frozen=True)
class ChipStageFactory:
    """Builds the physical chip field for a protocol stage."""

    config: ChipConfig
    constants: PhysicalConstants = DEFAULT_CONSTANTS
    rect_method: str = "exact"

    @property
    def B0(self) -> float:
        return self.config.B0

    def model(self, stage: StageSpec, current: Optional[float] = None):
        return device_field_model(self.config, stage, self.constants,
                                  self.rect_method, current_override=current)


@dataclass(frozen=True)
class LinearStageFactory:
    """Ideal linear field per stage; the oracle stand-in for the chip.

    The separation gradient scales linearly with the drive current:
    eta_S = eta_sign * gradient_per_amp * I.
    """

    eta_L: float
    gradient_per_amp: float
    B0: float
    constants: PhysicalConstants = DEFAULT_CONSTANTS

    def model(self, stage: StageSpec, current: Optional[float] = None):
        I = current if current is not None else stage.separation_current
        if I is None:
            raise ConfigError("stage has no separation current set")
        eta_S = stage.eta_sign * self.gradient_per_amp * I
        return LinearFieldModel(self.eta_L, eta_S, self.B0, self.constants)


# ---------------------------------------------------------------------------
# forces

def acceleration_batch(positions: np.ndarray, spins: np.ndarray, model,
                       mass: float,
                       constants: PhysicalConstants = DEFAULT_CONSTANTS,
                       jac_step: float = 1e-8) -> np.ndarray:
    """Acceleration (B, 3) of a batch of branches at positions (B, 3)."""
    n = len(positions)
    h = jac_step
    pts = np.empty((7 * n, 3))
    pts[:n] = positions
    for j in range(3):
        plus = positions.copy()
        plus[:, j] += h
        minus = positions.copy()
        minus[:, j] -= h
        pts[(1 + 2 * j) * n:(2 + 2 * j) * n] = plus
        pts[(2 + 2 * j) * n:(3 + 2 * j) * n] = minus
    B = model.evaluate(pts)
    Bc = B[:n]
    acc = np.empty((n, 3))
    zeeman = constants.hbar * constants.gamma_e * spins / mass
    for j in range(3):
        dB = (B[(1 + 2 * j) * n:(2 + 2 * j) * n]
              - B[(2 + 2 * j) * n:(3 + 2 * j) * n]) / (2 * h)
        acc[:, j] = (constants.chi_rho / constants.mu0) * np.sum(Bc * dB, axis=1) \
            - zeeman * dB[:, 0]
    acc[:, 2] -= constants.g
    return acc


def acceleration(state: TrajectoryState, model, mass: float,
                 constants: PhysicalConstants = DEFAULT_CONSTANTS,
                 jac_step: float = 1e-8) -> np.ndarray:
    """Acceleration of a single branch state."""
    a = acceleration_batch(state.position[None, :],
                           np.array([float(state.branch.s_x)]), model, mass,
                           constants, jac_step)
    return a[0]


# ---------------------------------------------------------------------------
# RK4 stepping

def _rk4_step(states: np.ndarray, spins: np.ndarray, dt: float, model,
              mass: float, constants: PhysicalConstants,
              jac_step: float) -> np.ndarray:
    """One fixed step for a batch of states (B, 6) = [pos, vel]."""

    def deriv(s):
        out = np.empty_like(s)
        out[:, :3] = s[:, 3:]
        out[:, 3:] = acceleration_batch(s[:, :3], spins, model, mass,
                                        constants, jac_step)
        return out

    k1 = deriv(states)
    k2 = deriv(states + 0.5 * dt * k1)
    k3 = deriv(states + 0.5 * dt * k2)
    k4 = deriv(states + dt * k3)
    return states + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class _Recorder:
    def __init__(self):
        self.t: List[float] = []
        self.states: List[np.ndarray] = []
        self.stage: List[int] = []

    def add(self, t, states, stage):
        self.t.append(t)
        self.states.append(states.copy())
        self.stage.append(stage)

    def arrays(self):
        return (np.asarray(self.t), np.stack(self.states, axis=0),
                np.asarray(self.stage))


def _check_finite(states):
    if not np.all(np.isfinite(states)):
        raise NonFiniteStateError("integration produced a non-finite state")


def _integrate_span(states, spins, t0, t1, dt, model, mass, constants,
                    jac_step, stage, rec: Optional[_Recorder]):
    """March from t0 to exactly t1 with full steps of dt plus one closing
    partial step."""
    t = t0
    n_full = max(int(math.floor((t1 - t0) / dt - 1e-12)), 0)
    for _ in range(n_full):
        states = _rk4_step(states, spins, dt, model, mass, constants, jac_step)
        t += dt
        if rec is not None:
            rec.add(t, states, stage)
    if t1 - t > 1e-18:
        states = _rk4_step(states, spins, t1 - t, model, mass, constants, jac_step)
        if rec is not None:
            rec.add(t1, states, stage)
    _check_finite(states)
    return states


def _integrate_to_event(states, spins, t0, dt, model, mass, constants,
                        jac_step, event: Callable[[np.ndarray], float],
                        t_max: float, stage, rec: Optional[_Recorder],
                        bisect_iters: int = 64,
                        abort: Optional[Callable[[np.ndarray], bool]] = None):
    """Advance until ``event`` crosses zero from below; the crossing is then
    located by bisecting the step length from the pre-step state. Returns
    (states, t, crossed). An optional ``abort`` predicate stops the march
    early with crossed=False once the event is known unreachable."""
    t = t0
    e0 = event(states)
    while t < t_max - 1e-18:
        step = min(dt, t_max - t)
        prev = states
        states = _rk4_step(states, spins, step, model, mass, constants, jac_step)
        e1 = event(states)
        if e0 < 0.0 <= e1:
            lo, hi = 0.0, step
            for _ in range(bisect_iters):
                mid = 0.5 * (lo + hi)
                trial = _rk4_step(prev, spins, mid, model, mass, constants,
                                  jac_step)
                if event(trial) < 0.0:
                    lo = mid
                else:
                    hi = mid
            h = 0.5 * (lo + hi)
            states = _rk4_step(prev, spins, h, model, mass, constants, jac_step)
            t = t + h
            if rec is not None:
                rec.add(t, states, stage)
            _check_finite(states)
            return states, t, True
        t += step
        e0 = e1
        if rec is not None:
            rec.add(t, states, stage)
        _check_finite(states)
        if abort is not None and abort(states):
            return states, t, False
    return states, t, False


def integrate(initial: TrajectoryState, switch_times: Sequence[float],
              model_for_stage: Callable[[int], object], dt: float,
              t_end: float, mass: float,
              constants: PhysicalConstants = DEFAULT_CONSTANTS,
              jac_step: float = 1e-8) -> Trajectory:
    """Integrate one branch through scheduled stage switches.

    ``switch_times`` are absolute times (sorted); stage i (1-based) runs
    up to switch_times[i-1], the last stage up to t_end. Steps are
    clipped to land exactly on every switch time.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    times = [t for t in sorted(switch_times) if initial.t < t < t_end]
    bounds = times + [t_end]
    states = np.concatenate([initial.position, initial.velocity])[None, :]
    spins = np.array([float(initial.branch.s_x)])
    rec = _Recorder()
    rec.add(initial.t, states, 1)
    t = initial.t
    for i, t1 in enumerate(bounds):
        model = model_for_stage(i + 1)
        states = _integrate_span(states, spins, t, t1, dt, model, mass,
                                 constants, jac_step, i + 1, rec)
        t = t1
    ts, st, stages = rec.arrays()
    return Trajectory(t=ts, position=st[:, 0, :3], velocity=st[:, 0, 3:],
                      stage=stages, branch=initial.branch,
                      stage_boundaries=tuple(times))


# ---------------------------------------------------------------------------
# levitation equilibrium

def find_equilibrium(model, x: float = 0.0,
                     z_bracket: Tuple[float, float] = (-2e-6, 0.0),
                     constants: PhysicalConstants = DEFAULT_CONSTANTS,
                     tol_accel: float = 1e-6, max_iter: int = 200,
                     jac_step: float = 1e-8) -> float:
    """Levitation height: bisection root of the vertical acceleration of a
    resting spinless particle on the line (x, 0, z). The diamagnetic
    acceleration is mass-independent, so no mass enters."""

    def a_z(z):
        a = acceleration_batch(np.array([[x, 0.0, z]]), np.zeros(1), model,
                               1.0, constants, jac_step)
        return float(a[0, 2])

    lo, hi = z_bracket
    f_lo, f_hi = a_z(lo), a_z(hi)
    if not (f_lo > 0.0 > f_hi):
        raise BracketingError(
            f"no levitation equilibrium in [{lo:g}, {hi:g}] m "
            f"(a_z = {f_lo:.3e}, {f_hi:.3e})")
    z = 0.5 * (lo + hi)
    for _ in range(max_iter):
        z = 0.5 * (lo + hi)
        f = a_z(z)
        if abs(f) < tol_accel:
            return z
        if f > 0.0:
            lo = z
        else:
            hi = z
    raise BracketingError(
        f"levitation bisection did not reach |a_z| < {tol_accel:g} m/s^2")


# ---------------------------------------------------------------------------
# full interferometer protocol

_ORDER = (SpinBranch.UP, SpinBranch.DOWN, SpinBranch.NEUTRAL)
_SPINS = np.array([1.0, -1.0, 0.0])


@dataclass(frozen=True)
class ProtocolSetup:
    """Stages 1-2 integrated and cached; stage 3 can be re-run cheaply."""

    factory: object
    plan: StagePlan
    mass: float
    x0: float
    constants: PhysicalConstants
    dt: float
    jac_step: float
    z_L: float
    eta1: float              # gradient magnitude extracted from the assembly
    tau1: float
    tau2: float
    dx_initial: float        # oriented separation at tau1
    states_tau2: np.ndarray  # (3, 6): up / down / midpoint
    recorder: _Recorder      # stages 1-2 history
    orientation: float

    def stage3_model(self, current: float):
        return self.factory.model(self.plan.stages[2], current)


@dataclass(frozen=True)
class Stage3Result:
    current: float
    crossed: bool
    tau3: float              # crossing time (horizon end when not crossed)
    dx_end: float            # oriented separation at tau3
    dv_end: float            # oriented relative velocity at tau3
    min_dx: float            # closest approach (0 when crossed)
    recorder: Optional[_Recorder]


@dataclass(frozen=True)
class NumericRunResult:
    setup: ProtocolSetup
    stage3: Stage3Result
    t: np.ndarray
    states: np.ndarray       # (n, 3, 6)
    stage: np.ndarray
    max_dx: float
    max_abs_y: float
    max_abs_dz: float

    @property
    def tau3(self) -> float:
        return self.stage3.tau3

    @property
    def dx(self) -> np.ndarray:
        s = self.setup.orientation
        return s * (self.states[:, 0, 0] - self.states[:, 1, 0])

    @property
    def dv(self) -> np.ndarray:
        s = self.setup.orientation
        return s * (self.states[:, 0, 3] - self.states[:, 1, 3])

    def trajectory(self, branch: SpinBranch) -> Trajectory:
        i = _ORDER.index(branch)
        return Trajectory(t=self.t, position=self.states[:, i, :3],
                          velocity=self.states[:, i, 3:], stage=self.stage,
                          branch=branch,
                          stage_boundaries=(self.setup.tau1, self.setup.tau2))

    def write_csv(self, path, sample_every: int = 10) -> str:
        """3D trajectory table. Transverse columns are the UP branch; both
        branches share them to integrator precision when launched on axis."""
        from .csvio import write_rows
        idx = np.arange(len(self.t))
        keep = (idx % sample_every == 0) | (idx == len(self.t) - 1)
        s = self.setup.orientation
        tk = self.t[keep]
        up, dn = self.states[keep, 0], self.states[keep, 1]
        stg = self.stage[keep]
        rows = []
        for k in range(len(tk)):
            rows.append([
                tk[k], up[k, 0], up[k, 3], dn[k, 0], dn[k, 3],
                s * (up[k, 0] - dn[k, 0]), s * (up[k, 3] - dn[k, 3]),
                int(stg[k]), up[k, 1], up[k, 2], up[k, 4], up[k, 5],
            ])
        header = ("t_s,x_up_m,v_up_mps,x_dn_m,v_dn_mps,dx_m,dv_mps,stage,"
                  "y_m,z_m,vy_mps,vz_mps")
        return write_rows(path, header, rows)


def _oriented_dx(states: np.ndarray, orientation: float) -> float:
    return orientation * (states[0, 0] - states[1, 0])


def separation_gradient(factory, stage: StageSpec,
                        current: Optional[float] = None) -> float:
    """Signed dB_x/dx at the device centre of the stage field."""
    J = field_jacobian(np.zeros(3), factory.model(stage, current))
    return float(J[0, 0])


def prepare_protocol(mass: float, x0: float, factory,
                     plan: Optional[StagePlan] = None,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS,
                     dt: float = 1e-5, jac_step: float = 1e-8,
                     switching: str = "event",
                     z_bracket: Tuple[float, float] = (-2e-6, 0.0)) -> ProtocolSetup:
    """Integrate stages 1 and 2 of the protocol through the stage fields.

    The particle starts at (-x0, 0, z_L) at rest on all three branches
    (up, down, midpoint). Event switching (default) locates the stage-end
    crossings in the integration; scheduled switching uses the closed-form
    times evaluated at the numerically extracted stage-1 gradient.
    """
    if plan is None:
        plan = default_plan()
    if len(plan.stages) != 3:
        raise ConfigError("the interferometer protocol needs exactly 3 stages")
    if x0 <= 0:
        raise ConfigError("x0 must be positive")
    if switching not in ("scheduled", "event"):
        raise ConfigError("switching must be 'scheduled' or 'event'")

    orientation = analytic.separation_orientation(constants)
    stage1_model = factory.model(plan.stages[0])
    eta_signed = separation_gradient(factory, plan.stages[0])
    if math.copysign(1.0, eta_signed) != plan.stages[0].eta_sign:
        raise ConfigError(
            "built stage-1 assembly gradient sign does not match the plan")
    eta1 = abs(eta_signed)
    z_L = find_equilibrium(stage1_model, constants=constants,
                           jac_step=jac_step, z_bracket=z_bracket)

    B0 = factory.B0
    end1 = analytic.stage1_endpoints(x0, eta1, B0, mass, constants)
    _, tau2_sched = analytic.t_max(end1, eta1, B0, mass, constants)

    states = np.zeros((3, 6))
    states[:, 0] = -x0
    states[:, 2] = z_L
    rec = _Recorder()
    rec.add(0.0, states, 1)

    stage2_model = factory.model(plan.stages[1])

    if switching == "scheduled":
        states = _integrate_span(states, _SPINS, 0.0, end1.tau, dt,
                                 stage1_model, mass, constants, jac_step, 1, rec)
        t1 = end1.tau
        dx1 = _oriented_dx(states, orientation)
        states = _integrate_span(states, _SPINS, t1, tau2_sched, dt,
                                 stage2_model, mass, constants, jac_step, 2, rec)
        t2 = tau2_sched
    else:
        states, t1, crossed = _integrate_to_event(
            states, _SPINS, 0.0, dt, stage1_model, mass, constants, jac_step,
            event=lambda s: s[2, 0], t_max=4.0 * end1.tau, stage=1, rec=rec)
        if not crossed:
            raise BracketingError("midpoint never crossed x = 0 in stage 1")
        dx1 = _oriented_dx(states, orientation)

        grown = {"flag": False}

        def stage2_event(s):
            dx = _oriented_dx(s, orientation)
            if dx > 1.2 * dx1:
                grown["flag"] = True
            return (dx1 - dx) if grown["flag"] else -1.0

        states, t2, crossed = _integrate_to_event(
            states, _SPINS, t1, dt, stage2_model, mass, constants, jac_step,
            event=stage2_event, t_max=t1 + 4.0 * (tau2_sched - end1.tau),
            stage=2, rec=rec)
        if not crossed:
            raise BracketingError(
                "stage-2 separation never returned to its initial value")

    return ProtocolSetup(factory=factory, plan=plan, mass=mass, x0=x0,
                         constants=constants, dt=dt, jac_step=jac_step,
                         z_L=z_L, eta1=eta1, tau1=t1, tau2=t2, dx_initial=dx1,
                         states_tau2=states, recorder=rec,
                         orientation=orientation)


def run_stage3(setup: ProtocolSetup, current: float,
               horizon_factor: float = 3.0, record: bool = True) -> Stage3Result:
    """Integrate stage 3 at the given current until the oriented separation
    crosses zero (descending), or until the horizon. When no crossing
    occurs the closest approach is reported instead."""
    model = setup.stage3_model(current)
    t_max = setup.tau2 + horizon_factor * (setup.tau2 - setup.tau1)
    rec = _Recorder() if record else None
    tracker = {"min": math.inf}
    dx_switch = _oriented_dx(setup.states_tau2, setup.orientation)

    def event(s):
        dx = _oriented_dx(s, setup.orientation)
        if dx < tracker["min"]:
            tracker["min"] = dx
        return -dx

    def bounced(s):
        # separation has passed its minimum and is opening again: on the
        # stage-3 swing a miss now stays a miss, no need to run the horizon
        dx = _oriented_dx(s, setup.orientation)
        return dx > tracker["min"] + 0.05 * abs(dx_switch)

    states, t, crossed = _integrate_to_event(
        setup.states_tau2.copy(), _SPINS, setup.tau2, setup.dt, model,
        setup.mass, setup.constants, setup.jac_step, event=event,
        t_max=t_max, stage=3, rec=rec, abort=None if record else bounced)

    dx_end = _oriented_dx(states, setup.orientation)
    dv_end = setup.orientation * (states[0, 3] - states[1, 3])
    return Stage3Result(current=current, crossed=crossed, tau3=t,
                        dx_end=dx_end, dv_end=dv_end,
                        min_dx=0.0 if crossed else tracker["min"],
                        recorder=rec)


def run_interferometer_numeric(mass: float, x0: float, config: ChipConfig,
                               plan: Optional[StagePlan] = None,
                               constants: PhysicalConstants = DEFAULT_CONSTANTS,
                               dt: float = 1e-5, jac_step: float = 1e-8,
                               rect_method: str = "exact",
                               switching: str = "event",
                               stage3_current: Optional[float] = None,
                               horizon_factor: float = 3.0,
                               factory=None) -> NumericRunResult:
    """Full three-stage run of both branches through the chip field.

    stage3_current defaults to the plan's stage-3 current, falling back
    to the stage-1 magnitude when the plan leaves it to be solved.
    Passing ``factory`` overrides the chip field (e.g. with the ideal
    linear model) while keeping the same protocol logic.
    """
    if plan is None:
        plan = default_plan()
    if factory is None:
        factory = ChipStageFactory(config, constants, rect_method)
    setup = prepare_protocol(mass, x0, factory, plan, constants, dt, jac_step,
                             switching)
    if stage3_current is None:
        stage3_current = plan.stages[2].separation_current
    if stage3_current is None:
        stage3_current = plan.stages[0].separation_current
    s3 = run_stage3(setup, stage3_current, horizon_factor)

    t1, st1, stg1 = setup.recorder.arrays()
    t3, st3, stg3 = s3.recorder.arrays()
    t = np.concatenate([t1, t3])
    states = np.concatenate([st1, st3], axis=0)
    stage = np.concatenate([stg1, stg3])

    dx = setup.orientation * (states[:, 0, 0] - states[:, 1, 0])
    y_all = states[:, :, 1]
    z_all = states[:, :, 2]
    return NumericRunResult(
        setup=setup, stage3=s3, t=t, states=states, stage=stage,
        max_dx=float(np.max(dx)),
        max_abs_y=float(np.max(np.abs(y_all))),
        max_abs_dz=float(np.max(np.abs(z_all - setup.z_L))),
    )


__all__ = [
    "TrajectoryState", "Trajectory", "ChipStageFactory", "LinearStageFactory",
    "acceleration", "acceleration_batch", "integrate", "find_equilibrium",
    "ProtocolSetup", "Stage3Result", "NumericRunResult",
    "separation_gradient", "prepare_protocol", "run_stage3",
    "run_interferometer_numeric",
]
