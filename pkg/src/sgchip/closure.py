"""Recombination solve: find the stage-3 current that closes the loop.

The closing time tau3 is pinned implicitly as the first zero crossing
of the oriented separation after the stage-3 switch, so position
closure holds there by construction and the genuine unknown is the
relative velocity at the crossing.

Geometry of the problem: in phase space the stage-3 separation moves on
a near-circle that passes through the origin exactly at the solution.
Below the solved current the separation crosses zero with a residual
velocity; above it the branches miss each other and never cross. The
scalar residual therefore changes sign across the solution when the
miss distance (scaled to velocity units) stands in for the velocity on
the no-crossing side, and the solve is a plain deterministic bisection.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .errors import BracketingError, ClosureError, ConfigError
from .dynamics import (ChipStageFactory, ProtocolSetup, Stage3Result,
                       prepare_protocol, run_stage3, separation_gradient)
from .model import ChipConfig, StagePlan, default_plan


@dataclass(frozen=True)
class ClosureResult:
    I3: float                # solved stage-3 current, A
    eta2: float              # gradient magnitude at that current, T/m
    tau3: float              # closing moment, s
    residual_dx: float       # oriented separation at tau3, m
    residual_dv: float       # oriented relative velocity at tau3, m/s
    iterations: int          # stage-3 evaluations spent

    def write_csv(self, path) -> str:
        from .csvio import write_rows
        row = [self.I3, self.eta2, self.tau3, self.residual_dx,
               self.residual_dv, self.iterations]
        return write_rows(path, "I3_A,eta2_Tpm,tau3_s,res_dx_m,res_dv_mps,iters",
                          [row])


def closure_residual(setup: ProtocolSetup, I3: float,
                     horizon_factor: float = 3.0) -> Tuple[float, float]:
    """(dx, dv) at the stage-3 zero crossing for current I3.

    Raises ClosureError when the separation never crosses zero within
    the horizon.
    """
    r = run_stage3(setup, I3, horizon_factor, record=False)
    if not r.crossed:
        raise ClosureError(
            f"no separation zero crossing within the horizon at I3 = {I3} A "
            f"(closest approach {r.min_dx:.3e} m)")
    return r.dx_end, r.dv_end


def _signed_residual(setup: ProtocolSetup, I3: float, omega_scale: float,
                     horizon_factor: float) -> Tuple[float, Stage3Result]:
    """Negative (relative velocity) on the crossing side, positive
    (scaled miss distance) on the no-crossing side."""
    r = run_stage3(setup, I3, horizon_factor, record=False)
    if r.crossed:
        return r.dv_end, r
    return omega_scale * max(r.min_dx, 0.0), r


def solve_closure(config: ChipConfig, mass: float, x0: float,
                  plan: Optional[StagePlan] = None,
                  tolerance_dx: float = 1e-8, tolerance_dv: float = 1e-7,
                  max_iter: int = 50,
                  constants: PhysicalConstants = DEFAULT_CONSTANTS,
                  dt: float = 1e-5, jac_step: float = 1e-8,
                  rect_method: str = "exact", switching: str = "event",
                  horizon_factor: float = 3.0,
                  setup: Optional[ProtocolSetup] = None,
                  factory=None) -> ClosureResult:
    """Bisection on the stage-3 current driving the crossing velocity to zero.

    Stages 1-2 are integrated once and cached; each iteration re-runs
    only stage 3. A prebuilt ``setup`` (or a ``factory``, e.g. the ideal
    linear field) can be supplied; otherwise both come from ``config``.
    """
    if plan is None:
        plan = default_plan()
    if setup is None:
        if factory is None:
            factory = ChipStageFactory(config, constants, rect_method)
        setup = prepare_protocol(mass, x0, factory, plan, constants, dt,
                                 jac_step, switching)

    I_ref = plan.stages[0].separation_current
    if I_ref is None or I_ref <= 0:
        raise ConfigError("plan stage 1 needs a positive separation current")
    omega_scale = analytic_omega_scale(setup)

    evals = 0

    def residual(I3):
        nonlocal evals
        evals += 1
        return _signed_residual(setup, I3, omega_scale, horizon_factor)

    # Bracketing scan: walk outward from the reference current until the
    # residual changes sign (crossing side is negative, miss side positive).
    step = 0.01 * I_ref
    I_prev = I_ref
    r_prev, s_prev = residual(I_prev)
    best = s_prev if s_prev.crossed else None
    direction = 1.0 if r_prev < 0.0 else -1.0
    bracket = None
    for k in range(1, 41):
        I_next = I_ref + direction * k * step
        if I_next <= 0:
            break
        r_next, s_next = residual(I_next)
        if s_next.crossed and (best is None or abs(s_next.dv_end) < abs(best.dv_end)):
            best = s_next
        if (r_next < 0.0) != (r_prev < 0.0):
            bracket = (I_prev, r_prev, I_next, r_next)
            break
        I_prev, r_prev = I_next, r_next
    if bracket is None:
        raise BracketingError(
            "no sign change of the closure residual within the scanned "
            f"current range around {I_ref} A")
    lo, r_lo, hi, r_hi = bracket
    if lo > hi:
        lo, r_lo, hi, r_hi = hi, r_hi, lo, r_lo
    # orient the bracket so that `near` is the crossing-side end
    crossing_lo = r_lo < 0.0

    # Near the solution the crossing velocity obeys dv^2 = k^2 (I* - I3)
    # (tangency of the separation phase circle with the origin), so dv^2 is
    # linear in the current: extrapolate I* from the two best crossing-side
    # samples and aim just inside it; fall back to bisection whenever the
    # proposal is stale or out of bracket.
    samples = [(lo, r_lo) if crossing_lo else (hi, r_hi)]
    for _ in range(max_iter):
        if best is not None and abs(best.dv_end) < tolerance_dv \
                and abs(best.dx_end) < tolerance_dx:
            break
        proposal = None
        if len(samples) >= 2:
            (i1, d1), (i2, d2) = samples[-2], samples[-1]
            if i1 != i2 and d1 * d1 != d2 * d2:
                k2 = (d1 * d1 - d2 * d2) / (i2 - i1)
                if k2 > 0.0:
                    i_star = i2 + d2 * d2 / k2
                    aim = i_star - (0.5 * tolerance_dv) ** 2 / k2
                    if lo < aim < hi:
                        proposal = aim
        mid = proposal if proposal is not None else 0.5 * (lo + hi)
        r_mid, s_mid = residual(mid)
        if s_mid.crossed:
            samples.append((mid, s_mid.dv_end))
            if best is None or abs(s_mid.dv_end) < abs(best.dv_end):
                best = s_mid
        if (r_mid < 0.0) == crossing_lo:
            lo, r_lo = mid, r_mid
        else:
            hi, r_hi = mid, r_mid
    if best is None or abs(best.dv_end) > tolerance_dv \
            or abs(best.dx_end) > tolerance_dx:
        raise ClosureError(
            f"closure not converged after {evals} stage-3 evaluations "
            f"(best |dv| = {abs(best.dv_end) if best else math.inf:.3e} m/s)")

    eta2 = abs(separation_gradient(setup.factory, setup.plan.stages[2],
                                   current=best.current))
    return ClosureResult(I3=best.current, eta2=eta2, tau3=best.tau3,
                         residual_dx=best.dx_end, residual_dv=best.dv_end,
                         iterations=evals)


def analytic_omega_scale(setup: ProtocolSetup) -> float:
    """Stage frequency used to convert a miss distance into velocity units."""
    return setup.eta1 * setup.constants.gradient_to_omega


__all__ = ["ClosureResult", "closure_residual", "solve_closure"]
