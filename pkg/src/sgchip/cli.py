"""Command-line entry point.

Every subcommand reads an optional ``--config`` file, writes its CSV
output into ``--out`` and prints a one-line summary. Exit codes: 0 on
success, 1 on a configuration/usage error, 2 on a numerical failure.
"""

import argparse
import os
import sys
from typing import Optional

import numpy as np

from . import analytic, sweeps
from .closure import solve_closure
from .config import RunConfig, load_config
from .csvio import write_rows
from .dynamics import (ChipStageFactory, find_equilibrium,
                       run_interferometer_numeric, separation_gradient)
from .errors import ConfigError, NumericalError, SimulationError
from .magnetostatics import eta_S_thin, field_jacobian, field_map
from .model import default_plan


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (validation error) instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_common(p):
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--out", default="out", help="output directory")


def _out_path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return os.path.join(cfg.output_dir, name)


def cmd_field_map(cfg: RunConfig, args) -> int:
    from .magnetostatics import FieldModel
    from .model import build_levitation_assembly, build_separation_assembly
    lev = build_levitation_assembly(cfg.chip)
    sep = build_separation_assembly(cfg.chip, cfg.plan.stages[0])
    if args.assembly == "levitation":
        model = FieldModel(lev, (), B0=0.0, constants=cfg.constants)
    elif args.assembly == "separation":
        model = FieldModel((), sep, B0=cfg.chip.B0, constants=cfg.constants)
    else:
        model = FieldModel(lev, sep, B0=cfg.chip.B0, constants=cfg.constants)
    extent = args.extent_um * 1e-6 if args.extent_um else \
        (20e-6 if args.plane == "yz" else 400e-6)
    fm = field_map(args.plane, args.offset_um * 1e-6, extent,
                   args.resolution, model)
    suffix = "" if args.assembly == "all" else f"_{args.assembly}"
    path = fm.write_csv(_out_path(cfg, f"fieldmap_{args.plane}{suffix}.csv"))
    norm = fm.norm
    finite = np.isfinite(norm)
    imin = int(np.argmin(np.where(finite, norm, np.inf)))
    p = fm.points[imin]
    print(f"field-map {args.plane}/{args.assembly}: {path} "
          f"({args.resolution}x{args.resolution}), "
          f"min |B| = {norm[imin]:.6g} T at ({p[0]*1e6:.1f}, {p[1]*1e6:.1f}, "
          f"{p[2]*1e6:.1f}) um")
    return 0


def cmd_gradient_sweep(cfg: RunConfig, args) -> int:
    rows = sweeps.sweep_gradient_vs_spacing(b=cfg.chip.b,
                                            constants=cfg.constants)
    path = write_rows(_out_path(cfg, "gradient_sweep.csv"),
                      "two_a_um,IL_A,etaL_Tpm", rows)
    print(f"gradient-sweep: {path} ({len(rows)} rows)")
    return 0


def cmd_bz_sweep(cfg: RunConfig, args) -> int:
    rows = sweeps.sweep_bz_vs_spacing(b=cfg.chip.b, constants=cfg.constants)
    path = write_rows(_out_path(cfg, "bz_sweep.csv"), "two_a_um,IL_A,Bz_T",
                      rows)
    print(f"bz-sweep: {path} ({len(rows)} rows)")
    return 0


def cmd_levitate(cfg: RunConfig, args) -> int:
    factory = ChipStageFactory(cfg.chip, cfg.constants)
    model = factory.model(cfg.plan.stages[0])
    J = field_jacobian(np.zeros(3), model, step=cfg.numeric.jac_step)
    eta_L = float(J[2, 2])
    eta_S = float(J[0, 0])
    tp = analytic.trap_params(eta_L, eta_S, cfg.constants)
    z_num = find_equilibrium(model, constants=cfg.constants,
                             jac_step=cfg.numeric.jac_step)
    dz = analytic.ground_state_width(cfg.particle.mass, tp.omega_z,
                                     cfg.constants)
    dy = analytic.ground_state_width(cfg.particle.mass, tp.omega_y,
                                     cfg.constants)
    path = write_rows(
        _out_path(cfg, "levitate.csv"),
        "etaL_Tpm,etaS_Tpm,omega_x_radps,omega_y_radps,omega_z_radps,"
        "zL_formula_m,zL_numeric_m,Bz_at_zL_T,width_y_m,width_z_m",
        [[tp.eta_L, tp.eta_S, tp.omega_x, tp.omega_y, tp.omega_z,
          tp.z_L, z_num, tp.Bz_at_zL, dy, dz]])
    # vertical force-balance profile along the trap axis (for plotting)
    from .dynamics import acceleration_batch
    z_grid = np.linspace(-0.25e-6, 0.0, 251)
    pts = np.column_stack([np.zeros_like(z_grid), np.zeros_like(z_grid), z_grid])
    az = acceleration_batch(pts, np.zeros_like(z_grid), model,
                            cfg.particle.mass, cfg.constants,
                            cfg.numeric.jac_step)[:, 2]
    Bn = np.linalg.norm(model.evaluate(pts), axis=1)
    write_rows(_out_path(cfg, "levitation_profile.csv"),
               "z_m,az_mps2,Bnorm_T",
               np.column_stack([z_grid, az, Bn]))
    print(f"levitate: {path}; etaL = {eta_L:.4e} T/m, "
          f"z_L = {z_num*1e6:.5f} um (formula {tp.z_L*1e6:.5f} um), "
          f"B_z(z_L) = {tp.Bz_at_zL:.4e} T, omega_z = {tp.omega_z:.4e} rad/s")
    return 0


def _write_potentials(cfg: RunConfig, eta1: float, eta2: float):
    """U(x) per branch for each stage's linear field, for plotting."""
    x = np.linspace(-1.5 * cfg.x0, 1.5 * cfg.x0, 241)
    m = cfg.particle.mass
    cols = [x]
    for eta_signed in (-eta1, +eta1, -eta2):
        for s_x in (+1, -1):
            cols.append(analytic.stage_potential(x, eta_signed, cfg.chip.B0,
                                                 m, s_x, cfg.constants))
    write_rows(_out_path(cfg, "potentials.csv"),
               "x_m,U1_up_J,U1_dn_J,U2_up_J,U2_dn_J,U3_up_J,U3_dn_J",
               np.column_stack(cols))


def cmd_interferometer(cfg: RunConfig, args) -> int:
    if args.mode == "analytic":
        eta1 = eta_S_thin(cfg.chip.L, cfg.stage_current, cfg.constants)
        eta2 = eta1 if cfg.stage3_current is None else \
            eta1 * cfg.stage3_current / cfg.stage_current
        proto = analytic.analytic_protocol(cfg.particle.mass, cfg.x0, eta1,
                                           cfg.chip.B0, eta2, cfg.constants)
        path = proto.write_csv(_out_path(cfg, "trajectory_analytic.csv"))
        _write_potentials(cfg, eta1, eta2)
        print(f"interferometer analytic: {path}; max dx = {proto.dx_peak:.4e} m "
              f"at t = {proto.t_peak:.4e} s, loop closes at tau3 = "
              f"{proto.tau3:.4e} s")
        return 0
    res = run_interferometer_numeric(
        cfg.particle.mass, cfg.x0, cfg.chip, cfg.plan, cfg.constants,
        dt=cfg.numeric.dt, jac_step=cfg.numeric.jac_step,
        switching=cfg.numeric.switching, stage3_current=cfg.stage3_current,
        horizon_factor=cfg.numeric.horizon_factor)
    path = res.write_csv(_out_path(cfg, "trajectory_numeric.csv"),
                         sample_every=cfg.numeric.sample_every)
    eta2 = res.stage3.current / cfg.stage_current * res.setup.eta1
    _write_potentials(cfg, res.setup.eta1, eta2)
    closed = "closed" if res.stage3.crossed else "did NOT close"
    print(f"interferometer numeric: {path}; max dx = {res.max_dx:.4e} m, "
          f"loop {closed} at tau3 = {res.tau3:.4e} s "
          f"(dx = {res.stage3.dx_end:.2e} m, dv = {res.stage3.dv_end:.2e} m/s), "
          f"max |y| = {res.max_abs_y:.2e} m, max |z - zL| = {res.max_abs_dz:.2e} m")
    return 0


def cmd_size_sweep(cfg: RunConfig, args) -> int:
    eta1 = eta_S_thin(cfg.chip.L, cfg.stage_current, cfg.constants)
    rows = sweeps.sweep_size_vs_x0(eta1=eta1, B0=cfg.chip.B0,
                                   constants=cfg.constants)
    path = write_rows(_out_path(cfg, "size_sweep.csv"),
                      "mass_kg,x0_um,dxmax_m", rows)
    print(f"size-sweep: {path} ({len(rows)} rows)")
    return 0


def cmd_close_loop(cfg: RunConfig, args) -> int:
    result = solve_closure(
        cfg.chip, cfg.particle.mass, cfg.x0, cfg.plan,
        tolerance_dx=cfg.numeric.tol_dx, tolerance_dv=cfg.numeric.tol_dv,
        max_iter=cfg.numeric.max_iter, constants=cfg.constants,
        dt=cfg.numeric.dt, jac_step=cfg.numeric.jac_step,
        switching=cfg.numeric.switching,
        horizon_factor=cfg.numeric.horizon_factor)
    path = result.write_csv(_out_path(cfg, "closure.csv"))
    print(f"close-loop: {path}; I3 = {result.I3:.5f} A "
          f"(eta2 = {result.eta2:.4f} T/m), tau3 = {result.tau3:.5e} s, "
          f"|dx| = {abs(result.residual_dx):.2e} m, "
          f"|dv| = {abs(result.residual_dv):.2e} m/s, "
          f"{result.iterations} evaluations")
    return 0


def cmd_estimate(cfg: RunConfig, args) -> int:
    R, Q = sweeps.heating_estimate(cfg.chip.I_L, cfg.chip, args.duration_s,
                                   cfg.constants)
    ell = sweeps.diffusion_length(args.duration_s, cfg.constants)
    path = write_rows(_out_path(cfg, "estimate.csv"),
                      "IL_A,duration_s,R_ohm,Q_J,diffusion_len_m",
                      [[cfg.chip.I_L, args.duration_s, R, Q, ell]])
    print(f"estimate: {path}; R = {R:.4f} Ohm, Q = {Q:.3f} J over "
          f"{args.duration_s} s, diffusion length = {ell*1e3:.2f} mm")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="sgchip",
                     description="Chip levitation / splitting simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field-map", parents=[], help="sample |B| on a plane")
    _add_common(p)
    p.add_argument("--plane", choices=["yz", "xy"], default="yz")
    p.add_argument("--offset-um", type=float, default=0.0,
                   help="plane offset (x for yz, z for xy), micrometres")
    p.add_argument("--extent-um", type=float, default=None,
                   help="half-width of the window, micrometres")
    p.add_argument("--resolution", type=int, default=81)
    p.add_argument("--assembly", choices=["all", "levitation", "separation"],
                   default="all",
                   help="which wires to energise (bias only with 'all'/'separation')")
    p.set_defaults(func=cmd_field_map)

    p = sub.add_parser("gradient-sweep", help="levitation gradient vs spacing")
    _add_common(p)
    p.set_defaults(func=cmd_gradient_sweep)

    p = sub.add_parser("bz-sweep", help="residual B_z at z_L vs spacing")
    _add_common(p)
    p.set_defaults(func=cmd_bz_sweep)

    p = sub.add_parser("levitate", help="trap parameters and levitation height")
    _add_common(p)
    p.set_defaults(func=cmd_levitate)

    p = sub.add_parser("interferometer", help="run the three-stage protocol")
    _add_common(p)
    p.add_argument("--mode", choices=["analytic", "numeric"],
                   default="analytic")
    p.set_defaults(func=cmd_interferometer)

    p = sub.add_parser("size-sweep", help="peak separation vs release point")
    _add_common(p)
    p.set_defaults(func=cmd_size_sweep)

    p = sub.add_parser("close-loop", help="solve the stage-3 closure current")
    _add_common(p)
    p.set_defaults(func=cmd_close_loop)

    p = sub.add_parser("estimate", help="Joule heating and thermal diffusion")
    _add_common(p)
    p.add_argument("--duration-s", type=float, default=0.1)
    p.set_defaults(func=cmd_estimate)

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config, output_dir=args.out)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"sgchip: configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"sgchip: numerical failure: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"sgchip: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
