"""Render plots from the simulator's CSV outputs.

Strictly read-only over the CSVs: nothing here recomputes physics. Each
figure id names the CSV files it needs; ``render_figs <data_dir>``
renders every figure whose inputs are present.

Stage colouring in the trajectory panels is blue / red / green for
stages 1 / 2 / 3.
"""

import argparse
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


class RenderError(RuntimeError):
    """Missing file, missing column, or empty input."""


STAGE_COLORS = {1: "tab:blue", 2: "tab:red", 3: "tab:green"}

# preference order: plot the simulated trajectory when it exists
TRAJECTORY_SOURCES = ("trajectory_numeric.csv", "trajectory_analytic.csv")


def load_columns(path, *required):
    """CSV as a dict of named float columns; loud errors on bad input."""
    if not os.path.exists(path):
        raise RenderError(f"missing input file: {path}")
    with open(path) as fh:
        header = fh.readline().strip()
        body = fh.read()
    names = header.split(",") if header else []
    missing = [c for c in required if c not in names]
    if missing:
        raise RenderError(f"{path} lacks column(s) {missing}; has {names}")
    if not body.strip():
        raise RenderError(f"{path} has a header but no data rows")
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    if data.shape[1] != len(names):
        raise RenderError(f"{path}: ragged rows ({data.shape[1]} fields, "
                          f"{len(names)} names)")
    return {n: data[:, i] for i, n in enumerate(names)}


def _trajectory_path(data_dir):
    for name in TRAJECTORY_SOURCES:
        p = os.path.join(data_dir, name)
        if os.path.exists(p):
            return p
    raise RenderError(f"no trajectory CSV in {data_dir} "
                      f"(looked for {TRAJECTORY_SOURCES})")


def _save(fig, out_path):
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path


def _heatmap(ax, cols, title):
    x = cols["x_m"] * 1e6
    y = cols["y_m"] * 1e6
    z = cols["z_m"] * 1e6
    norm = cols["Bnorm_T"]
    # row-major square grid; infer the plane from which coordinate varies
    n = int(round(np.sqrt(len(norm))))
    if np.ptp(x) < 1e-30:          # yz slice
        u, v, ulab, vlab = y, z, "y (um)", "z (um)"
    else:                          # xy slice
        u, v, ulab, vlab = x, y, "x (um)", "y (um)"
    U = u.reshape(n, n)
    V = v.reshape(n, n)
    N = norm.reshape(n, n)
    pm = ax.pcolormesh(U, V, np.ma.masked_invalid(N), shading="nearest",
                       cmap="viridis")
    ax.set_xlabel(ulab)
    ax.set_ylabel(vlab)
    ax.set_title(title)
    ax.set_aspect("equal")
    return pm


def fig2a(data_dir, out_path):
    """|B| of the levitation assembly alone in the y-z plane."""
    cols = load_columns(os.path.join(data_dir, "fieldmap_yz_levitation.csv"),
                        "x_m", "y_m", "z_m", "Bnorm_T")
    fig, ax = plt.subplots(figsize=(5, 4.2))
    pm = _heatmap(ax, cols, "levitation assembly |B|")
    fig.colorbar(pm, ax=ax, label="|B| (T)")
    return _save(fig, out_path)


def fig2c(data_dir, out_path):
    """Vertical force balance along the trap axis; zero crossing = z_L."""
    cols = load_columns(os.path.join(data_dir, "levitation_profile.csv"),
                        "z_m", "az_mps2")
    z = cols["z_m"] * 1e6
    az = cols["az_mps2"]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(z, az, color="tab:blue")
    ax.axhline(0.0, color="k", lw=0.8)
    sign_change = np.where(np.diff(np.sign(az)) < 0)[0]
    if len(sign_change):
        i = sign_change[0]
        z0 = np.interp(0.0, [az[i + 1], az[i]], [z[i + 1], z[i]])
        ax.axvline(z0, color="tab:red", ls="--", lw=0.8)
        ax.annotate(f"z_L = {z0:.4f} um", (z0, 0.0),
                    textcoords="offset points", xytext=(8, 10))
    ax.set_xlabel("z (um)")
    ax.set_ylabel("vertical acceleration (m/s$^2$)")
    ax.set_title("levitation force balance on the trap axis")
    return _save(fig, out_path)


def fig3ab(data_dir, out_path):
    """Full-device |B| maps: y-z slice and x-y slice."""
    yz = load_columns(os.path.join(data_dir, "fieldmap_yz.csv"),
                      "x_m", "y_m", "z_m", "Bnorm_T")
    xy = load_columns(os.path.join(data_dir, "fieldmap_xy.csv"),
                      "x_m", "y_m", "z_m", "Bnorm_T")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.5, 4.2))
    pm1 = _heatmap(ax1, yz, "total |B|, y-z slice")
    fig.colorbar(pm1, ax=ax1, label="|B| (T)")
    pm2 = _heatmap(ax2, xy, "total |B|, x-y slice")
    fig.colorbar(pm2, ax=ax2, label="|B| (T)")
    return _save(fig, out_path)


def _family_plot(cols, ykey, ylabel, title, out_path, yscale=None):
    two_a = cols["two_a_um"]
    il = cols["IL_A"]
    y = cols[ykey]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    styles = ["-", "--", ":", "-."]
    for k, cur in enumerate(sorted(set(il), reverse=True)):
        sel = il == cur
        order = np.argsort(two_a[sel])
        ax.plot(two_a[sel][order], y[sel][order], styles[k % 4],
                color="k", label=f"I_L = {cur:g} A")
    ax.set_xlabel("2a (um)")
    ax.set_ylabel(ylabel)
    if yscale:
        ax.set_yscale(yscale)
    ax.set_title(title)
    ax.legend()
    return _save(fig, out_path)


def fig_gradient(data_dir, out_path):
    """Central levitation gradient vs horizontal wire spacing."""
    cols = load_columns(os.path.join(data_dir, "gradient_sweep.csv"),
                        "two_a_um", "IL_A", "etaL_Tpm")
    return _family_plot(cols, "etaL_Tpm", "eta_L (T/m)",
                        "levitation gradient vs spacing", out_path)


def fig_bz(data_dir, out_path):
    """Residual vertical field at the levitation height vs spacing."""
    cols = load_columns(os.path.join(data_dir, "bz_sweep.csv"),
                        "two_a_um", "IL_A", "Bz_T")
    return _family_plot(cols, "Bz_T", "B_z(z_L) (T)",
                        "residual field at z_L vs spacing", out_path)


def _potential_panel(data_dir, out_path, stages, title):
    cols = load_columns(os.path.join(data_dir, "potentials.csv"), "x_m",
                        "U1_up_J", "U1_dn_J", "U2_up_J", "U2_dn_J",
                        "U3_up_J", "U3_dn_J")
    x = cols["x_m"] * 1e6
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for stage in stages:
        c = STAGE_COLORS[stage]
        ax.plot(x, cols[f"U{stage}_up_J"], "-", color=c,
                label=f"stage {stage}, up")
        ax.plot(x, cols[f"U{stage}_dn_J"], "--", color=c,
                label=f"stage {stage}, down")
    ax.set_xlabel("x (um)")
    ax.set_ylabel("U (J)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, out_path)


def fig5a(data_dir, out_path):
    """Branch potentials in the splitting stage."""
    return _potential_panel(data_dir, out_path, [1],
                            "stage-1 potentials (split)")


def fig5b(data_dir, out_path):
    """Branch potentials in the turning and recombination stages."""
    return _potential_panel(data_dir, out_path, [2, 3],
                            "stage-2/3 potentials (turn, recombine)")


def _stage_curves(ax, t, y_up, y_dn, stage):
    for s in (1, 2, 3):
        sel = stage == s
        if not np.any(sel):
            continue
        ax.plot(t[sel], y_up[sel], "-", color=STAGE_COLORS[s])
        ax.plot(t[sel], y_dn[sel], "--", color=STAGE_COLORS[s])


def fig5c(data_dir, out_path):
    """Branch trajectories x(t), one colour per stage."""
    cols = load_columns(_trajectory_path(data_dir), "t_s", "x_up_m", "x_dn_m",
                        "stage")
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    _stage_curves(ax, cols["t_s"], cols["x_up_m"] * 1e6,
                  cols["x_dn_m"] * 1e6, cols["stage"])
    ax.set_xlabel("t (s)")
    ax.set_ylabel("x (um)")
    ax.set_title("branch trajectories (solid: up, dashed: down)")
    return _save(fig, out_path)


def fig5d(data_dir, out_path):
    """Branch velocities v(t), one colour per stage."""
    cols = load_columns(_trajectory_path(data_dir), "t_s", "v_up_mps",
                        "v_dn_mps", "stage")
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    _stage_curves(ax, cols["t_s"], cols["v_up_mps"] * 1e3,
                  cols["v_dn_mps"] * 1e3, cols["stage"])
    ax.set_xlabel("t (s)")
    ax.set_ylabel("v (mm/s)")
    ax.set_title("branch velocities (solid: up, dashed: down)")
    return _save(fig, out_path)


def fig5e(data_dir, out_path):
    """Separation dx(t), one colour per stage."""
    cols = load_columns(_trajectory_path(data_dir), "t_s", "dx_m", "stage")
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    t = cols["t_s"]
    dx = cols["dx_m"] * 1e6
    stage = cols["stage"]
    for s in (1, 2, 3):
        sel = stage == s
        if np.any(sel):
            ax.plot(t[sel], dx[sel], "-", color=STAGE_COLORS[s],
                    label=f"stage {s}")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("separation (um)")
    ax.set_title("branch separation")
    ax.legend()
    return _save(fig, out_path)


def fig6(data_dir, out_path):
    """Peak separation vs release point, one curve per mass (log y)."""
    cols = load_columns(os.path.join(data_dir, "size_sweep.csv"),
                        "mass_kg", "x0_um", "dxmax_m")
    fig, ax = plt.subplots(figsize=(5, 3.8))
    for mass in sorted(set(cols["mass_kg"])):
        sel = cols["mass_kg"] == mass
        order = np.argsort(cols["x0_um"][sel])
        ax.plot(cols["x0_um"][sel][order], cols["dxmax_m"][sel][order] * 1e6,
                label=f"m = {mass:.0e} kg")
    ax.set_yscale("log")
    ax.set_xlabel("release offset x0 (um)")
    ax.set_ylabel("peak separation (um)")
    ax.set_title("maximum separation vs release point")
    ax.legend()
    return _save(fig, out_path)


FIGURES = {
    "fig2a": (fig2a, ["fieldmap_yz_levitation.csv"]),
    "fig2c": (fig2c, ["levitation_profile.csv"]),
    "fig3ab": (fig3ab, ["fieldmap_yz.csv", "fieldmap_xy.csv"]),
    "fig_gradient": (fig_gradient, ["gradient_sweep.csv"]),
    "fig_bz": (fig_bz, ["bz_sweep.csv"]),
    "fig5a": (fig5a, ["potentials.csv"]),
    "fig5b": (fig5b, ["potentials.csv"]),
    "fig5c": (fig5c, list(TRAJECTORY_SOURCES)),
    "fig5d": (fig5d, list(TRAJECTORY_SOURCES)),
    "fig5e": (fig5e, list(TRAJECTORY_SOURCES)),
    "fig6": (fig6, ["size_sweep.csv"]),
}


def _inputs_present(data_dir, inputs):
    if inputs is FIGURES["fig5c"][1] or set(inputs) == set(TRAJECTORY_SOURCES):
        return any(os.path.exists(os.path.join(data_dir, n)) for n in inputs)
    return all(os.path.exists(os.path.join(data_dir, n)) for n in inputs)


def render(fig_id, data_dir, out_path):
    """Render one figure id from the CSVs in data_dir."""
    if fig_id not in FIGURES:
        raise RenderError(f"unknown figure id {fig_id!r}; "
                          f"known: {sorted(FIGURES)}")
    fn, _ = FIGURES[fig_id]
    return fn(data_dir, out_path)


def render_all(data_dir, out_dir, only=None):
    """Render every figure whose inputs exist (or the requested subset).
    Returns {fig_id: output path}."""
    wanted = [only] if only else sorted(FIGURES)
    done = {}
    for fig_id in wanted:
        if fig_id not in FIGURES:
            raise RenderError(f"unknown figure id {fig_id!r}")
        fn, inputs = FIGURES[fig_id]
        if not _inputs_present(data_dir, inputs):
            if only:
                raise RenderError(
                    f"{fig_id} needs {inputs} in {data_dir}")
            continue
        done[fig_id] = fn(data_dir, os.path.join(out_dir, f"{fig_id}.png"))
    return done


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figs",
        description="Render figures from simulator CSV outputs")
    parser.add_argument("data_dir", help="directory holding the CSVs")
    parser.add_argument("--out", default=None,
                        help="output directory (default: <data_dir>/figs)")
    parser.add_argument("--only", default=None, help="render a single figure id")
    args = parser.parse_args(argv)
    out_dir = args.out or os.path.join(args.data_dir, "figs")
    try:
        done = render_all(args.data_dir, out_dir, only=args.only)
    except RenderError as exc:
        print(f"render_figs: {exc}", file=sys.stderr)
        return 1
    for fig_id, path in sorted(done.items()):
        print(f"{fig_id}: {path}")
    if not done:
        print("render_figs: no figure inputs found", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
