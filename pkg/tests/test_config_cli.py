"""Config parsing and the command-line surface."""

import os

import numpy as np
import pytest

from sgchip.cli import main
from sgchip.config import parse_config
from sgchip.errors import ConfigError
from sgchip.sweeps import (diffusion_length, heating_estimate,
                           sweep_bz_vs_spacing, sweep_gradient_vs_spacing,
                           sweep_size_vs_x0)
from sgchip.model import ChipConfig


# ---------------------------------------------------------------------------
# config parsing

def test_empty_config_gives_device_defaults():
    cfg = parse_config("")
    assert cfg.chip == ChipConfig()
    assert cfg.particle.mass == 1e-19
    assert cfg.x0 == pytest.approx(40e-6)
    assert cfg.stage_current == 10.0
    assert cfg.stage3_current is None
    assert cfg.numeric.dt == 1e-5
    assert cfg.numeric.switching == "event"


def test_partial_override_keeps_other_defaults():
    cfg = parse_config("[chip]\nIL_A=12\n")
    assert cfg.chip.I_L == 12.0
    assert cfg.chip.a == pytest.approx(9e-6)
    assert cfg.chip.B0 == 0.5


def test_full_config_round_trip():
    text = """
    # Fig-5-style scenario with tweaks
    [chip]
    a_um = 9
    b_um = 7
    w_um = 10
    L_um = 200
    l_um = 200
    lsep_um = 2000
    IL_A = 24
    B0_T = 0.5
    [particle]
    mass_kg = 1e-18
    [protocol]
    x0_um = 30
    I_A = 10
    I3_A = 9.99
    [numeric]
    dt_s = 2e-5
    quad_order = 16
    switching = scheduled
    """
    cfg = parse_config(text)
    assert cfg.particle.mass == 1e-18
    assert cfg.x0 == pytest.approx(30e-6)
    assert cfg.stage3_current == 9.99
    assert cfg.numeric.dt == 2e-5
    assert cfg.numeric.quad_order == 16
    assert cfg.numeric.switching == "scheduled"
    assert cfg.plan.stages[2].separation_current == 9.99


@pytest.mark.parametrize("text,needle", [
    ("[particle]\nmass_kg=-1\n", "mass_kg"),
    ("[chip]\na_um=0\n", "a_um"),
    ("[chip]\nbogus=1\n", "bogus"),
    ("[orbit]\nfoo=1\n", "orbit"),
    ("[numeric]\ndt_s=abc\n", "dt_s"),
    ("[numeric]\nswitching=maybe\n", "switching"),
    ("stray=1\n", "stray"),
])
def test_config_errors_name_the_offender(text, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert needle in str(err.value)


def test_config_rejects_overlapping_wires():
    with pytest.raises(ConfigError):
        parse_config("[chip]\na_um=4\n")     # 2a < w


# ---------------------------------------------------------------------------
# sweeps and estimates

def test_gradient_sweep_reference_row_and_scaling():
    rows = sweep_gradient_vs_spacing()
    by_key = {(round(r[0], 6), r[1]): r[2] for r in rows}
    assert by_key[(18.0, 24.0)] == pytest.approx(1.43e5, rel=5e-3)
    assert by_key[(18.0, 12.0)] == pytest.approx(by_key[(18.0, 24.0)] / 2,
                                                 rel=1e-12)
    # eta falls off with spacing
    assert by_key[(40.0, 24.0)] < by_key[(18.0, 24.0)]


def test_bz_sweep_inverse_gradient():
    rows = sweep_bz_vs_spacing()
    grows = sweep_gradient_vs_spacing()
    for (ta, il, bz), (_, _, eta) in zip(rows, grows):
        assert bz == pytest.approx(-1986.24 / eta, rel=1e-3)
    by_key = {(round(r[0], 6), r[1]): r[2] for r in rows}
    assert abs(by_key[(18.0, 24.0)]) < abs(by_key[(18.0, 12.0)])


def test_size_sweep_hierarchy_and_monotonicity():
    rows = sweep_size_vs_x0()
    by_mass = {}
    for mass, x0, dx in rows:
        by_mass.setdefault(mass, []).append((x0, dx))
    assert set(by_mass) == {1e-19, 1e-17, 1e-15}
    for mass, pts in by_mass.items():
        dxs = [d for _, d in sorted(pts)]
        assert all(b > a for a, b in zip(dxs, dxs[1:]))
    at40 = {m: dict(pts)[40.0] for m, pts in by_mass.items()}
    assert at40[1e-19] == pytest.approx(12e-6, rel=0.1)
    assert at40[1e-15] == pytest.approx(1.2e-9, rel=0.1)


def test_heating_estimate_and_diffusion_length():
    R, Q = heating_estimate(24.0, ChipConfig(), 0.1)
    assert R == pytest.approx(0.0976, rel=1e-3)
    assert Q == pytest.approx(5.62, rel=1e-2)
    _, Q0 = heating_estimate(0.0, ChipConfig(), 0.1)
    assert Q0 == 0.0
    assert diffusion_length(0.1) == pytest.approx(2.83e-3, rel=1e-2)


# ---------------------------------------------------------------------------
# CLI

def test_cli_unknown_subcommand_exits_1(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_cli_validation_error_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[particle]\nmass_kg=-1\n")
    assert main(["levitate", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "mass_kg" in capsys.readouterr().err


def test_cli_estimate(tmp_path, capsys):
    assert main(["estimate", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "Q = 5.622 J" in out
    lines = open(tmp_path / "estimate.csv").read().splitlines()
    assert lines[0] == "IL_A,duration_s,R_ohm,Q_J,diffusion_len_m"
    vals = [float(v) for v in lines[1].split(",")]
    assert vals[3] == pytest.approx(5.62, rel=1e-2)
    assert vals[4] == pytest.approx(2.83e-3, rel=1e-2)


def test_cli_sweeps_write_deterministic_csv(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["gradient-sweep", "--out", str(out1)]) == 0
    assert main(["gradient-sweep", "--out", str(out2)]) == 0
    a = open(out1 / "gradient_sweep.csv").read()
    b = open(out2 / "gradient_sweep.csv").read()
    assert a == b
    assert a.splitlines()[0] == "two_a_um,IL_A,etaL_Tpm"
    assert main(["bz-sweep", "--out", str(out1)]) == 0
    assert open(out1 / "bz_sweep.csv").read().splitlines()[0] == \
        "two_a_um,IL_A,Bz_T"
    assert main(["size-sweep", "--out", str(out1)]) == 0
    assert open(out1 / "size_sweep.csv").read().splitlines()[0] == \
        "mass_kg,x0_um,dxmax_m"


def test_cli_levitate(tmp_path, capsys):
    assert main(["levitate", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "z_L" in out
    lines = open(tmp_path / "levitate.csv").read().splitlines()
    header = lines[0].split(",")
    vals = dict(zip(header, [float(v) for v in lines[1].split(",")]))
    assert vals["etaL_Tpm"] == pytest.approx(1.487e5, rel=1e-2)
    assert vals["zL_numeric_m"] == pytest.approx(-0.0899e-6, rel=0.02)
    assert vals["zL_formula_m"] == pytest.approx(vals["zL_numeric_m"], rel=0.01)
    assert vals["Bz_at_zL_T"] == pytest.approx(-0.01336, rel=0.01)


def test_cli_field_map(tmp_path, capsys):
    assert main(["field-map", "--plane", "yz", "--resolution", "21",
                 "--out", str(tmp_path)]) == 0
    text = open(tmp_path / "fieldmap_yz.csv").read()
    assert text.splitlines()[0] == "x_m,y_m,z_m,Bx_T,By_T,Bz_T,Bnorm_T"
    assert "nan" in text     # conductors inside the default window


def test_cli_interferometer_analytic(tmp_path, capsys):
    assert main(["interferometer", "--mode", "analytic",
                 "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "max dx = 1.2066e-05 m" in out
    lines = open(tmp_path / "trajectory_analytic.csv").read().splitlines()
    assert lines[0] == "t_s,x_up_m,v_up_mps,x_dn_m,v_dn_mps,dx_m,dv_mps,stage"
    dx = np.array([float(l.split(",")[5]) for l in lines[1:]])
    assert dx.max() == pytest.approx(1.2066e-5, rel=1e-3)


def test_cli_missing_config_file_exits_1(tmp_path, capsys):
    assert main(["levitate", "--config", str(tmp_path / "nope.cfg"),
                 "--out", str(tmp_path)]) == 1
