"""Device description: constants, geometry validation, assembly builders."""

import pytest

from sgchip.constants import PhysicalConstants, DEFAULT_CONSTANTS
from sgchip.errors import ConfigError
from sgchip.model import (ChipConfig, EndRule, Particle, SpinBranch,
                          StageSpec, WireModel, build_levitation_assembly,
                          build_separation_assembly, default_plan,
                          thin_levitation_assembly)


def test_default_constants_signs():
    c = DEFAULT_CONSTANTS
    assert c.chi_rho < 0
    assert c.gamma_e < 0
    assert c.mu0 == 1.2566e-6
    assert c.hbar == 1.05e-34
    assert c.gamma_e == -1.8e11
    assert c.chi_rho == -6.2e-9
    assert c.g == 9.8
    assert c.D == 2.8e9


@pytest.mark.parametrize("field,value", [
    ("chi_rho", 1e-9), ("gamma_e", 1e11), ("mu0", -1.0), ("g", 0.0),
])
def test_constants_reject_bad_signs(field, value):
    with pytest.raises(ConfigError):
        PhysicalConstants(**{field: value})


def test_particle_requires_positive_mass():
    with pytest.raises(ConfigError):
        Particle(mass=-1e-19)
    p = Particle(mass=1e-19, spin_branch=SpinBranch.UP)
    assert p.spin_branch.s_x == 1
    assert SpinBranch.DOWN.s_x == -1
    assert SpinBranch.NEUTRAL.s_x == 0


def test_default_chip_matches_device_numbers():
    cfg = ChipConfig()
    assert cfg.a == pytest.approx(9e-6)
    assert cfg.b == pytest.approx(7e-6)
    assert cfg.w == pytest.approx(10e-6)
    assert cfg.L == pytest.approx(200e-6)
    assert cfg.I_L == 24.0
    assert cfg.B0 == 0.5


def test_chip_overlap_rejected():
    with pytest.raises(ConfigError):
        ChipConfig(a=5e-6)          # 2a == w
    with pytest.raises(ConfigError):
        ChipConfig(b=4e-6)          # 2b < w
    with pytest.raises(ConfigError):
        ChipConfig(L=-1e-6)


def test_levitation_assembly_table():
    cfg = ChipConfig()
    wires = build_levitation_assembly(cfg)
    assert [w.model for w in wires] == [WireModel.RECT_X] * 4
    a, b = cfg.a, cfg.b
    assert [w.center for w in wires] == [(a, b), (-a, b), (-a, -b), (a, -b)]
    assert [w.current for w in wires] == [-24.0, 24.0, -24.0, 24.0]
    assert all(w.half_width == cfg.w / 2 for w in wires)
    assert sum(w.current for w in wires) == 0.0


def test_levitation_zero_current():
    wires = build_levitation_assembly(ChipConfig(I_L=0.0))
    assert all(w.current == 0.0 for w in wires)


def test_separation_assembly_stage_signs():
    cfg = ChipConfig()
    plan = default_plan(10.0, closure_current=9.99)
    s1 = build_separation_assembly(cfg, plan.stages[0])
    s2 = build_separation_assembly(cfg, plan.stages[1])
    s3 = build_separation_assembly(cfg, plan.stages[2])
    L = cfg.L
    assert [w.center for w in s1] == [(L, L), (-L, L), (-L, -L), (L, -L)]
    assert [w.current for w in s1] == [-10.0, 10.0, -10.0, 10.0]
    assert [w.current for w in s2] == [10.0, -10.0, 10.0, -10.0]
    assert [w.current for w in s3] == [-9.99, 9.99, -9.99, 9.99]
    assert all(w.model is WireModel.THIN_FINITE_Z for w in s1)
    assert all(w.half_length == cfg.sep_half_length for w in s1)
    for s in (s1, s2, s3):
        assert sum(w.current for w in s) == 0.0


def test_separation_needs_solved_current():
    plan = default_plan(10.0)
    assert plan.stages[2].separation_current is None
    with pytest.raises(ConfigError):
        build_separation_assembly(ChipConfig(), plan.stages[2])


def test_builders_are_deterministic():
    cfg = ChipConfig()
    assert build_levitation_assembly(cfg) == build_levitation_assembly(cfg)
    st = default_plan().stages[0]
    assert build_separation_assembly(cfg, st) == build_separation_assembly(cfg, st)


def test_thin_levitation_assembly_mirrors_rect_layout():
    cfg = ChipConfig()
    thin = thin_levitation_assembly(cfg)
    rect = build_levitation_assembly(cfg)
    assert [w.center for w in thin] == [w.center for w in rect]
    assert [w.current for w in thin] == [w.current for w in rect]
    assert all(w.model is WireModel.THIN_INFINITE and w.axis == "x" for w in thin)


def test_default_plan_structure():
    plan = default_plan()
    assert [s.eta_sign for s in plan.stages] == [-1, 1, -1]
    assert [s.end_rule for s in plan.stages] == [
        EndRule.MIDPOINT_CROSSES_ZERO,
        EndRule.SEPARATION_RETURNS_TO_INITIAL,
        EndRule.CLOSURE,
    ]
    with pytest.raises(ConfigError):
        StageSpec(2, 10.0, EndRule.CLOSURE)
    with pytest.raises(ConfigError):
        StageSpec(1, 10.0, EndRule.SCHEDULED)   # needs a duration
