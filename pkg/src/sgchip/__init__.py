"""Chip-based magnetic levitation and spin-dependent splitting simulator.

Subpackage map:

* ``constants``       physical constants (SI, signed)
* ``model``           particle, chip geometry, wire assemblies, stage plans
* ``magnetostatics``  wire fields, Jacobians, gradient formulas, field maps
* ``analytic``        closed-form trap parameters and stage solutions
* ``dynamics``        RK4 trajectories through the simulated field
* ``closure``         stage-3 current solve for loop recombination
* ``config`` / ``sweeps`` / ``cli``   experiment orchestration
"""

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .model import (ChipConfig, Particle, SpinBranch, StagePlan, StageSpec,
                    WireModel, WireSegment, default_plan)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONSTANTS", "PhysicalConstants", "ChipConfig", "Particle",
    "SpinBranch", "StagePlan", "StageSpec", "WireModel", "WireSegment",
    "default_plan", "__version__",
]
