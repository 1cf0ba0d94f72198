"""Discrete nonlocal phase-transition energies: operators, minimizers and experiments."""

__version__ = "0.1.0"

from .grid import Field, Grid, build_grid, sample_field  # noqa: F401
from .kernels import KernelSpec, apply_operator, assemble_operator  # noqa: F401
from .energy import (  # noqa: F401
    EnergyProblem,
    Modulation,
    Potential,
    checkerboard,
    constant_modulation,
    cosine_modulation,
    double_well,
    multiwell_periodic,
    rescaled_energy,
    total_energy,
)
from .minimize import MinimizeOptions, minimize  # noqa: F401
