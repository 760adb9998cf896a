"""Interior-penalty DG solver for the complex Landau equation."""

from .assembly import IPVariant, assemble_frozen_reaction, assemble_load, assemble_mass, assemble_stiffness
from .evolve import RunConfig, Trajectory, energy_monitor, run, step
from .mesh import Mesh, build_unit_square
from .space import DGSpace

__all__ = [
    "DGSpace",
    "IPVariant",
    "Mesh",
    "RunConfig",
    "Trajectory",
    "assemble_frozen_reaction",
    "assemble_load",
    "assemble_mass",
    "assemble_stiffness",
    "build_unit_square",
    "energy_monitor",
    "run",
    "step",
]

__version__ = "0.1.0"
