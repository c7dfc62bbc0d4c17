"""Desk-scale numerics for level-set (De Giorgi) regularity arguments on the periodic box.

Submodules: ``grid`` (fields and quadrature), ``solver`` (pseudo-spectral
Navier-Stokes), ``pressure`` (Riesz multipliers), ``degiorgi`` (truncations
and level energies), ``iteration`` (the nonlinear recurrence), ``gronwall``,
``criteria`` and ``harness``.
"""

from .grid import GridSpec, Trajectory, VelocityField, leray_project, make_field, random_field, taylor_green
from .solver import SolverConfig, simulate, step

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "SolverConfig",
    "Trajectory",
    "VelocityField",
    "leray_project",
    "make_field",
    "random_field",
    "simulate",
    "step",
    "taylor_green",
]
