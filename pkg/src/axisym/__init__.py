"""axisym: energy minimization and symmetry certification for vector fields
on surfaces of revolution."""

from . import cli, energy, fields, geometry, solvers, verify  # noqa: F401

__version__ = "0.1.0"
