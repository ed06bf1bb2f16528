"""Lattice approximation of piecewise-smooth displacements by piecewise-affine fields.

Freudenthal lattices, edge-basis strain decompositions, discrete bulk and
surface energies, and the good/bad cube construction of the approximants.
"""
from .approximation import ApproxReport, build_vh, classify_cells, run_approximation
from .energies import (continuum_bulk_energy, discrete_bulk_energy, discrete_surface_energy,
                       lp_distance, sigma_measure)
from .fields import CATALOG, TestField, make_field
from .geometry import Box
from .interpolation import DiscreteField, sample_vertices
from .lattice import LatticeSpec, freudenthal_partition
from .symalg import EnergyDirections, default_energy_directions

__version__ = "0.1.0"
