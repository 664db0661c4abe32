"""Inverse scattering for three-body Schrödinger operators via Faddeev-type
exponentially growing solutions in a two-cluster channel.

Modules
-------
geometry        cluster coordinates, grids and the inter-cluster potential I_a
subsystem       bound states and thresholds of the cluster Hamiltonian H^a
faddeev_green   the channel Green operator G_ρ and its boundary values
exponential     exponentially growing solutions and their pairings
scattering      discretized two-cluster S-matrix kernels, forward and inverse
reconstruction  recovery of V̂_α(ζ) on the admissible ball
fileio          field blobs, CSV and JSON output
"""
from .exponential import ContractionError, pairing, solve_remainder
from .faddeev_green import AdmissibilityError, GreenOperator, momentum
from .fileio import FormatError, read_field, read_kernels, write_field, write_kernels
from .geometry import ClusterGeometry, GridPair, PotentialSpec, build_grids
from .reconstruction import PlanError, plan_reconstruction, reconstruct_ball
from .scattering import circle_grid, forward_smatrix, invert_smatrix
from .scenario import ConfigError, Problem, default_scenario, load_scenario
from .subsystem import SpectrumError, eigensolve_subsystem

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "ClusterGeometry", "ConfigError", "ContractionError",
    "FormatError", "GreenOperator", "GridPair", "PlanError", "PotentialSpec", "Problem",
    "SpectrumError", "build_grids", "circle_grid", "default_scenario",
    "eigensolve_subsystem", "forward_smatrix", "invert_smatrix", "load_scenario", "momentum",
    "pairing", "plan_reconstruction", "read_field", "read_kernels", "reconstruct_ball",
    "solve_remainder", "write_field", "write_kernels",
]
