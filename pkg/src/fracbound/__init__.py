"""Fractional Dirichlet eigenvalues on planar rasters and inradius-based lower bounds.

Submodules: :mod:`geometry`, :mod:`gagliardo`, :mod:`constants`,
:mod:`capacity`, :mod:`spectral`, :mod:`fatness`, :mod:`pipeline`,
plus :mod:`io` and the ``fracbound`` command line tool.
"""
from . import capacity, constants, fatness, gagliardo, geometry, io, pipeline, spectral
from ._jit import backend, set_backend
from .capacity import capacity as relative_capacity, point_capacity_1d
from .constants import alpha, fourier_A, load_table, morrey_m, theta, zeta_seminorm
from .fatness import fatness_certificate, lambda_k
from .gagliardo import assemble_1d, assemble_2d, interval_mesh
from .geometry import RasterDomain, inradius, project, raster_from_predicate, topology_order
from .pipeline import FamilySpec, build_family, lower_bound_certificate, verify_main_theorem
from .spectral import eigenvalue, rayleigh_upper_bound, smallest_eigenvalue

__version__ = "0.1.0"

__all__ = [
    "capacity", "constants", "fatness", "gagliardo", "geometry", "io", "pipeline", "spectral",
    "backend", "set_backend",
    "relative_capacity", "point_capacity_1d",
    "alpha", "fourier_A", "load_table", "morrey_m", "theta", "zeta_seminorm",
    "fatness_certificate", "lambda_k",
    "assemble_1d", "assemble_2d", "interval_mesh",
    "RasterDomain", "inradius", "project", "raster_from_predicate", "topology_order",
    "FamilySpec", "build_family", "lower_bound_certificate", "verify_main_theorem",
    "eigenvalue", "rayleigh_upper_bound", "smallest_eigenvalue",
]
