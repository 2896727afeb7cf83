"""Spectral shape correspondence with commutativity-based penalty masks.

The package computes maps between triangle meshes in truncated
Laplace-Beltrami eigenbases: descriptors are projected onto each basis,
a map matrix is fit by convex least squares under a structural penalty
mask, and the result is converted to a vertex-to-vertex correspondence.
The headline mask penalizes non-commutativity with the resolvent of the
Laplacian, whose spectral decay keeps the penalty bounded where the raw
Laplacian commutator diverges.
"""

from .errors import (ConfigError, ConvergenceError, DegenerateSpectrumError,
                     DimensionError, InvalidResolventPoint, NotRescaledError,
                     NumericalError, ParseError, SolverError, SpecmatchError,
                     ValidationError)
from .mesh import (TriangleMesh, face_areas, load_mesh, rescale_to_area,
                   save_mesh, surface_area)
from .shapes import (bumpy_icosphere, icosphere, reflection_map, ring_torus,
                     tetrahedron)
from .spectral import (AnalyticSpectrum, SpectralDecomposition,
                       cotangent_laplacian, decompose_mesh, eigendecompose,
                       hs_partial_sum, load_decomposition, rescale_spectra,
                       save_decomposition, sphere_spectrum, torus_spectrum,
                       weyl_estimate)
from .descriptors import (DescriptorCoefficients, DescriptorSet,
                          export_descriptors, import_descriptors,
                          landmark_wks, mult_operator, normalize_columns,
                          project, subsample, wks)
from .masks import (Mask, heat_mask, mask_penalty, normalize_mask,
                    resolvent_eigenvalues, resolvent_mask, slanted_mask,
                    standard_mask)
from .fmap import (EnergyProblem, FunctionalMap, commutator_energy,
                   energy_gradient, energy_terms, energy_value,
                   load_functional_map, normalize_weights,
                   save_functional_map, solve,
                   sphere_torus_commutator_series)
from .p2p import (PointwiseMap, fmap_to_pointwise, icp_refine,
                  load_pointwise_map, pointwise_to_fmap, save_pointwise_map)
from .eval import (GeodesicProvider, GeodesicTable, correlation_experiment,
                   direct_error, geodesic_distances, per_vertex_error)
from .render import write_line_plot, write_pgm, write_scatter_plot

__version__ = "0.1.0"

__all__ = [
    "AnalyticSpectrum", "ConfigError", "ConvergenceError",
    "DegenerateSpectrumError", "DescriptorCoefficients", "DescriptorSet",
    "DimensionError", "EnergyProblem", "FunctionalMap", "GeodesicProvider",
    "GeodesicTable", "InvalidResolventPoint", "Mask", "NotRescaledError",
    "NumericalError", "ParseError", "PointwiseMap", "SolverError",
    "SpecmatchError", "SpectralDecomposition", "TriangleMesh",
    "ValidationError", "bumpy_icosphere", "commutator_energy",
    "correlation_experiment", "cotangent_laplacian", "decompose_mesh",
    "direct_error", "eigendecompose", "energy_gradient", "energy_terms",
    "energy_value", "export_descriptors", "face_areas", "fmap_to_pointwise",
    "geodesic_distances", "heat_mask", "hs_partial_sum", "icosphere",
    "icp_refine", "import_descriptors", "landmark_wks", "load_decomposition",
    "load_functional_map", "load_mesh", "load_pointwise_map", "mask_penalty",
    "mult_operator", "normalize_columns", "normalize_mask",
    "normalize_weights", "per_vertex_error", "pointwise_to_fmap", "project",
    "reflection_map", "rescale_spectra", "rescale_to_area",
    "resolvent_eigenvalues", "resolvent_mask", "ring_torus",
    "save_decomposition", "save_functional_map", "save_mesh",
    "save_pointwise_map", "slanted_mask", "solve", "sphere_spectrum",
    "sphere_torus_commutator_series", "standard_mask", "subsample",
    "surface_area", "tetrahedron", "torus_spectrum", "weyl_estimate", "wks",
    "write_line_plot", "write_pgm", "write_scatter_plot",
]
