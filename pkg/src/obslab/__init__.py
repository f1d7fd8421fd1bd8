"""Observability and control experiments for the Schrodinger equation on
compact surfaces (flat torus, Bolza octagon).

The package is organized in layers: ``surface`` builds meshes and control
regions, ``spectral`` assembles and diagonalizes the Laplace-Beltrami
operator and provides dyadic frequency filters, ``evolve`` implements the
exact spectral propagators and time quadrature, ``observability`` computes
observability Gramians and the derived constants, ``hum`` synthesizes
minimal-norm controls by duality, and ``cli`` wraps everything into
config-driven experiments.
"""

from .errors import (AliasedGrid, ConfigError, ConvergenceFailure,
                     DegenerateTriangle, EmptyRegion, InvalidResolution,
                     NotObservable, ObslabError, SpilloverGuard, TooManyModes,
                     UnresolvedScale)
from .surface import (ControlRegion, RegionSpec, SurfaceMesh, build_bolza,
                      build_torus, chart_triangle_areas, disk_distance,
                      euler_characteristic, fmt_float, load_mesh,
                      rasterize_region, save_mesh, save_region,
                      vertex_measures)
from .spectral import (EigenBasis, SpectralFilter, SpectralState, assemble,
                       bump_chi, bump_phi, bump_phi0, check_spillover,
                       dyadic_partition_check, eigensolve,
                       eigenvalue_clusters, load_eigenbasis, make_filter,
                       perturb_basis, random_state, save_eigenbasis,
                       save_filter, sobolev_norm, weyl_ratio)
from .evolve import (TimeGrid, evolution_frequencies, evolution_samples,
                     halfwave_frequencies, halfwave_propagate,
                     save_trajectory, schrodinger_propagate,
                     semiclassical_fourier, solve_inhomogeneous,
                     source_to_initial_weights, time_grid)
from .observability import (ObservabilityGramian, ObservabilityReport,
                            check_observe_with_error, eigenfunction_mass,
                            gramian, observability_constant, overlap_matrix,
                            quasimode_estimate_check, restricted_constant,
                            result_row, save_results_csv, save_results_json,
                            wave_windowed_constant, windowed_constants)
from .hum import (ControlSignal, apply_R, apply_S, default_synthesis_grid,
                  duality_check, save_control, save_control_diagnostics,
                  signal_from_coeffs, synthesize_control, verify_control)
from .config import ExperimentConfig, load_config, parse_config_text, validate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
