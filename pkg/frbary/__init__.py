#!/usr/bin/env python3
"""
frbary - exact Wasserstein barycenters by Fisher-Rao mirror descent.

The barycenter of weighted input measures (point clouds, grid histograms,
grid densities or Gaussians) is computed as a density on a fixed regular grid.
Each iteration solves one optimal transport problem per input and applies a
multiplicative update to the density.

Features:
- Semi-discrete OT (Laguerre cells, dual gradient ascent) for point clouds
- Exact discrete OT (network simplex) for histograms
- Closed-form mirror descent on covariances for Gaussian inputs
- Exact sampling from grid densities, moment and sliced Wasserstein metrics
- Config-driven command-line runs writing densities and trace CSVs

Usage:
  frbary barycenter [OPTIONS] INPUT...
  frbary gaussian [OPTIONS] INPUT...
  frbary sample DENSITY -n N [--seed S] [--out FILE]
  frbary ot SOURCE TARGET

Example:
  >>> import frbary
  >>> grid = frbary.RegularGrid(frbary.BoxDomain([0, 0], [1, 1]), (32, 32))
  >>> cloud = frbary.DiscreteMeasure.create([[0.3, 0.3], [0.7, 0.6]])
  >>> result = frbary.run_frbary([frbary.InputMeasure(cloud)], grid, frbary.Schedule(T=20))
  >>> len(result.trace)
  21
"""

__version__ = "1.0.0"

import logging
import sys

from .discrete import DualPair, TransportPlan, oracle_assignment, solve_discrete
from .errors import (ConvergenceError, FRBaryError, InputFileError,
                     InstanceTooLargeError, InvariantViolation, MeasureError,
                     NoProgressError, ParseError, SolverError,
                     StepTooLargeError, UsageError)
from .evaluation import (SampleSet, empirical_moments, gaussian_point_clouds,
                         grid_w2_to_gaussian_truth, occupancy_chi2,
                         optimality_gaps, rejection_sample, run_benchmark,
                         sliced_wasserstein)
from .gaussian import (bures_wasserstein_distance, gaussian_A_matrix,
                       gaussian_barycenter, gaussian_barycenter_ground_truth,
                       gaussian_mirror_step, run_gaussian_frbary, spd_sqrt)
from .io import ingest
from .measures import (BoxDomain, DiscreteMeasure, GaussianMeasure,
                       GridDensity, GridHistogram, InputMeasure, RegularGrid,
                       domain_radius, lsp, normalize_log_density)
from .mirror import (BarycenterResult, MirrorOptions, RunTrace, Schedule,
                     averaged_potential, mirror_step, objective_estimate,
                     run_frbary)
from .rng import make_rng
from .semidiscrete import (GridPotential, PotentialVector, SemiDiscreteSolution,
                           SolverOptions, c_transform, dual_objective,
                           laguerre_masses, solve_semidiscrete,
                           transport_cost_estimate)

logger = logging.getLogger(__name__)
# Silent when imported as a library; the CLI turns output on
logger.addHandler(logging.NullHandler())

_stderr_handler = None


def set_warning_output(enabled=True, verbose=False):
  """
  Enable or disable warning messages on stderr.

  By default frbary logs nothing when imported as a module. This attaches a
  stderr handler to the `frbary` logger (or removes it).

  Args:
      enabled (bool): True to print warnings, False to silence them
      verbose (bool): Also print processing details (DEBUG level)

  Example:
      >>> import frbary
      >>> frbary.set_warning_output(True)    # Enable warnings
      >>> frbary.set_warning_output(False)   # Disable warnings

  Note:
      This changes process-wide logging state and is not thread-safe.
  """
  global _stderr_handler
  if _stderr_handler is not None:
    logger.removeHandler(_stderr_handler)
    _stderr_handler = None
  if not enabled:
    logger.setLevel(logging.WARNING)
    return
  _stderr_handler = logging.StreamHandler(sys.stderr)
  _stderr_handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
  logger.addHandler(_stderr_handler)
  logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


__all__ = [
  "__version__", "set_warning_output", "make_rng", "ingest",
  # measures
  "BoxDomain", "RegularGrid", "DiscreteMeasure", "GridHistogram", "GridDensity",
  "GaussianMeasure", "InputMeasure", "lsp", "normalize_log_density", "domain_radius",
  # transport
  "PotentialVector", "GridPotential", "SemiDiscreteSolution", "SolverOptions",
  "c_transform", "laguerre_masses", "dual_objective", "solve_semidiscrete",
  "transport_cost_estimate", "TransportPlan", "DualPair", "solve_discrete",
  "oracle_assignment",
  # mirror descent
  "Schedule", "RunTrace", "BarycenterResult", "MirrorOptions", "averaged_potential",
  "mirror_step", "run_frbary", "objective_estimate",
  # gaussian
  "spd_sqrt", "gaussian_A_matrix", "gaussian_mirror_step", "bures_wasserstein_distance",
  "gaussian_barycenter_ground_truth", "gaussian_barycenter", "run_gaussian_frbary",
  # evaluation
  "SampleSet", "rejection_sample", "empirical_moments", "sliced_wasserstein",
  "grid_w2_to_gaussian_truth", "occupancy_chi2", "gaussian_point_clouds", "optimality_gaps",
  "run_benchmark",
  # errors
  "FRBaryError", "UsageError", "InputFileError", "ParseError", "MeasureError",
  "SolverError", "NoProgressError", "InstanceTooLargeError", "StepTooLargeError",
  "ConvergenceError", "InvariantViolation",
]

#fin
