#!/usr/bin/env python3
"""
Domain geometry, measure representations and log-space density arithmetic.

This module holds the value types every solver in frbary shares:

- BoxDomain: the compact box Ω the barycenter lives on
- RegularGrid: a cell-centered grid over a BoxDomain
- DiscreteMeasure: weighted atoms (point clouds, histograms as atoms)
- GridHistogram: nonnegative weights on the cells of a RegularGrid
- GridDensity: a strictly positive density stored as log-values at cell centers
- GaussianMeasure: mean and SPD covariance
- InputMeasure: one weighted input of a barycenter problem

Densities are stored and updated in log-space only; linear values and cell
masses are derived on demand. All types are immutable after construction
(their arrays are flagged read-only) and can be shared across threads.

Grid values are ordered row-major over the grid shape: the last axis varies
fastest, matching numpy's C order and the on-disk grid file layout.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .errors import MeasureError

logger = logging.getLogger(__name__)

# Tolerances of the type invariants
WEIGHT_TOL = 1e-12          # |Σ u_j − 1| for probability vectors
NORMALIZATION_TOL = 1e-10   # |Δ·Σ exp(log ρ) − 1| for grid densities
SYMMETRY_TOL = 1e-12        # covariance symmetry
SUPPORTED_DIMS = (2, 3)

# Gaussian supports are boxed at mean ± GAUSSIAN_SUPPORT_SDS standard deviations
GAUSSIAN_SUPPORT_SDS = 4.0


def _frozen(values, dtype=float):
  arr = np.array(values, dtype=dtype)
  arr.setflags(write=False)
  return arr


@dataclass(frozen=True, eq=False)
class BoxDomain:
  """
  Axis-aligned box Ω = [lo_1, hi_1] × ... × [lo_d, hi_d] with d ∈ {2, 3}.

  Args:
      lo (array-like): Lower bound per axis
      hi (array-like): Upper bound per axis

  Raises:
      MeasureError: If the bounds are malformed, non-finite, of unsupported
          dimension, or lo >= hi on some axis.
  """
  lo: np.ndarray
  hi: np.ndarray

  def __post_init__(self):
    lo = _frozen(self.lo)
    hi = _frozen(self.hi)
    if lo.ndim != 1 or lo.shape != hi.shape:
      raise MeasureError("box bounds must be two vectors of equal length")
    if lo.size not in SUPPORTED_DIMS:
      raise MeasureError(f"unsupported dimension {lo.size} (expected 2 or 3)")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
      raise MeasureError("box bounds must be finite")
    if np.any(lo >= hi):
      raise MeasureError("box bounds require lo < hi on every axis")
    object.__setattr__(self, "lo", lo)
    object.__setattr__(self, "hi", hi)

  @classmethod
  def from_bounds(cls, bounds):
    """Build a box from a flat sequence (lo1, hi1, ..., lod, hid)."""
    flat = np.asarray(bounds, dtype=float).ravel()
    if flat.size % 2:
      raise MeasureError("box bounds need an even number of values (lo hi per axis)")
    return cls(flat[0::2], flat[1::2])

  @property
  def dim(self):
    return int(self.lo.size)

  @property
  def widths(self):
    return self.hi - self.lo

  @property
  def volume(self):
    return float(np.prod(self.widths))

  @property
  def radius(self):
    return domain_radius(self)

  def bounds(self):
    """Flat (lo1, hi1, ..., lod, hid) list."""
    return [float(v) for pair in zip(self.lo, self.hi) for v in pair]

  def contains(self, points, atol=0.0):
    """Boolean mask of points lying in the closed box (inflated by atol)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.all((pts >= self.lo - atol) & (pts <= self.hi + atol), axis=1)

  def translated(self, shift):
    shift = np.asarray(shift, dtype=float)
    return BoxDomain(self.lo + shift, self.hi + shift)

  def __eq__(self, other):
    if not isinstance(other, BoxDomain):
      return NotImplemented
    return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

  def __hash__(self):
    return hash((tuple(self.lo), tuple(self.hi)))

  def __repr__(self):
    return f"BoxDomain(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


@dataclass(frozen=True, eq=False)
class RegularGrid:
  """
  Cell-centered regular grid over a BoxDomain.

  Nodes are the centers of the n_1 × ... × n_d cells, so every node lies
  strictly inside Ω and the cell volume Δ is the same for all cells.

  Args:
      domain (BoxDomain): The box being discretized
      shape (tuple of int): Number of cells per axis
  """
  domain: BoxDomain
  shape: tuple

  def __post_init__(self):
    if not isinstance(self.domain, BoxDomain):
      raise MeasureError("grid domain must be a BoxDomain")
    shape = tuple(int(n) for n in self.shape)
    if len(shape) != self.domain.dim:
      raise MeasureError(f"grid shape {shape} does not match domain dimension {self.domain.dim}")
    if any(n < 1 for n in shape):
      raise MeasureError(f"grid shape {shape} must be positive on every axis")
    object.__setattr__(self, "shape", shape)

  @property
  def dim(self):
    return self.domain.dim

  @property
  def size(self):
    """Total node count M."""
    return int(np.prod(self.shape))

  @property
  def cell_widths(self):
    return self.domain.widths / np.asarray(self.shape, dtype=float)

  @property
  def cell_volume(self):
    """Δ, the volume of a single cell."""
    return float(np.prod(self.cell_widths))

  @cached_property
  def axes(self):
    """Cell-center coordinates per axis."""
    return tuple(
      _frozen(lo + (np.arange(n) + 0.5) * h)
      for lo, n, h in zip(self.domain.lo, self.shape, self.cell_widths)
    )

  @cached_property
  def nodes(self):
    """(M, d) array of cell centers in row-major order."""
    mesh = np.meshgrid(*self.axes, indexing="ij")
    return _frozen(np.stack([m.ravel() for m in mesh], axis=1))

  def locate(self, points):
    """
    Flat index of the cell containing each point.

    Points on the upper boundary are assigned to the last cell; points outside
    the domain are clipped to the nearest boundary cell.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    idx = np.floor((pts - self.domain.lo) / self.cell_widths).astype(np.int64)
    idx = np.clip(idx, 0, np.asarray(self.shape) - 1)
    return np.ravel_multi_index(tuple(idx.T), self.shape)

  def translated(self, shift):
    return RegularGrid(self.domain.translated(shift), self.shape)

  def same_as(self, other):
    return isinstance(other, RegularGrid) and self.shape == other.shape and self.domain == other.domain

  def __eq__(self, other):
    if not isinstance(other, RegularGrid):
      return NotImplemented
    return self.same_as(other)

  def __hash__(self):
    return hash((self.domain, self.shape))

  def __repr__(self):
    return f"RegularGrid(shape={self.shape}, domain={self.domain!r})"


def _check_probability_vector(weights, what):
  if weights.ndim != 1:
    raise MeasureError(f"{what} must be a vector")
  if not np.all(np.isfinite(weights)):
    raise MeasureError(f"{what} must be finite")
  if np.any(weights < 0):
    raise MeasureError(f"{what} must be nonnegative")
  total = weights.sum()
  if abs(total - 1.0) > WEIGHT_TOL:
    raise MeasureError(f"{what} sum to {total!r}, expected 1")


def _normalized_weights(weights):
  weights = np.asarray(weights, dtype=float)
  if not np.all(np.isfinite(weights)) or np.any(weights < 0):
    raise MeasureError("weights must be finite and nonnegative")
  total = weights.sum()
  if total <= 0:
    raise MeasureError("zero-mass input")
  return weights / total


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
  """
  Weighted atoms μ̂ = Σ u_j δ_{x_j}.

  Args:
      points (array-like): (m, d) atom positions
      weights (array-like): m nonnegative weights summing to 1
      domain (BoxDomain, optional): If given, every atom must lie inside it

  Use DiscreteMeasure.create() to build a measure from unnormalized or
  missing weights.
  """
  points: np.ndarray
  weights: np.ndarray
  domain: BoxDomain = None

  def __post_init__(self):
    points = _frozen(self.points)
    weights = _frozen(self.weights)
    if points.ndim != 2 or points.shape[0] < 1:
      raise MeasureError("atoms must be a non-empty (m, d) array")
    if not np.all(np.isfinite(points)):
      raise MeasureError("atom coordinates must be finite")
    if weights.shape != (points.shape[0],):
      raise MeasureError(f"expected {points.shape[0]} weights, got {weights.shape}")
    _check_probability_vector(weights, "atom weights")
    if self.domain is not None:
      if self.domain.dim != points.shape[1]:
        raise MeasureError("dimension mismatch between atoms and domain")
      outside = ~self.domain.contains(points)
      if np.any(outside):
        raise MeasureError(f"{int(outside.sum())} atom(s) lie outside the domain {self.domain!r}")
    object.__setattr__(self, "points", points)
    object.__setattr__(self, "weights", weights)

  @classmethod
  def create(cls, points, weights=None, domain=None):
    """
    Build a measure, normalizing weights (uniform when omitted).

    Raises:
        MeasureError: "zero-mass input" if the weights sum to zero.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if weights is None:
      weights = np.full(points.shape[0], 1.0 / max(points.shape[0], 1))
    return cls(points, _normalized_weights(weights), domain)

  @property
  def dim(self):
    return int(self.points.shape[1])

  @property
  def size(self):
    return int(self.points.shape[0])

  def is_uniform(self, tol=WEIGHT_TOL):
    return bool(np.all(np.abs(self.weights - 1.0 / self.size) <= tol))

  def merge_duplicates(self):
    """Sum the weights of coincident atoms; returns self when all atoms are distinct."""
    unique, inverse = np.unique(self.points, axis=0, return_inverse=True)
    if unique.shape[0] == self.size:
      return self
    merged = np.bincount(inverse.ravel(), weights=self.weights, minlength=unique.shape[0])
    logger.debug("Merged %d duplicate atom(s)", self.size - unique.shape[0])
    return DiscreteMeasure(unique, merged / merged.sum(), self.domain)

  def support_bounds(self):
    return self.points.min(axis=0), self.points.max(axis=0)

  def translated(self, shift):
    shift = np.asarray(shift, dtype=float)
    domain = self.domain.translated(shift) if self.domain is not None else None
    return DiscreteMeasure(self.points + shift, self.weights, domain)


@dataclass(frozen=True, eq=False)
class GridHistogram:
  """
  Nonnegative weights on the cells of a RegularGrid, summing to one.

  When a solver needs atoms, the cell centers carry the weights.
  """
  grid: RegularGrid
  weights: np.ndarray

  def __post_init__(self):
    weights = _frozen(np.asarray(self.weights, dtype=float).ravel())
    if weights.size != self.grid.size:
      raise MeasureError(f"histogram has {weights.size} values, grid has {self.grid.size} cells")
    _check_probability_vector(weights, "histogram weights")
    object.__setattr__(self, "weights", weights)

  @classmethod
  def from_counts(cls, grid, counts):
    """Normalize raw nonnegative cell values (image intensities, counts)."""
    return cls(grid, _normalized_weights(np.asarray(counts, dtype=float).ravel()))

  @property
  def dim(self):
    return self.grid.dim

  def as_discrete(self, min_weight=0.0):
    """Cell centers carrying the histogram weights; cells at or below min_weight are dropped."""
    keep = self.weights > min_weight
    if not np.any(keep):
      raise MeasureError("zero-mass input")
    weights = self.weights[keep]
    return DiscreteMeasure(self.grid.nodes[keep], weights / weights.sum(), self.grid.domain)


@dataclass(frozen=True, eq=False)
class GridDensity:
  """
  Density on a RegularGrid stored as log-values at the cell centers.

  A valid density is normalized (logsumexp(log_values) + log Δ = 0 within
  NORMALIZATION_TOL) with all log-values finite. Construction only checks
  shapes so that normalize_log_density() can accept raw log-values; use the
  factories (uniform, from_log_values, from_gaussian) to obtain normalized
  densities.
  """
  grid: RegularGrid
  log_values: np.ndarray

  def __post_init__(self):
    values = _frozen(np.asarray(self.log_values, dtype=float).ravel())
    if values.size != self.grid.size:
      raise MeasureError(f"density has {values.size} values, grid has {self.grid.size} cells")
    object.__setattr__(self, "log_values", values)

  @classmethod
  def uniform(cls, grid):
    """Uniform density 1/vol(Ω) on the grid."""
    return cls(grid, np.full(grid.size, -np.log(grid.domain.volume)))

  @classmethod
  def from_log_values(cls, grid, log_values):
    return normalize_log_density(cls(grid, log_values))

  @classmethod
  def from_gaussian(cls, grid, gaussian):
    """Discretize a Gaussian: log-pdf at the cell centers, normalized on the grid."""
    if gaussian.dim != grid.dim:
      raise MeasureError("dimension mismatch between Gaussian and grid")
    logpdf = multivariate_normal(mean=gaussian.mean, cov=gaussian.cov).logpdf(grid.nodes)
    return cls.from_log_values(grid, np.atleast_1d(logpdf))

  @property
  def dim(self):
    return self.grid.dim

  @property
  def values(self):
    """Density values ρ(y_j)."""
    return np.exp(self.log_values)

  @property
  def masses(self):
    """Cell masses Δ·ρ(y_j)."""
    return np.exp(self.log_values + np.log(self.grid.cell_volume))

  def normalization_error(self):
    return abs(float(self.masses.sum()) - 1.0)

  def is_normalized(self, tol=NORMALIZATION_TOL):
    return bool(np.all(np.isfinite(self.log_values))) and self.normalization_error() <= tol

  def translated(self, shift):
    """The same log-values on the grid shifted by `shift`."""
    return GridDensity(self.grid.translated(shift), self.log_values)

  def as_histogram(self):
    masses = self.masses
    return GridHistogram(self.grid, masses / masses.sum())

  def as_discrete(self):
    """Cell centers weighted by the cell masses (every cell is kept)."""
    masses = self.masses
    return DiscreteMeasure(self.grid.nodes, masses / masses.sum(), self.grid.domain)

  def moments(self):
    """
    Quadrature mean and covariance of the piecewise-constant density.

    Returns:
        tuple: (mean (d,), cov (d, d)); the covariance includes the uniform
        within-cell variance h_a²/12 on the diagonal.
    """
    masses = self.masses / self.masses.sum()
    nodes = self.grid.nodes
    mean = masses @ nodes
    centered = nodes - mean
    cov = (centered * masses[:, None]).T @ centered
    cov += np.diag(self.grid.cell_widths ** 2 / 12.0)
    return mean, cov


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
  """
  Gaussian N(mean, cov) with symmetric positive-definite covariance.

  Any dimension is accepted here; barycenter grids restrict to d ∈ {2, 3}.
  """
  mean: np.ndarray
  cov: np.ndarray

  def __post_init__(self):
    mean = _frozen(np.atleast_1d(np.asarray(self.mean, dtype=float)))
    cov = _frozen(np.atleast_2d(np.asarray(self.cov, dtype=float)))
    d = mean.size
    if mean.ndim != 1 or cov.shape != (d, d):
      raise MeasureError(f"invalid covariance: expected shape ({d}, {d}), got {cov.shape}")
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
      raise MeasureError("invalid covariance: non-finite entries")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
      raise MeasureError("invalid covariance: matrix is not symmetric")
    if np.linalg.eigvalsh(cov).min() <= 0:
      raise MeasureError("invalid covariance: matrix is not positive definite")
    object.__setattr__(self, "mean", mean)
    object.__setattr__(self, "cov", cov)

  @property
  def dim(self):
    return int(self.mean.size)

  def sample(self, n, rng):
    return rng.multivariate_normal(self.mean, self.cov, size=int(n), method="eigh")

  def support_bounds(self, sds=GAUSSIAN_SUPPORT_SDS):
    spread = sds * np.sqrt(np.diag(self.cov))
    return self.mean - spread, self.mean + spread

  def translated(self, shift):
    return GaussianMeasure(self.mean + np.asarray(shift, dtype=float), self.cov)


MEASURE_KINDS = {
  DiscreteMeasure: "discrete",
  GridHistogram: "histogram",
  GridDensity: "density",
  GaussianMeasure: "gaussian",
}


@dataclass(frozen=True)
class InputMeasure:
  """
  One weighted input μ_i of a barycenter problem.

  Args:
      measure: DiscreteMeasure, GridHistogram, GridDensity or GaussianMeasure
      weight (float): Barycentric weight w_i >= 0
      label (str, optional): Name used in diagnostics (usually the file path)
  """
  measure: object
  weight: float = 1.0
  label: str = None

  def __post_init__(self):
    if type(self.measure) not in MEASURE_KINDS:
      raise MeasureError(f"unsupported input measure type {type(self.measure).__name__}")
    weight = float(self.weight)
    if not np.isfinite(weight) or weight < 0:
      raise MeasureError(f"input weight must be finite and nonnegative, got {self.weight!r}")
    object.__setattr__(self, "weight", weight)

  @property
  def kind(self):
    return MEASURE_KINDS[type(self.measure)]

  @property
  def dim(self):
    return self.measure.dim

  @property
  def name(self):
    return self.label or self.kind


def check_input_weights(inputs):
  """
  Validate that input weights are nonnegative and sum to one.

  Raises:
      MeasureError: On an empty input list or weights violating the invariant.
  """
  if not inputs:
    raise MeasureError("at least one input measure is required")
  weights = np.array([inp.weight for inp in inputs])
  _check_probability_vector(weights, "input weights")


def normalize_input_weights(inputs):
  """
  Rescale input weights to sum to one.

  Returns:
      tuple: (list of InputMeasure, bool) where the flag tells whether the
      weights had to be changed.
  """
  if not inputs:
    raise MeasureError("at least one input measure is required")
  weights = np.array([inp.weight for inp in inputs], dtype=float)
  total = weights.sum()
  if total <= 0:
    raise MeasureError("input weights sum to zero")
  if abs(total - 1.0) <= WEIGHT_TOL:
    return list(inputs), False
  logger.warning("Input weights sum to %.17g; normalizing to 1", total)
  return [InputMeasure(inp.measure, inp.weight / total, inp.label) for inp in inputs], True


def support_bounds(measure):
  """
  Axis-aligned bounding box of a measure's support.

  Grid measures report their grid box; Gaussians report mean ± 4 standard
  deviations per axis.
  """
  if isinstance(measure, (GridHistogram, GridDensity)):
    return measure.grid.domain.lo.copy(), measure.grid.domain.hi.copy()
  lo, hi = measure.support_bounds()
  return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


def lsp(v, delta):
  """
  Log of the grid integral of exp(v): log Σ_i Δ·exp(v_i).

  Args:
      v (array-like): Log-values at the grid nodes
      delta (float): Cell volume Δ > 0

  Returns:
      float: The normalizer, computed with a max-shift for stability.

  Raises:
      MeasureError: "empty grid" if v is empty.

  Example:
      >>> lsp([0.0, np.log(3.0)], 0.5)     # log(0.5 * (1 + 3))
      0.6931471805599453
  """
  v = np.asarray(v, dtype=float).ravel()
  if v.size == 0:
    raise MeasureError("empty grid")
  if not delta > 0:
    raise MeasureError(f"cell volume must be positive, got {delta!r}")
  return float(logsumexp(v) + np.log(delta))


def normalize_log_density(g):
  """
  Shift a log-density so that it integrates to one on its grid.

  Args:
      g (GridDensity): Density with finite, possibly unnormalized log-values

  Returns:
      GridDensity: log ρ − lsp(log ρ, Δ)

  Raises:
      MeasureError: "non-finite log-density" if any log-value is NaN or ±inf.
  """
  values = g.log_values
  if not np.all(np.isfinite(values)):
    raise MeasureError("non-finite log-density")
  return GridDensity(g.grid, values - lsp(values, g.grid.cell_volume))


def domain_radius(b):
  """
  R = max_{x ∈ Ω} ‖x‖, attained at a corner of the box.

  The maximum over the 2^d corners separates per axis, so R² is the sum of
  max(lo_a², hi_a²).
  """
  return float(np.sqrt(np.sum(np.maximum(b.lo ** 2, b.hi ** 2))))


def resample_to_grid(measure, grid):
  """
  Transfer a grid measure onto another grid as a histogram.

  The source is treated as a piecewise-constant density; each target cell
  takes the source value at its center (zero outside the source box).

  Args:
      measure (GridDensity or GridHistogram): Source on its own grid
      grid (RegularGrid): Target grid

  Returns:
      GridHistogram: Normalized target cell masses

  Raises:
      MeasureError: On dimension mismatch or when no mass lands on the target.
  """
  source_grid = measure.grid
  if source_grid.same_as(grid):
    return measure if isinstance(measure, GridHistogram) else measure.as_histogram()
  if source_grid.dim != grid.dim:
    raise MeasureError("dimension mismatch between grids")
  if isinstance(measure, GridDensity):
    values = measure.values
  else:
    values = measure.weights / source_grid.cell_volume
  lookup = RegularGridInterpolator(
    source_grid.axes, values.reshape(source_grid.shape),
    method="nearest", bounds_error=False, fill_value=None,
  )
  sampled = lookup(grid.nodes)
  sampled[~source_grid.domain.contains(grid.nodes)] = 0.0
  return GridHistogram.from_counts(grid, np.maximum(sampled, 0.0) * grid.cell_volume)

#fin
