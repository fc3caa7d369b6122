#!/usr/bin/env python3
"""
Sampling from grid densities and quantitative evaluation of barycenters.

rejection_sample() draws from the piecewise-constant density a GridDensity
represents: a cell is picked with probability equal to its mass and the point
is placed uniformly inside it. Every draw is accepted, so this is the exact
sampler that rejection sampling against a uniform proposal would converge to.

The Gaussian benchmark helpers build the point-cloud experiments whose true
barycenter is known in closed form, and turn a run's trace into optimality
gaps against it.
"""

import logging
from dataclasses import dataclass

import numpy as np
import ot
from scipy import stats

from .errors import MeasureError
from .gaussian import barycenter_objective, gaussian_barycenter, random_spd
from .measures import (BoxDomain, DiscreteMeasure, GaussianMeasure,
                       GridDensity, InputMeasure, RegularGrid)
from .mirror import Schedule, objective_estimate, run_frbary
from .rng import make_rng

logger = logging.getLogger(__name__)

DEFAULT_PROJECTIONS = 50

# Gaussian point-cloud experiments per dimension: n inputs of m points, a
# cells^d grid and the power schedule c·(k+1)^(-alpha) for T steps
BENCHMARK_SETTINGS = {
  2: {"n": 4, "m": 10_000, "cells": 100, "c": 0.1, "alpha": 0.3, "T": 125},
  3: {"n": 3, "m": 3_000, "cells": 50, "c": 0.2, "alpha": 0.2, "T": 100},
}


@dataclass(frozen=True, eq=False)
class SampleSet:
  """
  N points in R^d drawn with a known seed.

  Args:
      points (array-like): (N, d) samples
      seed (int): Seed the samples were drawn with
      domain (BoxDomain, optional): If given, all points must lie inside it
  """
  points: np.ndarray
  seed: int = 0
  domain: BoxDomain = None

  def __post_init__(self):
    points = np.array(np.atleast_2d(np.asarray(self.points, dtype=float)))
    points.setflags(write=False)
    if self.domain is not None and not np.all(self.domain.contains(points)):
      raise MeasureError("samples lie outside the domain")
    object.__setattr__(self, "points", points)

  def __len__(self):
    return int(self.points.shape[0])

  @property
  def dim(self):
    return int(self.points.shape[1])


def rejection_sample(rho, N, seed=0):
  """
  Draw N i.i.d. samples from a grid density.

  Args:
      rho (GridDensity): Density to sample
      N (int): Number of samples, at least 1
      seed (int): Root seed

  Returns:
      SampleSet: Points inside rho's domain

  Examples:
      >>> s = rejection_sample(GridDensity.uniform(grid), 1000, seed=3)   # doctest: +SKIP
      >>> len(s)
      1000
  """
  N = int(N)
  if N < 1:
    raise MeasureError(f"sample count must be at least 1, got {N}")
  grid = rho.grid
  masses = rho.masses
  rng = make_rng(seed)
  cells = rng.choice(grid.size, size=N, p=masses / masses.sum())
  jitter = rng.uniform(-0.5, 0.5, size=(N, grid.dim)) * grid.cell_widths
  points = np.clip(grid.nodes[cells] + jitter, grid.domain.lo, grid.domain.hi)
  return SampleSet(points, seed, grid.domain)


def empirical_moments(s):
  """
  Sample mean and unbiased sample covariance.

  Examples:
      >>> empirical_moments(SampleSet([[0.0, 0.0], [2.0, 0.0]]))
      (array([1., 0.]), array([[2., 0.],
             [0., 0.]]))
  """
  points = s.points if isinstance(s, SampleSet) else np.atleast_2d(np.asarray(s, dtype=float))
  if points.shape[0] < 2:
    raise MeasureError("empirical moments need at least two samples")
  mean = points.mean(axis=0)
  cov = np.atleast_2d(np.cov(points, rowvar=False, ddof=1))
  return mean, cov


def _directions(d, n_proj, seed, projections):
  if projections is not None:
    dirs = np.atleast_2d(np.asarray(projections, dtype=float))
    if dirs.shape[1] != d:
      raise MeasureError("projection directions do not match the sample dimension")
  else:
    if int(n_proj) < 1:
      raise MeasureError("n_proj must be at least 1")
    # one substream per direction so each direction is independent of n_proj
    dirs = np.stack([make_rng(seed, p).standard_normal(d) for p in range(int(n_proj))])
  norms = np.linalg.norm(dirs, axis=1)
  if np.any(norms == 0):
    raise MeasureError("projection directions must be nonzero")
  return dirs / norms[:, None]


def _w2_1d(u, v):
  if u.size == v.size:
    return float(np.sqrt(np.mean((np.sort(u) - np.sort(v)) ** 2)))
  return float(np.sqrt(max(ot.wasserstein_1d(u, v, p=2), 0.0)))


def sliced_wasserstein(a, b, n_proj=DEFAULT_PROJECTIONS, seed=0, projections=None):
  """
  Sliced Wasserstein distance between two sample sets.

  Averages the one-dimensional W₂ distance of the projected samples over
  n_proj random unit directions. Equal sample counts are coupled by sorting;
  unequal counts go through POT's quantile-matched 1D solver.

  Args:
      a, b (SampleSet): Sample sets of the same dimension
      n_proj (int): Number of random directions
      seed (int): Seed of the directions
      projections (array-like, optional): Explicit (p, d) directions used
          instead of random ones (normalized to unit length)

  Returns:
      float: Nonnegative distance
  """
  if a.dim != b.dim:
    raise MeasureError(f"dimension mismatch: {a.dim}D vs {b.dim}D samples")
  dirs = _directions(a.dim, n_proj, seed, projections)
  pa = a.points @ dirs.T
  pb = b.points @ dirs.T
  return float(np.mean([_w2_1d(pa[:, p], pb[:, p]) for p in range(dirs.shape[0])]))


def grid_w2_to_gaussian_truth(rho, truth, N, seed=0):
  """
  Mean and covariance errors of a grid density against a Gaussian.

  Returns:
      tuple: (‖mean − truth.mean‖₂, ‖cov − truth.cov‖_F) from N samples
  """
  if rho.dim != truth.dim:
    raise MeasureError(f"dimension mismatch: {rho.dim}D density vs {truth.dim}D Gaussian")
  mean, cov = empirical_moments(rejection_sample(rho, N, seed))
  return float(np.linalg.norm(mean - truth.mean)), float(np.linalg.norm(cov - truth.cov, "fro"))


def occupancy_chi2(rho, samples):
  """
  Chi-square goodness of fit of sample cell counts against the cell masses.

  Returns:
      tuple: (statistic, p-value)
  """
  grid = rho.grid
  counts = np.bincount(grid.locate(samples.points), minlength=grid.size)
  masses = rho.masses
  expected = masses / masses.sum() * counts.sum()
  result = stats.chisquare(counts, expected)
  return float(result.statistic), float(result.pvalue)


def chi2_threshold(cells, quantile=0.99):
  """Critical value of the occupancy statistic for a given number of cells."""
  return float(stats.chi2.ppf(quantile, cells - 1))


@dataclass(frozen=True)
class GaussianBenchmark:
  """
  Gaussian point clouds with their closed-form barycenter.

  Attributes:
      gaussians (list of GaussianMeasure): The generating Gaussians
      clouds (list of DiscreteMeasure): Sampled inputs
      weights (ndarray): Barycentric weights
      truth (GaussianMeasure): Barycenter of the Gaussians
      domain (BoxDomain): Box holding every cloud with a margin
  """
  gaussians: list
  clouds: list
  weights: np.ndarray
  truth: GaussianMeasure
  domain: BoxDomain

  def inputs(self):
    return [
      InputMeasure(cloud, float(w), label=f"cloud{i}")
      for i, (cloud, w) in enumerate(zip(self.clouds, self.weights))
    ]

  def optimal_objective(self):
    """E(λ*) between the generating Gaussians and the truth (closed form)."""
    return barycenter_objective(self.gaussians, self.weights, self.truth)


def gaussian_point_clouds(n, m, d, seed=0, mean_range=1.0, eig_range=(0.05, 0.3), margin=0.25):
  """
  Random Gaussian inputs sampled into point clouds.

  Means are uniform in [−mean_range, mean_range]^d, covariances have
  eigenvalues in eig_range. Weights are uniform. Each Gaussian draws from its
  own substream of seed, and the clouds share one bounding box enlarged by
  margin on every side.
  """
  if d not in (2, 3):
    raise MeasureError(f"unsupported dimension {d} (expected 2 or 3)")
  rng = make_rng(seed, 0)
  gaussians = [
    GaussianMeasure(rng.uniform(-mean_range, mean_range, size=d), random_spd(d, rng, eig_range))
    for _ in range(int(n))
  ]
  samples = [g.sample(m, make_rng(seed, 1, i)) for i, g in enumerate(gaussians)]
  stacked = np.concatenate(samples)
  lo, hi = stacked.min(axis=0), stacked.max(axis=0)
  pad = margin * (hi - lo)
  domain = BoxDomain(lo - pad, hi + pad)
  clouds = [DiscreteMeasure.create(points, domain=domain) for points in samples]
  weights = np.full(int(n), 1.0 / int(n))
  truth = gaussian_barycenter(gaussians, weights)
  return GaussianBenchmark(gaussians, clouds, weights, truth, domain)


@dataclass(frozen=True)
class BenchmarkRun:
  """A finished benchmark: the instance, the grid it ran on and the run result."""
  benchmark: GaussianBenchmark
  grid: RegularGrid
  result: object


def run_benchmark(d, seed=0, opts=None, **overrides):
  """
  Run the Gaussian point-cloud experiment for dimension d.

  Settings come from BENCHMARK_SETTINGS[d]; any of them (n, m, cells, c,
  alpha, T) can be overridden, e.g. to run a scaled-down instance.

  Args:
      d (int): 2 or 3
      seed (int): Seed of the instance
      opts (MirrorOptions, optional): Run settings
      **overrides: Replacement values for BENCHMARK_SETTINGS[d]

  Returns:
      BenchmarkRun

  Raises:
      MeasureError: Unsupported dimension or unknown setting name.
  """
  if d not in BENCHMARK_SETTINGS:
    raise MeasureError(f"unsupported dimension {d} (expected 2 or 3)")
  settings = dict(BENCHMARK_SETTINGS[d])
  unknown = sorted(set(overrides) - set(settings))
  if unknown:
    raise MeasureError(f"unknown benchmark setting(s): {', '.join(unknown)}")
  settings.update(overrides)
  benchmark = gaussian_point_clouds(settings["n"], settings["m"], d, seed)
  grid = RegularGrid(benchmark.domain, (int(settings["cells"]),) * d)
  schedule = Schedule("power", c=settings["c"], alpha=settings["alpha"], T=settings["T"])
  logger.info("Benchmark d=%d: %d clouds of %d points on %s", d, settings["n"], settings["m"], grid.shape)
  result = run_frbary(benchmark.inputs(), grid, schedule, opts)
  return BenchmarkRun(benchmark, grid, result)


def reference_objective(benchmark, grid, opts=None):
  """
  E(λ*) on the benchmark clouds, evaluated by grid quadrature.

  The true barycenter is discretized on the grid and scored with the same
  subsolvers a run uses, so it is directly comparable with trace objectives.
  """
  reference = GridDensity.from_gaussian(grid, benchmark.truth)
  return objective_estimate(reference, benchmark.inputs(), opts)


def optimality_gaps(trace, e_star):
  """
  Running best gap min_{j<=k} E(λ^j) − E(λ*) for every trace row.

  Rows without an evaluated objective carry the previous running minimum
  (NaN before the first evaluation).
  """
  objectives = trace.objectives() if hasattr(trace, "objectives") else np.asarray(trace, dtype=float)
  running = np.fmin.accumulate(objectives)
  return running - float(e_star)

#fin
