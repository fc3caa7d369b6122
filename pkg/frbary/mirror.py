#!/usr/bin/env python3
"""
Fisher-Rao mirror descent on grid densities.

The barycenter objective E(λ) = Σ w_i/2 · W₂²(μ_i, λ) is minimized over
densities on a fixed RegularGrid by the multiplicative update

    ρ^{k+1} ∝ ρ^k · exp(−η_k Σ_i w_i φ_{i,k}),

where φ_{i,k} is the Kantorovich potential on the ρ^k side of the transport
from ρ^k to μ_i. The update is carried out on log-values and renormalized
with lsp().

Each input is served by a route that knows how to compute its potential:

- point clouds go through the semi-discrete solver, keeping a cached
  LaguerreSweep and the previous solution as warm start;
- histograms (and densities, reduced to histograms) go through the exact
  discrete solver between the iterate's cells and the histogram's cells;
- Gaussians are sampled once into atoms and then behave like point clouds.

The n routes of one iteration run concurrently on joblib's threading
backend; their results come back in input order, so the averaged potential
is reduced deterministically.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .discrete import DEFAULT_SIZE_CAP, DEGENERATE_WEIGHT, solve_discrete
from .errors import (FRBaryError, InvariantViolation, MeasureError,
                     NoProgressError, SolverError)
from .gaussian import bures_wasserstein_distance
from .measures import (NORMALIZATION_TOL, DiscreteMeasure, GaussianMeasure,
                       GridDensity, GridHistogram, check_input_weights,
                       domain_radius, normalize_log_density, resample_to_grid)
from .rng import make_rng
from .semidiscrete import (GridPotential, LaguerreSweep, SolverOptions,
                           solve_semidiscrete)

logger = logging.getLogger(__name__)

SCHEDULE_KINDS = ("constant_over_sqrtT", "inverse_sqrt_k", "power", "constant")

# Slack added to the per-iteration bounds
KL_BOUND_SLACK = 1e-7
POTENTIAL_BOUND_SLACK = 1e-7
POTENTIAL_FLOOR = -1e-9

# Gaussian inputs are sampled in batches until enough draws land inside Ω
MAX_SAMPLING_ROUNDS = 100


@dataclass(frozen=True)
class Schedule:
  """
  Step sizes η_0, ..., η_T.

  Kinds:
      constant_over_sqrtT   η_k = c/√T
      inverse_sqrt_k        η_k = c/√(k+1)
      power                 η_k = c·(k+1)^(−alpha)
      constant              η_k = c

  Examples:
      >>> Schedule("power", c=0.1, alpha=0.3, T=100).eta(0)
      0.1
  """
  kind: str = "inverse_sqrt_k"
  c: float = 1.0
  alpha: float = 0.5
  T: int = 100

  def __post_init__(self):
    if self.kind not in SCHEDULE_KINDS:
      raise MeasureError(f"unknown schedule kind {self.kind!r} (expected one of {', '.join(SCHEDULE_KINDS)})")
    if not (math.isfinite(self.c) and self.c > 0):
      raise MeasureError(f"schedule constant c must be positive, got {self.c!r}")
    if not (math.isfinite(self.alpha) and self.alpha >= 0):
      raise MeasureError(f"schedule exponent alpha must be nonnegative, got {self.alpha!r}")
    if int(self.T) < 0:
      raise MeasureError(f"T must be nonnegative, got {self.T!r}")
    object.__setattr__(self, "T", int(self.T))

  def eta(self, k):
    if self.kind == "constant_over_sqrtT":
      return self.c / math.sqrt(max(self.T, 1))
    if self.kind == "inverse_sqrt_k":
      return self.c / math.sqrt(k + 1)
    if self.kind == "power":
      return self.c * (k + 1) ** (-self.alpha)
    return self.c


@dataclass(frozen=True)
class TraceRow:
  """
  One outer iteration.

  Attributes:
      k (int): Iteration index
      eta (float): Step used to go from ρ^k to ρ^{k+1}
      objective (float): E(ρ^k) estimate, NaN when not evaluated
      kl_step (float): KL(ρ^k ‖ ρ^{k+1})
      max_potential (float): max of the averaged potential
      wall_ms (float): Iteration wall time (0 unless timing is enabled)
      residuals (tuple): Inner solver residual per input
      inner_iterations (tuple): Inner solver steps per input
      normalization_error (float): |Δ·Σρ^{k+1} − 1|
  """
  k: int
  eta: float
  objective: float
  kl_step: float
  max_potential: float
  wall_ms: float
  residuals: tuple
  inner_iterations: tuple = ()
  normalization_error: float = 0.0


@dataclass
class RunTrace:
  rows: list = field(default_factory=list)

  def append(self, row):
    self.rows.append(row)

  def __len__(self):
    return len(self.rows)

  def __iter__(self):
    return iter(self.rows)

  def __getitem__(self, k):
    return self.rows[k]

  def objectives(self):
    return np.array([row.objective for row in self.rows], dtype=float)

  def kl_steps(self):
    return np.array([row.kl_step for row in self.rows], dtype=float)

  def best(self):
    """(k, objective) of the smallest evaluated objective."""
    values = self.objectives()
    if not np.any(np.isfinite(values)):
      return None, math.nan
    k = int(np.nanargmin(values))
    return self.rows[k].k, float(values[k])


@dataclass(frozen=True)
class BarycenterResult:
  """
  Outcome of run_frbary().

  `density` is the final iterate ρ^{T+1}, or ρ^{best_k} when the run was
  asked to store the best iterate.
  """
  density: GridDensity
  trace: RunTrace
  best_k: int
  best_objective: float
  final_density: GridDensity = None


@dataclass(frozen=True)
class MirrorOptions:
  """
  Settings of run_frbary().

  Attributes:
      solver (SolverOptions): Semi-discrete ascent settings
      eval_every (int): Objective stride; k = T is always evaluated
      strict (bool): Raise InvariantViolation instead of warning
      threads (int): Worker threads for the per-input solves
      gaussian_samples (int): Atoms drawn per Gaussian input
      gaussian_surrogate (bool): Score Gaussian inputs in closed form against
          a moment-matched Gaussian instead of their sampled atoms
      seed (int): Root seed for Gaussian sampling
      store_best (bool): Return the best iterate instead of the last one
      timing (bool): Record wall time per iteration
      initial (GridDensity, optional): Starting density (uniform by default)
      size_cap (int): Largest discrete instance for histogram inputs
      divergence_factor (float): Abort once the objective rises by more than
          this multiple of its first value
  """
  solver: SolverOptions = field(default_factory=SolverOptions)
  eval_every: int = 1
  strict: bool = False
  threads: int = 1
  gaussian_samples: int = 2000
  gaussian_surrogate: bool = False
  seed: int = 0
  store_best: bool = False
  timing: bool = False
  initial: GridDensity = None
  size_cap: int = DEFAULT_SIZE_CAP
  divergence_factor: float = 10.0

  def __post_init__(self):
    if int(self.eval_every) < 1:
      raise MeasureError("eval_every must be at least 1")
    if int(self.threads) < 1:
      raise MeasureError("threads must be at least 1")
    if int(self.gaussian_samples) < 1:
      raise MeasureError("gaussian_samples must be at least 1")


@dataclass(frozen=True)
class RoutePotential:
  """Potential of one input at the current iterate, plus its diagnostics."""
  potential: np.ndarray
  cost: float
  residual: float
  iterations: int


def averaged_potential(potentials, weights):
  """
  Pointwise weighted sum Σ w_i φ_i of grid potentials.

  Args:
      potentials (sequence of GridPotential): All on the same grid
      weights (array-like): One weight per potential

  Returns:
      ndarray: M values

  Raises:
      MeasureError: On grid mismatch or a weight count mismatch.

  Examples:
      >>> averaged_potential([zeros, fours], [0.25, 0.75])    # doctest: +SKIP
      array([3., 3., ...])
  """
  weights = np.asarray(weights, dtype=float)
  if len(potentials) == 0 or len(potentials) != weights.size:
    raise MeasureError(f"{len(potentials)} potentials but {weights.size} weights")
  grid = potentials[0].grid
  total = np.zeros(grid.size)
  for w, potential in zip(weights, potentials):
    if not potential.grid.same_as(grid):
      raise MeasureError("potentials live on different grids")
    total += w * potential.values
  return total


def mirror_step(rho, phi_bar, eta):
  """
  Multiplicative update of a grid density.

  log ρ' = log ρ − η·φ̄, renormalized on the grid.

  Args:
      rho (GridDensity): Current iterate
      phi_bar (array-like): Averaged potential at the grid nodes
      eta (float): Step size >= 0

  Returns:
      tuple: (GridDensity, kl_step) with kl_step = Δ·Σ ρ (log ρ − log ρ')

  Raises:
      MeasureError: "non-finite log-density" if the update overflows.
  """
  phi_bar = np.asarray(phi_bar, dtype=float).ravel()
  if phi_bar.size != rho.grid.size:
    raise MeasureError(f"potential has {phi_bar.size} values, grid has {rho.grid.size} nodes")
  if not np.all(np.isfinite(phi_bar)):
    raise MeasureError("averaged potential has non-finite values")
  if not eta >= 0:
    raise MeasureError(f"step size must be nonnegative, got {eta!r}")
  updated = normalize_log_density(GridDensity(rho.grid, rho.log_values - eta * phi_bar))
  kl_step = float(rho.grid.cell_volume * np.sum(rho.values * (rho.log_values - updated.log_values)))
  return updated, max(kl_step, 0.0)


def _with_context(err, prefix):
  """Same exception type with a prefixed message, falling back to SolverError."""
  message = f"{prefix}: {err}"
  try:
    wrapped = type(err)(message)
  except TypeError:
    wrapped = SolverError(message)
  if isinstance(err, NoProgressError):
    wrapped.solution = err.solution
  return wrapped


class _SemiDiscreteRoute:
  """Point-cloud input solved against the iterate by semi-discrete ascent."""

  def __init__(self, atoms, grid, opts):
    self.atoms = atoms.merge_duplicates()
    outside = ~grid.domain.contains(self.atoms.points)
    if np.any(outside):
      raise MeasureError(f"{int(outside.sum())} atom(s) lie outside the grid domain {grid.domain!r}")
    self.opts = opts.solver
    self.sweep = LaguerreSweep(grid, self.atoms.points, self.opts.cache_limit, self.opts.chunk_entries)
    self.last = None

  def solve(self, rho):
    try:
      sol = solve_semidiscrete(self.atoms, rho, self.opts, warm_start=self.last, sweep=self.sweep)
    except NoProgressError as err:
      sol = err.solution
      logger.debug("Semi-discrete solve stalled; using its best potential (grad_norm %.3e)", sol.grad_norm)
    self.last = sol
    return RoutePotential(sol.c_transform.values, sol.dual_value, sol.grad_norm, sol.iterations)


class _DiscreteRoute:
  """Histogram input solved exactly against the iterate's cell masses."""

  def __init__(self, target, opts):
    self.target = target
    self.size_cap = opts.size_cap

  def solve(self, rho):
    source = rho.as_discrete()
    plan, duals = solve_discrete(source, self.target, size_cap=self.size_cap, min_weight=0.0, merge=False)
    gap = abs(plan.cost - duals.value(source, self.target)) / (1.0 + plan.cost)
    return RoutePotential(duals.phi, plan.cost, gap, plan.nnz)


class _GaussianRoute(_SemiDiscreteRoute):
  """Gaussian input represented by seeded samples inside the domain."""

  def __init__(self, gaussian, grid, opts, rng):
    self.gaussian = gaussian
    self.surrogate = opts.gaussian_surrogate
    points = _sample_inside(gaussian, grid.domain, opts.gaussian_samples, rng)
    super().__init__(DiscreteMeasure.create(points, domain=grid.domain), grid, opts)

  def solve(self, rho):
    result = super().solve(rho)
    if not self.surrogate:
      return result
    mean, cov = rho.moments()
    cost = 0.5 * bures_wasserstein_distance(self.gaussian, GaussianMeasure(mean, cov)) ** 2
    return RoutePotential(result.potential, cost, result.residual, result.iterations)


def _sample_inside(gaussian, domain, n, rng):
  """Draw n samples of a Gaussian that fall inside the domain."""
  kept = []
  count = 0
  for _ in range(MAX_SAMPLING_ROUNDS):
    draws = gaussian.sample(max(n - count, 16) * 2, rng)
    draws = draws[domain.contains(draws)]
    kept.append(draws)
    count += draws.shape[0]
    if count >= n:
      return np.concatenate(kept)[:n]
  raise MeasureError(f"gaussian input has too little mass inside the domain {domain!r}")


def _make_route(index, inp, grid, opts):
  measure = inp.measure
  if measure.dim != grid.dim:
    raise MeasureError(f"dimension mismatch: input {index} is {measure.dim}D, grid is {grid.dim}D")
  if isinstance(measure, DiscreteMeasure):
    return _SemiDiscreteRoute(measure, grid, opts)
  if isinstance(measure, GaussianMeasure):
    return _GaussianRoute(measure, grid, opts, make_rng(opts.seed, index))
  if isinstance(measure, GridDensity):
    measure = measure.as_histogram() if measure.grid.same_as(grid) else resample_to_grid(measure, grid)
  if isinstance(measure, GridHistogram):
    target = measure.as_discrete(min_weight=DEGENERATE_WEIGHT)
    outside = ~grid.domain.contains(target.points)
    if np.any(outside):
      raise MeasureError(f"input {index} has {int(outside.sum())} cell(s) outside the grid domain")
    return _DiscreteRoute(target, opts)
  raise MeasureError(f"unsupported input measure type {type(measure).__name__}")


def _check(ok, message, strict):
  if ok:
    return
  if strict:
    raise InvariantViolation(message)
  logger.warning("Invariant violated: %s", message)


def diverged(objective, first_objective, factor, floor):
  """
  Whether the objective rose by more than `factor` times its first value.

  The first value is raised to `floor` so runs that start at (numerically)
  zero objective are not stopped by quadrature noise.
  """
  return objective - first_objective > factor * max(first_objective, floor)


def _initial_density(grid, initial):
  if initial is None:
    return GridDensity.uniform(grid)
  if not initial.grid.same_as(grid):
    raise MeasureError("initial density lives on a different grid")
  return normalize_log_density(initial)


def _solve_routes(parallel, routes, inputs, rho, k):
  def run(i, route):
    try:
      return route.solve(rho)
    except FRBaryError as err:
      raise _with_context(err, f"input {i} ({inputs[i].name}), iteration {k}") from err
  return parallel(delayed(run)(i, route) for i, route in enumerate(routes))


def run_frbary(inputs, grid, schedule, opts=None, sink=None):
  """
  Minimize the barycenter objective over grid densities.

  For k = 0, ..., T every input's potential at ρ^k is computed, the weighted
  average is applied in a mirror step, and a TraceRow is recorded (and passed
  to `sink` when given). The objective at ρ^k is the weighted sum of the
  subproblem transport costs that come with the potentials.

  Args:
      inputs (list of InputMeasure): Weighted inputs, weights summing to 1
      grid (RegularGrid): Grid the barycenter lives on
      schedule (Schedule): Step sizes
      opts (MirrorOptions, optional): Run settings
      sink (callable, optional): Called with every TraceRow as it is produced

  Returns:
      BarycenterResult

  Raises:
      MeasureError: Invalid inputs, dimension mismatch, inputs outside Ω.
      SolverError: Subsolver failure (message names input and iteration) or
          divergence of the objective.
      InvariantViolation: A per-iteration bound failed and opts.strict is set.
  """
  opts = opts or MirrorOptions()
  check_input_weights(inputs)
  weights = np.array([inp.weight for inp in inputs])
  routes = [_make_route(i, inp, grid, opts) for i, inp in enumerate(inputs)]
  radius = domain_radius(grid.domain)
  potential_bound = 2.0 * radius ** 2 + POTENTIAL_BOUND_SLACK
  # squared cell diagonal, the quadrature resolution of the objective
  divergence_floor = float(np.sum(grid.cell_widths ** 2))

  rho = _initial_density(grid, opts.initial)
  trace = RunTrace()
  best_k, best_objective, best_density = None, math.inf, None
  first_objective = None
  logger.info("Running %d outer iterations on %s grid with %d input(s)", schedule.T + 1, grid.shape, len(inputs))

  with Parallel(n_jobs=int(opts.threads), backend="threading") as parallel:
    for k in range(schedule.T + 1):
      started = time.perf_counter()
      results = _solve_routes(parallel, routes, inputs, rho, k)
      phi_bar = averaged_potential([GridPotential(grid, r.potential) for r in results], weights)
      evaluate = k % opts.eval_every == 0 or k == schedule.T
      objective = float(sum(w * r.cost for w, r in zip(weights, results))) if evaluate else math.nan

      eta = schedule.eta(k)
      try:
        updated, kl_step = mirror_step(rho, phi_bar, eta)
      except FRBaryError as err:
        raise _with_context(err, f"iteration {k}") from err

      max_potential = float(phi_bar.max())
      _check(phi_bar.min() >= POTENTIAL_FLOOR and max_potential <= potential_bound,
             f"iteration {k}: averaged potential range [{phi_bar.min():.6g}, {max_potential:.6g}] "
             f"outside [0, 2R²={potential_bound:.6g}]", opts.strict)
      kl_bound = 2.0 * eta ** 2 * radius ** 4 + KL_BOUND_SLACK
      _check(kl_step <= kl_bound, f"iteration {k}: KL step {kl_step:.6g} exceeds 2η²R⁴ = {kl_bound:.6g}", opts.strict)
      normalization_error = updated.normalization_error()
      _check(normalization_error <= NORMALIZATION_TOL,
             f"iteration {k}: normalization error {normalization_error:.3e}", opts.strict)

      wall_ms = (time.perf_counter() - started) * 1000.0 if opts.timing else 0.0
      row = TraceRow(
        k=k, eta=eta, objective=objective, kl_step=kl_step, max_potential=max_potential,
        wall_ms=wall_ms, residuals=tuple(float(r.residual) for r in results),
        inner_iterations=tuple(int(r.iterations) for r in results),
        normalization_error=normalization_error,
      )
      trace.append(row)
      if sink is not None:
        sink(row)
      logger.debug("k=%d eta=%.6g objective=%.10g kl=%.3e", k, eta, objective, kl_step)

      if evaluate:
        if objective < best_objective:
          best_k, best_objective = k, objective
          if opts.store_best:
            best_density = rho
        if first_objective is None:
          first_objective = objective
        elif diverged(objective, first_objective, opts.divergence_factor, divergence_floor):
          raise SolverError(
            f"diverged at iteration {k}: objective {objective:.6g} rose by more than "
            f"{opts.divergence_factor:g}× the initial {first_objective:.6g}"
          )
      rho = updated

  logger.info("Best objective %.10g at k=%d", best_objective, best_k)
  density = best_density if opts.store_best and best_density is not None else rho
  return BarycenterResult(density, trace, best_k, best_objective, final_density=rho)


def objective_estimate(rho, inputs, opts=None):
  """
  E(ρ) = Σ w_i/2 · W₂²(μ_i, ρ) from one subproblem solve per input.

  Gaussian inputs are scored on sampled atoms unless opts.gaussian_surrogate
  is set, in which case the closed-form Bures-Wasserstein cost against the
  Gaussian with ρ's moments is used.
  """
  opts = opts or MirrorOptions()
  check_input_weights(inputs)
  total = 0.0
  for i, inp in enumerate(inputs):
    route = _make_route(i, inp, rho.grid, opts)
    try:
      total += inp.weight * route.solve(rho).cost
    except FRBaryError as err:
      raise _with_context(err, f"input {i} ({inp.name})") from err
  return float(total)

#fin
