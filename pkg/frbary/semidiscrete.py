#!/usr/bin/env python3
"""
Semi-discrete optimal transport between a discrete measure and a grid density.

The dual problem

    max_φ I(φ) = Σ_i u_i φ_i + ∫ φ^c(y) dν(y),   φ^c(y) = min_i ‖y − x_i‖²/2 − φ_i

is concave in the atom potentials φ ∈ R^m. Under cell-center quadrature its
supergradient is u_i − ν(L_i(φ)), where ν(L_i) is the mass of the grid nodes
whose minimizer is atom i (their Laguerre cell). solve_semidiscrete() runs
gradient ascent with a halving line search on this exact discretized
objective; every sweep over the grid costs O(mM).

Ties at Laguerre boundaries go to the lowest atom index.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import MeasureError, NoProgressError

logger = logging.getLogger(__name__)

# Cost matrices up to this many entries are kept in memory across sweeps
DEFAULT_CACHE_LIMIT = 25_000_000
# Entries per block when the cost matrix is recomputed chunk by chunk
DEFAULT_CHUNK_ENTRIES = 2_000_000


@dataclass(frozen=True)
class SolverOptions:
  """
  Settings of the semi-discrete ascent.

  Attributes:
      tol_grad (float): Stop when max_i |u_i − ν(L_i)| <= tol_grad
      max_iters (int): Cap on accepted ascent steps per solve
      min_step (float): Line search gives up ("no-progress") below this step
      initial_step (float, optional): First trial step; defaults to vol(Ω)^(2/d)
      momentum (float): Heavy-ball coefficient in [0, 1); 0 disables it
      cache_limit (int): Largest M·m for which the cost matrix is cached
      chunk_entries (int): Block size for uncached sweeps
  """
  tol_grad: float = 1e-6
  max_iters: int = 500
  min_step: float = 1e-12
  initial_step: float = None
  momentum: float = 0.0
  cache_limit: int = DEFAULT_CACHE_LIMIT
  chunk_entries: int = DEFAULT_CHUNK_ENTRIES

  def __post_init__(self):
    if not self.tol_grad >= 0:
      raise MeasureError("tol_grad must be nonnegative")
    if int(self.max_iters) < 0:
      raise MeasureError("max_iters must be nonnegative")
    if not 0.0 <= self.momentum < 1.0:
      raise MeasureError("momentum must lie in [0, 1)")
    if not self.min_step > 0:
      raise MeasureError("min_step must be positive")


@dataclass(frozen=True, eq=False)
class PotentialVector:
  """Dual potential φ = (φ_1, ..., φ_m), one value per atom."""
  values: np.ndarray

  def __post_init__(self):
    values = np.array(self.values, dtype=float).ravel()
    if not np.all(np.isfinite(values)):
      raise MeasureError("potential values must be finite")
    values.setflags(write=False)
    object.__setattr__(self, "values", values)

  def __len__(self):
    return int(self.values.size)

  def shifted(self, c):
    return PotentialVector(self.values + c)


@dataclass(frozen=True, eq=False)
class GridPotential:
  """
  A potential sampled at the grid nodes.

  For semi-discrete solves `values` is the c-transform φ^c and `assignment`
  holds the Laguerre cell index of every node. Potentials coming from the
  discrete solver carry no assignment.
  """
  grid: object
  values: np.ndarray
  assignment: np.ndarray = None
  n_atoms: int = None

  def __post_init__(self):
    values = np.array(self.values, dtype=float).ravel()
    if values.size != self.grid.size:
      raise MeasureError(f"potential has {values.size} values, grid has {self.grid.size} nodes")
    values.setflags(write=False)
    object.__setattr__(self, "values", values)
    if self.assignment is not None:
      assignment = np.array(self.assignment, dtype=np.int64).ravel()
      if assignment.size != self.grid.size:
        raise MeasureError("assignment length does not match the grid")
      assignment.setflags(write=False)
      object.__setattr__(self, "assignment", assignment)

  def normalized(self):
    """Shift so the minimum over the grid is zero."""
    return GridPotential(self.grid, self.values - self.values.min(), self.assignment, self.n_atoms)


@dataclass(frozen=True, eq=False)
class SemiDiscreteSolution:
  """
  Result of solve_semidiscrete().

  Attributes:
      phi (PotentialVector): Atom potentials, normalized so min φ^c = 0
      c_transform (GridPotential): φ^c on the grid with Laguerre assignment
      dual_value (float): I(φ), the W₂²/2 estimate
      cell_masses (ndarray): ν(L_i(φ)) under grid quadrature
      iterations (int): Accepted ascent steps
      grad_norm (float): max_i |u_i − cell_masses_i|
      atoms (DiscreteMeasure): The (duplicate-merged) measure φ refers to
      step (float): Last line-search step, reusable for warm starts
      ascent_values (tuple): I(φ) at the start and after every accepted step
  """
  phi: PotentialVector
  c_transform: GridPotential
  dual_value: float
  cell_masses: np.ndarray
  iterations: int
  grad_norm: float
  atoms: object = None
  step: float = None
  ascent_values: tuple = ()


class LaguerreSweep:
  """
  Half squared distances between the grid nodes and a set of atoms.

  The (M, m) cost matrix is cached when M·m <= cache_limit and recomputed in
  row blocks otherwise. A sweep object reuses an internal buffer, so use one
  instance per worker.

  Args:
      grid (RegularGrid): Grid whose nodes are the y_j
      points (ndarray): (m, d) atom positions x_i
      cache_limit (int): Largest M·m kept in memory
      chunk_entries (int): Target entries per block for uncached sweeps
  """

  def __init__(self, grid, points, cache_limit=DEFAULT_CACHE_LIMIT, chunk_entries=DEFAULT_CHUNK_ENTRIES):
    self.grid = grid
    self.points = np.asarray(points, dtype=float)
    self.n_atoms = int(self.points.shape[0])
    self._rows = max(1, int(chunk_entries) // max(self.n_atoms, 1))
    self._cost = None
    self._buffer = None
    if grid.size * self.n_atoms <= cache_limit:
      self._cost = 0.5 * cdist(grid.nodes, self.points, "sqeuclidean")

  def _blocks(self):
    if self._cost is not None:
      yield slice(0, self.grid.size), self._cost
      return
    nodes = self.grid.nodes
    for start in range(0, self.grid.size, self._rows):
      rows = slice(start, min(self.grid.size, start + self._rows))
      yield rows, 0.5 * cdist(nodes[rows], self.points, "sqeuclidean")

  def sweep(self, phi):
    """
    c-transform of φ at every node.

    Returns:
        tuple: (values (M,), assignment (M,)) with values[j] = min_i c_ij − φ_i
        and assignment[j] the lowest minimizing index.
    """
    phi = np.asarray(phi, dtype=float)
    values = np.empty(self.grid.size)
    assignment = np.empty(self.grid.size, dtype=np.int64)
    for rows, cost in self._blocks():
      if self._buffer is None or self._buffer.shape != cost.shape:
        self._buffer = np.empty_like(cost)
      shifted = np.subtract(cost, phi, out=self._buffer)
      idx = np.argmin(shifted, axis=1)
      assignment[rows] = idx
      values[rows] = shifted[np.arange(idx.size), idx]
    return values, assignment

  def atom_transform(self, grid_values):
    """Reverse c-transform: min_j c_ij − g_j for every atom i."""
    grid_values = np.asarray(grid_values, dtype=float)
    out = np.full(self.n_atoms, np.inf)
    for rows, cost in self._blocks():
      np.minimum(out, (cost - grid_values[rows, None]).min(axis=0), out=out)
    return out


def _check_geometry(atoms, grid):
  if atoms.dim != grid.dim:
    raise MeasureError(f"dimension mismatch: atoms are {atoms.dim}D, grid is {grid.dim}D")
  outside = ~grid.domain.contains(atoms.points)
  if np.any(outside):
    raise MeasureError(f"{int(outside.sum())} atom(s) lie outside the grid domain {grid.domain!r}")


def _phi_array(phi):
  return phi.values if isinstance(phi, PotentialVector) else np.asarray(phi, dtype=float).ravel()


def c_transform(phi, atoms, grid):
  """
  Quadratic c-transform of atom potentials on the grid nodes.

  Args:
      phi (PotentialVector or array-like): m atom potentials
      atoms (DiscreteMeasure): The atoms x_i
      grid (RegularGrid): Evaluation grid sharing the atoms' domain

  Returns:
      GridPotential: values[j] = min_i ‖y_j − x_i‖²/2 − φ_i with the argmin
      (lowest index on ties) as assignment.
  """
  phi = _phi_array(phi)
  _check_geometry(atoms, grid)
  if phi.size != atoms.size:
    raise MeasureError(f"expected {atoms.size} potential values, got {phi.size}")
  sweep = LaguerreSweep(grid, atoms.points, cache_limit=0)
  values, assignment = sweep.sweep(phi)
  return GridPotential(grid, values, assignment, atoms.size)


def laguerre_masses(ct, nu):
  """
  ν-mass of every Laguerre cell under cell-center quadrature.

  Args:
      ct (GridPotential): c-transform with assignment
      nu (GridDensity): Density on the same grid

  Returns:
      ndarray: mass_i = Σ_{j: assignment[j] = i} Δ·ρ_j
  """
  if not ct.grid.same_as(nu.grid):
    raise MeasureError("c-transform and density live on different grids")
  if ct.assignment is None:
    raise MeasureError("potential carries no Laguerre assignment")
  n_atoms = ct.n_atoms if ct.n_atoms is not None else int(ct.assignment.max()) + 1
  return np.bincount(ct.assignment, weights=nu.masses, minlength=n_atoms)


def dual_objective(phi, mu_hat, nu):
  """
  Discretized semi-discrete dual I(φ) = Σ u_i φ_i + Σ_j Δ ρ_j φ^c(y_j).

  Examples:
      With a single atom the value does not depend on φ_1 and equals
      Σ_j Δ ρ_j ‖y_j − x_1‖²/2.
  """
  phi = _phi_array(phi)
  ct = c_transform(phi, mu_hat, nu.grid)
  return float(mu_hat.weights @ phi + nu.masses @ ct.values)


def _default_step(grid):
  return float(grid.domain.volume ** (2.0 / grid.dim))


class _Ascent:
  """Bookkeeping of one ascent run on a fixed (μ̂, ν) pair."""

  def __init__(self, mu, nu, sweep):
    self.mu = mu
    self.nu = nu
    self.sweep = sweep
    self.u = mu.weights
    self.w = nu.masses

  def evaluate(self, phi):
    values, assignment = self.sweep.sweep(phi)
    value = float(self.u @ phi + self.w @ values)
    masses = np.bincount(assignment, weights=self.w, minlength=self.mu.size)
    return value, values, assignment, masses

  def finish(self, phi, iterations, step, history=()):
    """
    Tighten φ to its grid double c-transform and shift so min φ^c = 0.

    The double c-transform leaves φ^c unchanged and can only raise the dual
    value; afterwards every atom potential is c-concave on the grid.
    """
    values, _ = self.sweep.sweep(phi)
    phi = self.sweep.atom_transform(values)
    values, _ = self.sweep.sweep(phi)
    phi = phi + values.min()
    value, values, assignment, masses = self.evaluate(phi)
    grad_norm = float(np.max(np.abs(self.u - masses)))
    grid = self.nu.grid
    return SemiDiscreteSolution(
      phi=PotentialVector(phi),
      c_transform=GridPotential(grid, values, assignment, self.mu.size),
      dual_value=value,
      cell_masses=masses,
      iterations=iterations,
      grad_norm=grad_norm,
      atoms=self.mu,
      step=step,
      ascent_values=tuple(history),
    )


def solve_semidiscrete(mu_hat, nu, opts=None, warm_start=None, sweep=None):
  """
  Maximize the semi-discrete dual between atoms and a grid density.

  Gradient ascent on I(φ) with a halving line search: a trial step is
  accepted only if it strictly increases I, after which the step doubles for
  the next iteration. Iteration stops once max_i |u_i − ν(L_i)| <= tol_grad or
  after opts.max_iters accepted steps. Duplicate atoms are merged first.

  Args:
      mu_hat (DiscreteMeasure): Atoms x_i with weights u_i
      nu (GridDensity): Normalized density on the grid
      opts (SolverOptions, optional): Tolerances and line search settings
      warm_start (PotentialVector or SemiDiscreteSolution, optional): Starting
          potentials for the merged atoms; a solution also passes its step
      sweep (LaguerreSweep, optional): Precomputed sweep for the merged atoms
          on nu's grid (reused across repeated solves)

  Returns:
      SemiDiscreteSolution: potentials normalized so that min φ^c = 0

  Raises:
      MeasureError: On dimension mismatch or atoms outside the grid domain.
      NoProgressError: "no-progress" when the line search falls below
          opts.min_step; the normalized solution so far is attached.
  """
  opts = opts or SolverOptions()
  grid = nu.grid
  mu = mu_hat.merge_duplicates()
  _check_geometry(mu, grid)
  if sweep is None:
    sweep = LaguerreSweep(grid, mu.points, opts.cache_limit, opts.chunk_entries)
  elif sweep.n_atoms != mu.size or not sweep.grid.same_as(grid):
    raise MeasureError("sweep does not match the atoms and grid being solved")
  ascent = _Ascent(mu, nu, sweep)

  step = opts.initial_step or _default_step(grid)
  phi = np.zeros(mu.size)
  if isinstance(warm_start, SemiDiscreteSolution):
    if warm_start.step:
      step = warm_start.step
    warm_start = warm_start.phi
  if warm_start is not None:
    if len(warm_start) == mu.size:
      phi = np.array(warm_start.values, dtype=float)
    else:
      logger.debug("Ignoring warm start of length %d for %d merged atoms", len(warm_start), mu.size)

  value, values, assignment, masses = ascent.evaluate(phi)
  history = [value]
  velocity = np.zeros_like(phi)
  iterations = 0
  while iterations < opts.max_iters:
    grad = ascent.u - masses
    if np.max(np.abs(grad)) <= opts.tol_grad:
      break
    direction = grad + opts.momentum * velocity
    if direction @ grad <= 0:
      direction = grad
    while True:
      trial = phi + step * direction
      t_value, t_values, t_assignment, t_masses = ascent.evaluate(trial)
      if t_value > value:
        break
      step *= 0.5
      if step < opts.min_step:
        solution = ascent.finish(phi, iterations, opts.min_step, history)
        raise NoProgressError(
          f"no-progress: line search fell below min_step {opts.min_step:g} "
          f"after {iterations} steps (grad_norm {solution.grad_norm:.3e})",
          solution=solution,
        )
    velocity = trial - phi
    phi, value, values, assignment, masses = trial, t_value, t_values, t_assignment, t_masses
    history.append(value)
    iterations += 1
    step *= 2.0
  else:
    logger.debug("Semi-discrete ascent stopped at max_iters=%d", opts.max_iters)

  solution = ascent.finish(phi, iterations, step, history)
  logger.debug(
    "Semi-discrete solve: %d steps, dual %.10g, grad_norm %.3e",
    iterations, solution.dual_value, solution.grad_norm,
  )
  return solution


def transport_cost_estimate(sol, mu_hat, nu):
  """
  W₂²(μ̂, ν) estimate from a converged solution: twice the dual value.

  Args:
      sol (SemiDiscreteSolution): Solution for (mu_hat, nu)
      mu_hat (DiscreteMeasure): The discrete measure that was solved
      nu (GridDensity): The density that was solved

  Returns:
      float: 2·I(φ)
  """
  if sol.c_transform.grid is not nu.grid and not sol.c_transform.grid.same_as(nu.grid):
    raise MeasureError("solution was computed on a different grid")
  if sol.atoms is not None and sol.atoms.dim != mu_hat.dim:
    raise MeasureError("solution was computed for a different measure")
  return 2.0 * sol.dual_value

#fin
