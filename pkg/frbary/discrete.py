#!/usr/bin/env python3
"""
Exact discrete-to-discrete optimal transport with dual potentials.

solve_discrete() hands the transportation problem with cost ‖x_i − y_j‖²/2 to
POT's network simplex (ot.emd), which returns a vertex solution together with
dual variables. The duals are then tightened by a double c-transform so they
are c-concave, and shifted so that min φ = 0.

oracle_assignment() enumerates permutations and serves as an independent
check for small uniform instances.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np
import ot
from scipy.spatial.distance import cdist

from .errors import InstanceTooLargeError, MeasureError, SolverError

logger = logging.getLogger(__name__)

DEFAULT_SIZE_CAP = 4_000_000
DEGENERATE_WEIGHT = 1e-15
ORACLE_MAX_ATOMS = 8
DEFAULT_MAX_PIVOTS = 10_000_000


@dataclass(frozen=True, eq=False)
class TransportPlan:
  """
  Sparse coupling between two discrete measures.

  Attributes:
      rows (int): m₁
      cols (int): m₂
      row_index, col_index, mass (ndarray): Nonzero entries (i, j, mass)
      cost (float): Σ mass·‖x_i − y_j‖²/2
  """
  rows: int
  cols: int
  row_index: np.ndarray
  col_index: np.ndarray
  mass: np.ndarray
  cost: float

  @property
  def entries(self):
    return list(zip(self.row_index.tolist(), self.col_index.tolist(), self.mass.tolist()))

  @property
  def nnz(self):
    return int(self.mass.size)

  def dense(self):
    plan = np.zeros((self.rows, self.cols))
    plan[self.row_index, self.col_index] = self.mass
    return plan

  def row_sums(self):
    return np.bincount(self.row_index, weights=self.mass, minlength=self.rows)

  def col_sums(self):
    return np.bincount(self.col_index, weights=self.mass, minlength=self.cols)


@dataclass(frozen=True, eq=False)
class DualPair:
  """Kantorovich potentials φ (first measure) and ψ (second measure)."""
  phi: np.ndarray
  psi: np.ndarray

  def value(self, mu1, mu2):
    return float(mu1.weights @ self.phi + mu2.weights @ self.psi)


def half_sq_cost(points1, points2):
  """(m₁, m₂) matrix of ‖x_i − y_j‖²/2."""
  return 0.5 * cdist(np.asarray(points1, dtype=float), np.asarray(points2, dtype=float), "sqeuclidean")


def discrete_c_transform(phi, atoms1, atoms2):
  """
  Discrete c-transform ψ_j = min_i ‖x_i − y_j‖²/2 − φ_i.

  Args:
      phi (array-like): m₁ potentials on the first atoms
      atoms1 (array-like): (m₁, d) first atom positions
      atoms2 (array-like): (m₂, d) second atom positions

  Returns:
      ndarray: m₂ values; ties resolve to the lowest i.
  """
  phi = np.asarray(phi, dtype=float).ravel()
  atoms1 = np.atleast_2d(np.asarray(atoms1, dtype=float))
  atoms2 = np.atleast_2d(np.asarray(atoms2, dtype=float))
  if atoms1.shape[1] != atoms2.shape[1]:
    raise MeasureError("dimension mismatch between atom sets")
  if phi.size != atoms1.shape[0]:
    raise MeasureError(f"expected {atoms1.shape[0]} potential values, got {phi.size}")
  return (half_sq_cost(atoms2, atoms1) - phi).min(axis=1)


def _tighten(cost, psi):
  """Double c-transform: φ = ψ^c, then ψ = φ^c."""
  phi = (cost - psi[None, :]).min(axis=1)
  psi = (cost - phi[:, None]).min(axis=0)
  return phi, psi


def solve_discrete(mu1, mu2, size_cap=DEFAULT_SIZE_CAP, min_weight=DEGENERATE_WEIGHT,
                   max_pivots=DEFAULT_MAX_PIVOTS, merge=True):
  """
  Solve the discrete OT problem exactly and return the plan and duals.

  Args:
      mu1 (DiscreteMeasure): Source atoms and weights
      mu2 (DiscreteMeasure): Target atoms and weights
      size_cap (int): Largest allowed m₁·m₂
      min_weight (float): Smallest allowed marginal weight after merging;
          pass 0.0 to accept vanishing weights (they keep well-defined duals)
      max_pivots (int): Network simplex iteration cap
      merge (bool): Merge duplicate atoms before solving

  Returns:
      tuple: (TransportPlan, DualPair) on the merged atoms, with duals shifted
      so that min φ = 0.

  Raises:
      MeasureError: On dimension mismatch or "degenerate weights".
      InstanceTooLargeError: "instance too large" when m₁·m₂ > size_cap.
      SolverError: If the network simplex does not reach optimality.
  """
  if mu1.dim != mu2.dim:
    raise MeasureError(f"dimension mismatch: {mu1.dim}D vs {mu2.dim}D")
  if merge:
    mu1 = mu1.merge_duplicates()
    mu2 = mu2.merge_duplicates()
  m1, m2 = mu1.size, mu2.size
  if m1 * m2 > size_cap:
    raise InstanceTooLargeError(f"instance too large: {m1}×{m2} entries exceed the cap of {size_cap}")
  if min(mu1.weights.min(), mu2.weights.min()) < min_weight:
    raise MeasureError(f"degenerate weights: a marginal weight is below {min_weight:g}")

  cost = half_sq_cost(mu1.points, mu2.points)
  a = np.ascontiguousarray(mu1.weights)
  b = np.ascontiguousarray(mu2.weights * (a.sum() / mu2.weights.sum()))
  plan, log = ot.emd(a, b, cost, numItermax=int(max_pivots), log=True)
  if log.get("warning"):
    raise SolverError(f"network simplex failed: {log['warning']}")

  phi, psi = _tighten(cost, np.asarray(log["v"], dtype=float))
  shift = phi.min()
  phi = phi - shift
  psi = psi + shift

  rows, cols = np.nonzero(plan > 0)
  mass = plan[rows, cols]
  total = float(mass @ cost[rows, cols])
  transport = TransportPlan(m1, m2, rows, cols, mass, total)
  duals = DualPair(phi, psi)
  logger.debug("Discrete solve %dx%d: cost %.12g, %d nonzeros", m1, m2, total, transport.nnz)
  return transport, duals


def oracle_assignment(mu1, mu2):
  """
  Brute-force optimal assignment cost for small uniform instances.

  Enumerates all m! permutations; cost uses the same ‖x − y‖²/2 convention
  as solve_discrete.

  Raises:
      MeasureError: "oracle size exceeded" unless m₁ = m₂ <= 8 with uniform
          weights.
  """
  m = mu1.size
  if m != mu2.size or m > ORACLE_MAX_ATOMS or not (mu1.is_uniform() and mu2.is_uniform()):
    raise MeasureError(f"oracle size exceeded: needs equal uniform measures with at most {ORACLE_MAX_ATOMS} atoms")
  if mu1.dim != mu2.dim:
    raise MeasureError("dimension mismatch between measures")
  cost = half_sq_cost(mu1.points, mu2.points)
  rows = np.arange(m)
  best = min(cost[rows, list(perm)].sum() for perm in itertools.permutations(range(m)))
  return float(best / m)

#fin
