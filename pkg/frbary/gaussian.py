#!/usr/bin/env python3
"""
Closed-form mirror descent for Gaussian inputs and Bures-Wasserstein tools.

When every input is a centered Gaussian N(0, Σ_i) and the iterate is
N(0, S_k), the Kantorovich potential towards Σ_i is the quadratic
x ↦ ½ xᵀ(I − A_{i,k})x with

    A_{i,k} = S_k^{-1/2} (S_k^{1/2} Σ_i S_k^{1/2})^{1/2} S_k^{-1/2},

and the mirror step reduces to an additive update of the precision matrix:

    S_{k+1}^{-1} = S_k^{-1} + η_k (I − Σ_i w_i A_{i,k}).

Means never enter the covariance iteration; the barycenter mean is the
weighted mean of the input means and is combined separately.

SPD matrices are plain (d, d) numpy arrays validated by check_spd(); square
roots and inverses go through a symmetric eigendecomposition and are
symmetrized before being returned.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, MeasureError, StepTooLargeError
from .measures import GaussianMeasure

logger = logging.getLogger(__name__)

SPD_FLOOR = 1e-12
MAX_STEP_HALVINGS = 60


def _sym(a):
  return 0.5 * (a + a.T)


def check_spd(a, name="matrix"):
  """
  Validate a symmetric positive-definite matrix.

  Args:
      a (array-like): Square matrix
      name (str): Name used in error messages

  Returns:
      ndarray: The matrix as a float array.

  Raises:
      MeasureError: "invalid covariance" if a is not square, not symmetric
          within 1e-12 (relative to its largest entry), or has an eigenvalue
          <= 1e-12.
  """
  a = np.atleast_2d(np.asarray(a, dtype=float))
  if a.ndim != 2 or a.shape[0] != a.shape[1]:
    raise MeasureError(f"invalid covariance: {name} must be square, got shape {a.shape}")
  if not np.all(np.isfinite(a)):
    raise MeasureError(f"invalid covariance: {name} has non-finite entries")
  scale = max(1.0, float(np.max(np.abs(a))))
  if np.max(np.abs(a - a.T)) > 1e-12 * scale:
    raise MeasureError(f"invalid covariance: {name} is not symmetric")
  if linalg.eigvalsh(a).min() <= SPD_FLOOR:
    raise MeasureError(f"invalid covariance: {name} is not positive definite")
  return a


def _eig_apply(a, fn):
  w, v = linalg.eigh(_sym(a))
  return _sym((v * fn(w)) @ v.T)


def spd_sqrt(a):
  """
  Principal square root of an SPD matrix.

  Examples:
      >>> spd_sqrt(np.diag([4.0, 9.0]))
      array([[2., 0.],
             [0., 3.]])
  """
  a = check_spd(a, "spd_sqrt input")
  return _eig_apply(a, np.sqrt)


def gaussian_A_matrix(S, Sigma):
  """
  Linear part of the optimal map from N(0, S) to N(0, Σ).

  A = S^{-1/2} (S^{1/2} Σ S^{1/2})^{1/2} S^{-1/2}; it satisfies A S A = Σ.

  Raises:
      MeasureError: On dimension mismatch or non-SPD arguments.
  """
  S = check_spd(S, "S")
  Sigma = check_spd(Sigma, "Sigma")
  if S.shape != Sigma.shape:
    raise MeasureError(f"dimension mismatch: S is {S.shape}, Sigma is {Sigma.shape}")
  root = _eig_apply(S, np.sqrt)
  inv_root = _eig_apply(S, lambda w: 1.0 / np.sqrt(w))
  middle = _eig_apply(_sym(root @ Sigma @ root), lambda w: np.sqrt(np.maximum(w, 0.0)))
  return _sym(inv_root @ middle @ inv_root)


def gaussian_mirror_step(S, Sigmas, weights, eta):
  """
  One closed-form mirror step on the covariance.

  Args:
      S (ndarray): Current covariance S_k
      Sigmas (sequence of ndarray): Input covariances Σ_i
      weights (array-like): Barycentric weights w_i
      eta (float): Step size η_k >= 0

  Returns:
      ndarray: S_{k+1} = (S_k^{-1} + η (I − Σ w_i A_{i,k}))^{-1}

  Raises:
      StepTooLargeError: "step too large" if the updated precision has an
          eigenvalue <= 1e-12; the caller should shrink η.
  """
  S = check_spd(S, "S")
  weights = np.asarray(weights, dtype=float)
  if len(Sigmas) != weights.size:
    raise MeasureError(f"{len(Sigmas)} covariances but {weights.size} weights")
  if eta < 0:
    raise MeasureError("step size must be nonnegative")
  d = S.shape[0]
  averaged = sum(w * gaussian_A_matrix(S, Sigma) for w, Sigma in zip(weights, Sigmas))
  precision = _sym(_eig_apply(S, lambda w: 1.0 / w) + eta * (np.eye(d) - averaged))
  smallest = linalg.eigvalsh(precision).min()
  if smallest <= SPD_FLOOR:
    raise StepTooLargeError(f"step too large: updated precision has eigenvalue {smallest:.3e} at eta={eta:g}")
  return _eig_apply(precision, lambda w: 1.0 / w)


def bures_wasserstein_distance(g1, g2):
  """
  W₂ distance between two Gaussians.

  √(‖m₁ − m₂‖² + tr(Σ₁ + Σ₂ − 2 (Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2}))
  """
  if g1.dim != g2.dim:
    raise MeasureError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
  root = _eig_apply(g1.cov, np.sqrt)
  cross = _eig_apply(_sym(root @ g2.cov @ root), lambda w: np.sqrt(np.maximum(w, 0.0)))
  mean_term = float(np.sum((g1.mean - g2.mean) ** 2))
  trace_term = float(np.trace(g1.cov) + np.trace(g2.cov) - 2.0 * np.trace(cross))
  return float(np.sqrt(max(mean_term + trace_term, 0.0)))


def _centered(cov):
  return GaussianMeasure(np.zeros(cov.shape[0]), cov)


def gaussian_barycenter_ground_truth(Sigmas, weights, tol=1e-12, max_iter=10_000):
  """
  Barycenter covariance of centered Gaussians by fixed-point iteration.

  Iterates S ← S^{-1/2} (Σ_i w_i (S^{1/2} Σ_i S^{1/2})^{1/2})² S^{-1/2} from
  the weighted mean covariance until ‖S_{t+1} − S_t‖_F <= tol.

  Raises:
      ConvergenceError: If max_iter is reached first.
  """
  Sigmas = [check_spd(Sigma, f"Sigma[{i}]") for i, Sigma in enumerate(Sigmas)]
  weights = np.asarray(weights, dtype=float)
  S = _sym(sum(w * Sigma for w, Sigma in zip(weights, Sigmas)))
  for it in range(max_iter):
    root = _eig_apply(S, np.sqrt)
    inv_root = _eig_apply(S, lambda w: 1.0 / np.sqrt(w))
    mixed = sum(
      w * _eig_apply(_sym(root @ Sigma @ root), lambda v: np.sqrt(np.maximum(v, 0.0)))
      for w, Sigma in zip(weights, Sigmas)
    )
    updated = _sym(inv_root @ mixed @ mixed @ inv_root)
    change = linalg.norm(updated - S, "fro")
    S = updated
    if change <= tol:
      logger.debug("Fixed-point barycenter converged after %d iterations", it + 1)
      return S
  raise ConvergenceError(f"fixed-point barycenter did not converge in {max_iter} iterations (last change {change:.3e})")


def gaussian_barycenter(gaussians, weights, tol=1e-12):
  """Full Gaussian barycenter: weighted mean and fixed-point covariance."""
  weights = np.asarray(weights, dtype=float)
  mean = sum(w * g.mean for w, g in zip(weights, gaussians))
  cov = gaussian_barycenter_ground_truth([g.cov for g in gaussians], weights, tol=tol)
  return GaussianMeasure(mean, cov)


def barycenter_objective(gaussians, weights, candidate):
  """Closed-form E(N) = Σ_i w_i/2 · BW²(μ_i, N)."""
  return float(sum(
    0.5 * w * bures_wasserstein_distance(g, candidate) ** 2
    for w, g in zip(weights, gaussians)
  ))


def gaussian_kl(S, S_k):
  """KL(N(0, S) ‖ N(0, S_k)) = ½ (tr(S_k⁻¹ S) − ln(|S|/|S_k|) − d)."""
  S = check_spd(S, "S")
  S_k = check_spd(S_k, "S_k")
  d = S.shape[0]
  _, logdet = np.linalg.slogdet(S)
  _, logdet_k = np.linalg.slogdet(S_k)
  value = 0.5 * (np.trace(linalg.solve(S_k, S, assume_a="pos")) - (logdet - logdet_k) - d)
  return float(max(value, 0.0))


def random_spd(d, rng, eig_range=(0.5, 3.0)):
  """Random SPD matrix with eigenvalues drawn uniformly from eig_range."""
  q, r = np.linalg.qr(rng.standard_normal((d, d)))
  q = q * np.sign(np.diag(r))
  eigenvalues = rng.uniform(eig_range[0], eig_range[1], size=d)
  return _sym((q * eigenvalues) @ q.T)


@dataclass
class GaussianTrace:
  """Per-iteration record of a Gaussian run: step used, BW distance to truth and KL(N(0, S_k) ‖ N(0, S_{k+1}))."""
  etas: list = field(default_factory=list)
  bw_distances: list = field(default_factory=list)
  kl_steps: list = field(default_factory=list)

  def __len__(self):
    return len(self.bw_distances)

  def rows(self):
    for k, row in enumerate(zip(self.etas, self.bw_distances, self.kl_steps)):
      yield (k,) + row


def run_gaussian_frbary(Sigmas, weights, schedule, T=None, S0=None, truth=None):
  """
  Closed-form mirror descent on the barycenter covariance.

  Starting from S₀ (identity by default), applies gaussian_mirror_step for
  k = 0, ..., T−1. Before each step the Bures-Wasserstein distance of the
  iterate to the fixed-point ground truth is recorded; the final iterate is
  recorded too, so the trace has T + 1 entries. A step that would leave the
  precision matrix non-SPD is retried with η halved.

  Args:
      Sigmas (sequence of ndarray): Input covariances
      weights (array-like): Barycentric weights
      schedule (Schedule): Step sizes η_k
      T (int, optional): Number of steps; defaults to schedule.T
      S0 (ndarray, optional): Initial covariance
      truth (ndarray, optional): Ground-truth covariance; computed by
          gaussian_barycenter_ground_truth when omitted

  Returns:
      tuple: (S_T, GaussianTrace)
  """
  Sigmas = [check_spd(Sigma, f"Sigma[{i}]") for i, Sigma in enumerate(Sigmas)]
  d = Sigmas[0].shape[0]
  if any(Sigma.shape != (d, d) for Sigma in Sigmas):
    raise MeasureError("dimension mismatch between input covariances")
  T = schedule.T if T is None else int(T)
  S = np.eye(d) if S0 is None else check_spd(S0, "S0")
  if truth is None:
    truth = gaussian_barycenter_ground_truth(Sigmas, weights)
  target = _centered(truth)

  trace = GaussianTrace()
  for k in range(T + 1):
    distance = bures_wasserstein_distance(_centered(S), target)
    if k == T:
      trace.etas.append(0.0)
      trace.bw_distances.append(distance)
      trace.kl_steps.append(0.0)
      break
    eta = schedule.eta(k)
    for _ in range(MAX_STEP_HALVINGS):
      try:
        updated = gaussian_mirror_step(S, Sigmas, weights, eta)
        break
      except StepTooLargeError:
        logger.warning("Gaussian step too large at k=%d (eta=%g); halving", k, eta)
        eta *= 0.5
    else:
      raise StepTooLargeError(f"step too large at k={k} even after {MAX_STEP_HALVINGS} halvings")
    trace.etas.append(eta)
    trace.bw_distances.append(distance)
    trace.kl_steps.append(gaussian_kl(S, updated))
    S = updated
    logger.debug("Gaussian k=%d eta=%g BW=%.3e", k, eta, distance)
  return S, trace

#fin
