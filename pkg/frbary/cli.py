#!/usr/bin/env python3
"""
Command-line interface for frbary.

Usage:
  frbary barycenter [-c CONFIG] [OPTIONS] [INPUT...]
  frbary gaussian   [-c CONFIG] [OPTIONS] [INPUT...]
  frbary sample DENSITY -n N [--seed S] [-o FILE]
  frbary ot SOURCE TARGET [--source-kind K] [--target-kind K]

Inputs are given as `path[:kind[:weight]]`; the kind is inferred from the
extension when omitted (.csv, .grid, .gauss, .pgm).

Exit codes:
  0  success
  1  file could not be read or written, or an unexpected error
  2  usage error
  3  parse or validation error
  4  solver error
  5  invariant violation (strict mode)

Example:
  # Barycenter of two point clouds on a 64x64 grid
  frbary barycenter a.csv b.csv --grid 64x64 -T 100

  # Print every setting a config file resolves to
  frbary barycenter -c run.cfg --dump-config
"""

import argparse
import logging
import sys

import numpy as np

from . import __version__, set_warning_output
from .config import build_config, dump_config, load_inputs, resolve_grid
from .discrete import solve_discrete
from .errors import FRBaryError, MeasureError, UsageError
from .evaluation import rejection_sample
from .gaussian import bures_wasserstein_distance, run_gaussian_frbary
from .io import (TraceWriter, fmt, ingest, write_gaussian,
                 write_gaussian_trace, write_grid, write_points,
                 write_summary)
from .measures import (DiscreteMeasure, GaussianMeasure, GridDensity,
                       GridHistogram)
from .mirror import run_frbary
from .semidiscrete import solve_semidiscrete, transport_cost_estimate

logger = logging.getLogger(__name__)

# argparse destination -> config key, for flags shared by run commands
RUN_FLAGS = (
  ("--grid", "grid", str, "Grid cells per axis, e.g. 64x64"),
  ("--domain", "domain", str, "'auto' or 'lo1 hi1 ... lod hid'"),
  ("--margin", "margin", float, "Auto domain margin as a fraction of the support width"),
  ("--schedule", "schedule", str, "Step schedule: constant_over_sqrtT, inverse_sqrt_k, power, constant"),
  ("--step-c", "step_c", float, "Step size constant c"),
  ("--step-alpha", "step_alpha", float, "Exponent of the power schedule"),
  ("-T", "T", int, "Number of mirror steps"),
  ("--tol-grad", "tol_grad", float, "Semi-discrete gradient tolerance"),
  ("--max-iters", "max_iters", int, "Semi-discrete ascent step cap"),
  ("--seed", "seed", int, "Random seed"),
  ("--out-density", "out_density", str, "Barycenter density file"),
  ("--out-trace", "out_trace", str, "Trace CSV file"),
  ("--out-summary", "out_summary", str, "Summary file"),
  ("--out-covariance", "out_covariance", str, "Gaussian barycenter file"),
  ("--eval-every", "eval_every", int, "Evaluate the objective every N iterations"),
  ("--threads", "threads", int, "Worker threads for per-input solves"),
  ("--gaussian-samples", "gaussian_samples", int, "Atoms sampled per Gaussian input"),
  ("--gaussian-init", "gaussian_init", str, "Gaussian start covariance: identity or mean"),
)
RUN_SWITCHES = (
  ("--strict", "strict", "Abort on invariant violations"),
  ("--store-best", "store_best", "Write the best iterate instead of the last one"),
  ("--timing", "timing", "Record wall time per iteration in the trace"),
)


def _add_run_options(parser):
  parser.add_argument("inputs", nargs="*", help="Input files as path[:kind[:weight]]")
  parser.add_argument("-c", "--config", help="key = value config file")
  parser.add_argument("--dump-config", action="store_true", help="Print the effective configuration and exit")
  for flag, dest, kind, text in RUN_FLAGS:
    parser.add_argument(flag, dest=dest, type=kind, default=None, help=text)
  for flag, dest, text in RUN_SWITCHES:
    parser.add_argument(flag, dest=dest, action="store_const", const=True, default=None, help=text)


def _run_config(args):
  overrides = {dest: getattr(args, dest) for _, dest, _, _ in RUN_FLAGS}
  overrides.update({dest: getattr(args, dest) for _, dest, _ in RUN_SWITCHES})
  if args.inputs:
    overrides["inputs"] = args.inputs
  return build_config(args.config, overrides)


def cmd_barycenter(args):
  """Run mirror descent on the configured inputs and write density, trace and summary."""
  cfg = _run_config(args)
  if args.dump_config:
    sys.stdout.write(dump_config(cfg))
    return 0
  inputs = load_inputs(cfg)
  grid = resolve_grid(cfg, inputs)
  schedule = cfg.schedule_obj()
  logger.info("Grid %s over %s, T=%d", grid.shape, grid.domain, schedule.T)
  with TraceWriter(cfg.out_trace, len(inputs)) as sink:
    result = run_frbary(inputs, grid, schedule, cfg.mirror_options(), sink=sink)
  write_grid(cfg.out_density, result.density)
  final = result.trace[-1]
  write_summary(cfg.out_summary, {
    "best_k": result.best_k,
    "best_objective": result.best_objective,
    "final_objective": final.objective,
    "iterations": len(result.trace),
    "grid": "x".join(str(n) for n in grid.shape),
    "domain": " ".join(fmt(v) for v in grid.domain.bounds()),
    "seed": cfg.seed,
  })
  print(f"best_k={result.best_k} best_objective={fmt(result.best_objective)}")
  return 0


def cmd_gaussian(args):
  """Closed-form mirror descent for Gaussian inputs."""
  cfg = _run_config(args)
  if args.dump_config:
    sys.stdout.write(dump_config(cfg))
    return 0
  inputs = load_inputs(cfg)
  gaussians = [inp.measure for inp in inputs]
  if not all(isinstance(g, GaussianMeasure) for g in gaussians):
    raise UsageError("the gaussian command needs Gaussian inputs (.gauss files)")
  if len({g.dim for g in gaussians}) != 1:
    raise MeasureError("dimension mismatch between Gaussian inputs")
  weights = np.array([inp.weight for inp in inputs])
  Sigmas = [g.cov for g in gaussians]
  S0 = None
  if cfg.gaussian_init == "mean":
    S0 = sum(w * Sigma for w, Sigma in zip(weights, Sigmas))
  S, trace = run_gaussian_frbary(Sigmas, weights, cfg.schedule_obj(), S0=S0)
  mean = sum(w * g.mean for w, g in zip(weights, gaussians))
  write_gaussian(cfg.out_covariance, GaussianMeasure(mean, S))
  write_gaussian_trace(cfg.out_trace, trace)
  final = trace.bw_distances[-1]
  write_summary(cfg.out_summary, {"final_bw_distance": final, "iterations": len(trace)})
  print(f"final_bw_distance={fmt(final)}")
  return 0


def cmd_sample(args):
  """Draw samples from a density file."""
  if args.n < 1:
    raise UsageError(f"sample count must be at least 1, got {args.n}")
  density = ingest(args.density, "density_grid").measure
  samples = rejection_sample(density, args.n, args.seed)
  write_points(args.out, samples.points)
  logger.info("Wrote %d samples to %s", len(samples), args.out)
  return 0


def _as_atoms(measure):
  if isinstance(measure, DiscreteMeasure):
    return measure
  if isinstance(measure, (GridHistogram, GridDensity)):
    histogram = measure if isinstance(measure, GridHistogram) else measure.as_histogram()
    return histogram.as_discrete()
  raise UsageError(f"cannot use a {type(measure).__name__} here")


def transport(source, target):
  """
  One OT solve between two ingested measures.

  Returns:
      tuple: (W₂² estimate, dual residual)
  """
  if source.dim != target.dim:
    raise MeasureError(f"dimension mismatch: {source.dim}D vs {target.dim}D")
  if isinstance(source, GaussianMeasure) and isinstance(target, GaussianMeasure):
    return bures_wasserstein_distance(source, target) ** 2, 0.0
  if isinstance(source, GridDensity) and isinstance(target, DiscreteMeasure):
    source, target = target, source
  if isinstance(source, DiscreteMeasure) and isinstance(target, GridDensity):
    sol = solve_semidiscrete(source, target)
    return transport_cost_estimate(sol, source, target), sol.grad_norm
  mu1, mu2 = _as_atoms(source), _as_atoms(target)
  plan, duals = solve_discrete(mu1, mu2, min_weight=0.0)
  merged1, merged2 = mu1.merge_duplicates(), mu2.merge_duplicates()
  return 2.0 * plan.cost, abs(plan.cost - duals.value(merged1, merged2))


def cmd_ot(args):
  source = ingest(args.source, args.source_kind).measure
  target = ingest(args.target, args.target_kind).measure
  w2, residual = transport(source, target)
  print(f"w2_squared={fmt(w2)}")
  print(f"dual_residual={fmt(residual)}")
  return 0


def build_parser():
  parser = argparse.ArgumentParser(
    prog="frbary",
    description="Wasserstein barycenters by Fisher-Rao mirror descent",
  )
  parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
  parser.add_argument("--verbose", "-v", action="store_true", help="Show processing details")
  sub = parser.add_subparsers(dest="command", metavar="COMMAND")
  sub.required = True

  barycenter = sub.add_parser("barycenter", help="Barycenter of point clouds, histograms, densities or Gaussians")
  _add_run_options(barycenter)
  barycenter.set_defaults(func=cmd_barycenter)

  gaussian = sub.add_parser("gaussian", help="Closed-form barycenter of Gaussian inputs")
  _add_run_options(gaussian)
  gaussian.set_defaults(func=cmd_gaussian)

  sample = sub.add_parser("sample", help="Sample a density file")
  sample.add_argument("density", help="Density grid file")
  sample.add_argument("-n", type=int, required=True, help="Number of samples")
  sample.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
  sample.add_argument("-o", "--out", default="samples.csv", help="Output CSV (default: samples.csv)")
  sample.set_defaults(func=cmd_sample)

  ot = sub.add_parser("ot", help="Single OT solve, printing the W2 squared estimate and dual residual")
  ot.add_argument("source")
  ot.add_argument("target")
  ot.add_argument("--source-kind", default=None, help="Ingest kind of the source")
  ot.add_argument("--target-kind", default=None, help="Ingest kind of the target")
  ot.set_defaults(func=cmd_ot)
  return parser


def main(argv=None):
  """
  Command-line entry point.

  Returns:
      int: Process exit code. Library errors map to their exit_code; anything
      unexpected reports exit code 1.
  """
  parser = build_parser()
  args = parser.parse_args(argv)
  set_warning_output(True, verbose=args.verbose)
  try:
    return args.func(args)
  except FRBaryError as e:
    print(f"Error: {e}", file=sys.stderr)
    return e.exit_code
  except Exception as e:
    print(f"Error processing {args.command}: {e}", file=sys.stderr)
    return 1


if __name__ == "__main__":
  sys.exit(main())

#fin
