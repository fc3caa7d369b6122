#!/usr/bin/env python3
"""
Run configuration.

A run is described by a RunConfig. Values come from three layers, later ones
winning: the dataclass defaults, a flat `key = value` config file, and
command-line flags. Config files have no section headers; `#` and `;` start
comment lines. `inputs` holds one `path[:kind[:weight]]` entry per line (or
several separated by `;`).

Example config file:

    inputs = clouds/a.csv::0.25
             clouds/b.csv::0.75
    grid = 64x64
    schedule = power
    step_c = 0.1
    step_alpha = 0.3
    T = 100
"""

import configparser
import logging
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ParseError, UsageError
from .io import INGEST_KINDS, ingest, read_text
from .measures import BoxDomain, RegularGrid, normalize_input_weights, support_bounds
from .mirror import SCHEDULE_KINDS, MirrorOptions, Schedule
from .semidiscrete import SolverOptions

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.25
GAUSSIAN_INITS = ("identity", "mean")


@dataclass(frozen=True)
class InputSpec:
  path: str
  kind: str = None
  weight: float = 1.0


@dataclass(frozen=True)
class RunConfig:
  """Every setting of a barycenter, Gaussian or sampling run, with its default."""
  inputs: tuple = ()
  grid: tuple = (64, 64)
  domain: object = "auto"
  margin: float = DEFAULT_MARGIN
  schedule: str = "inverse_sqrt_k"
  step_c: float = 1.0
  step_alpha: float = 0.5
  T: int = 100
  tol_grad: float = 1e-6
  max_iters: int = 500
  seed: int = 0
  out_density: str = "barycenter.grid"
  out_trace: str = "trace.csv"
  out_summary: str = "summary.txt"
  out_covariance: str = "barycenter.gauss"
  eval_every: int = 1
  strict: bool = False
  threads: int = 1
  gaussian_samples: int = 2000
  store_best: bool = False
  timing: bool = False
  gaussian_init: str = "identity"

  def schedule_obj(self):
    return Schedule(self.schedule, self.step_c, self.step_alpha, self.T)

  def mirror_options(self):
    return MirrorOptions(
      solver=SolverOptions(tol_grad=self.tol_grad, max_iters=self.max_iters),
      eval_every=self.eval_every,
      strict=self.strict,
      threads=self.threads,
      gaussian_samples=self.gaussian_samples,
      seed=self.seed,
      store_best=self.store_best,
      timing=self.timing,
    )


def parse_input_spec(text):
  """
  Parse `path[:kind[:weight]]`.

  Examples:
      >>> parse_input_spec("a.csv::0.5")
      InputSpec(path='a.csv', kind=None, weight=0.5)
  """
  parts = text.strip().split(":")
  if not parts[0] or len(parts) > 3:
    raise UsageError(f"malformed input {text!r} (expected path[:kind[:weight]])")
  kind = parts[1] if len(parts) > 1 and parts[1] else None
  if kind is not None and kind not in INGEST_KINDS:
    raise UsageError(f"unknown input kind {kind!r} in {text!r}")
  weight = 1.0
  if len(parts) == 3 and parts[2]:
    try:
      weight = float(parts[2])
    except ValueError:
      raise UsageError(f"malformed input weight in {text!r}") from None
  return InputSpec(parts[0], kind, weight)


def parse_inputs(value):
  if isinstance(value, (list, tuple)):
    entries = value
  else:
    entries = [e for line in str(value).splitlines() for e in line.split(";")]
  return tuple(
    e if isinstance(e, InputSpec) else parse_input_spec(e)
    for e in entries if isinstance(e, InputSpec) or e.strip()
  )


def parse_grid(value):
  """`64x64`, `64 64`, `64,64,64` or `64` (square, resolved against the domain)."""
  if isinstance(value, (list, tuple)):
    return tuple(int(n) for n in value)
  text = str(value).lower().replace("x", " ").replace(",", " ")
  try:
    shape = tuple(int(n) for n in text.split())
  except ValueError:
    raise UsageError(f"malformed grid shape {value!r}") from None
  if not shape or any(n < 1 for n in shape):
    raise UsageError(f"grid shape must be positive, got {value!r}")
  return shape


def parse_domain(value):
  if isinstance(value, BoxDomain):
    return value
  if str(value).strip().lower() == "auto":
    return "auto"
  try:
    bounds = [float(v) for v in str(value).replace(",", " ").split()]
  except ValueError:
    raise UsageError(f"malformed domain {value!r} (expected 'auto' or lo1 hi1 ... lod hid)") from None
  return BoxDomain.from_bounds(bounds)


def parse_bool(value):
  if isinstance(value, bool):
    return value
  text = str(value).strip().lower()
  if text in ("1", "true", "yes", "on"):
    return True
  if text in ("0", "false", "no", "off"):
    return False
  raise UsageError(f"expected a boolean, got {value!r}")


def _choice(options):
  def parse(value):
    value = str(value).strip()
    if value not in options:
      raise UsageError(f"expected one of {', '.join(options)}, got {value!r}")
    return value
  return parse


CONVERTERS = {
  "inputs": parse_inputs,
  "grid": parse_grid,
  "domain": parse_domain,
  "margin": float,
  "schedule": _choice(SCHEDULE_KINDS),
  "step_c": float,
  "step_alpha": float,
  "T": int,
  "tol_grad": float,
  "max_iters": int,
  "seed": int,
  "out_density": str,
  "out_trace": str,
  "out_summary": str,
  "out_covariance": str,
  "eval_every": int,
  "strict": parse_bool,
  "threads": int,
  "gaussian_samples": int,
  "store_best": parse_bool,
  "timing": parse_bool,
  "gaussian_init": _choice(GAUSSIAN_INITS),
}

# configparser lowercases keys
_KEY_NAMES = {key.lower(): key for key in CONVERTERS}


def read_config_file(path):
  """
  Read a key = value config file into a dict of raw strings.

  Raises:
      ParseError: Malformed file.
      UsageError: Unknown key.
  """
  parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
  try:
    parser.read_string("[run]\n" + read_text(path), source=path)
  except configparser.Error as e:
    raise ParseError(f"malformed config file: {e}", path) from e
  values = {}
  for key, value in parser.items("run"):
    if key not in _KEY_NAMES:
      raise UsageError(f"unknown config key {key!r} in {path}")
    values[_KEY_NAMES[key]] = value
  return values


def apply_values(cfg, values, source="config"):
  """Return cfg with the given raw values converted and applied."""
  updates = {}
  for key, value in values.items():
    if value is None:
      continue
    if key not in CONVERTERS:
      raise UsageError(f"unknown config key {key!r}")
    try:
      updates[key] = CONVERTERS[key](value)
    except (TypeError, ValueError) as e:
      raise UsageError(f"invalid value for {key} in {source}: {value!r} ({e})") from e
  return replace(cfg, **updates)


def build_config(config_path=None, overrides=None):
  """Defaults, then the config file, then non-None overrides."""
  cfg = RunConfig()
  if config_path:
    cfg = apply_values(cfg, read_config_file(config_path), source=config_path)
  if overrides:
    cfg = apply_values(cfg, overrides, source="command line")
  return cfg


def _format_value(key, value):
  if key == "inputs":
    return "; ".join(f"{s.path}:{s.kind or ''}:{s.weight:.17g}" for s in value)
  if key == "grid":
    return "x".join(str(n) for n in value)
  if isinstance(value, BoxDomain):
    return " ".join(f"{v:.17g}" for v in value.bounds())
  if isinstance(value, bool):
    return "true" if value else "false"
  return str(value)


def dump_config(cfg):
  """Every effective key as `key = value` lines, defaults included."""
  lines = [
    f"{f.name} = {_format_value(f.name, getattr(cfg, f.name))}"
    for f in fields(cfg) if f.name in CONVERTERS
  ]
  return "\n".join(lines) + "\n"


def load_inputs(cfg):
  """
  Ingest every configured input; weights are normalized with a warning.

  Returns:
      list of InputMeasure
  """
  if not cfg.inputs:
    raise UsageError("no inputs given")
  inputs = [ingest(spec.path, spec.kind, spec.weight) for spec in cfg.inputs]
  inputs, _ = normalize_input_weights(inputs)
  return inputs


def auto_domain(measures, margin=DEFAULT_MARGIN):
  """
  Bounding box of all supports, enlarged by margin × width on every side.

  Axes of zero width are treated as having width 1.
  """
  bounds = [support_bounds(m) for m in measures]
  lo = np.min([b[0] for b in bounds], axis=0)
  hi = np.max([b[1] for b in bounds], axis=0)
  width = hi - lo
  width[width <= 0] = 1.0
  return BoxDomain(lo - margin * width, hi + margin * width)


def resolve_grid(cfg, inputs):
  """RegularGrid from the configured shape and (explicit or automatic) domain."""
  domain = cfg.domain
  if domain == "auto":
    domain = auto_domain([inp.measure for inp in inputs], cfg.margin)
    logger.info("Auto domain: %s", domain)
  shape = cfg.grid
  if len(shape) == 1:
    shape = shape * domain.dim
  if len(shape) != domain.dim:
    raise UsageError(f"grid shape {shape} does not match the {domain.dim}D domain")
  return RegularGrid(domain, shape)

#fin
