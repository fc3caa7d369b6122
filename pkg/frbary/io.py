#!/usr/bin/env python3
"""
Reading input measures and writing results.

File formats (all text, floats written with 17 significant digits so a
write/read cycle reproduces every value exactly):

point cloud CSV
    header `x,y`, `x,y,w`, `x,y,z` or `x,y,z,w`, then one atom per row

grid file
    `kind=density` or `kind=histogram`
    `d n1 ... nd`
    `lo1 hi1 ... lod hid`
    M values in row-major order (log-values for densities, weights for
    histograms), one per line

Gaussian file
    line 1: the d mean entries, then d lines holding the covariance rows

PGM image
    binary (P5) or ASCII (P2) greyscale, read as a histogram on the unit
    square; image row 0 is the top edge

Text files that are not valid UTF-8 are decoded with the encoding chardet
detects, then latin-1 as a last resort.
"""

import csv
import logging
import math
import os

import chardet
import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InputFileError, MeasureError, ParseError
from .measures import (WEIGHT_TOL, BoxDomain, DiscreteMeasure, GaussianMeasure,
                       GridDensity, GridHistogram, InputMeasure, RegularGrid,
                       normalize_log_density)

logger = logging.getLogger(__name__)

INGEST_KINDS = ("pointcloud_csv", "histogram_grid", "density_grid", "gaussian_txt", "pgm_image")

POINT_HEADERS = {
  ("x", "y"): (2, False),
  ("x", "y", "w"): (2, True),
  ("x", "y", "z"): (3, False),
  ("x", "y", "z", "w"): (3, True),
}

TRACE_COLUMNS = ("k", "eta", "objective", "kl_step", "max_potential", "wall_ms")
GAUSSIAN_TRACE_COLUMNS = ("k", "eta", "bw_distance", "kl_step")

# Minimum chardet confidence before its guess is used
ENCODING_CONFIDENCE = 0.7


def fmt(value):
  """Format a float with 17 significant digits (exact round trip)."""
  value = float(value)
  if math.isnan(value):
    return "nan"
  return f"{value:.17g}"


def read_text(path):
  """
  Read a text file, sniffing the encoding when it is not UTF-8.

  Raises:
      InputFileError: If the file cannot be opened.
  """
  try:
    with open(path, "rb") as f:
      raw = f.read()
  except OSError as e:
    raise InputFileError(f"cannot read {path}: {e.strerror or e}") from e
  try:
    return raw.decode("utf-8")
  except UnicodeDecodeError:
    pass
  detected = chardet.detect(raw)
  encoding = detected.get("encoding")
  if encoding and (detected.get("confidence") or 0) > ENCODING_CONFIDENCE:
    logger.debug("Detected encoding %s for %s (confidence %.2f)", encoding, path, detected["confidence"])
    try:
      return raw.decode(encoding)
    except (UnicodeDecodeError, LookupError):
      pass
  logger.warning("Could not decode %s as UTF-8; falling back to latin-1", path)
  return raw.decode("latin-1")


def write_text(path, text):
  try:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
      f.write(text)
  except OSError as e:
    raise InputFileError(f"cannot write {path}: {e.strerror or e}") from e


def _floats(fields, path, line):
  try:
    values = [float(v) for v in fields]
  except ValueError:
    raise ParseError(f"expected numbers, got {' '.join(fields)!r}", path, line) from None
  if not all(math.isfinite(v) for v in values):
    raise ParseError("non-finite value", path, line)
  return values


def _data_lines(text):
  """(line number, stripped line) for every non-blank line."""
  for number, line in enumerate(text.splitlines(), start=1):
    line = line.strip()
    if line:
      yield number, line


def _weights_as_given(weights):
  return abs(float(np.sum(weights)) - 1.0) <= WEIGHT_TOL


def read_points(path):
  """
  Parse a point cloud CSV into a DiscreteMeasure.

  Without a `w` column every atom gets weight 1/m; weights that do not sum
  to one are normalized.

  Raises:
      ParseError: Bad header or malformed row (with its line number).
      MeasureError: "zero-mass input" when all weights are zero.
  """
  lines = list(_data_lines(read_text(path)))
  if not lines:
    raise ParseError("empty point cloud file", path)
  number, header = lines[0]
  columns = tuple(c.strip().lower() for c in header.split(","))
  if columns not in POINT_HEADERS:
    raise ParseError(f"expected header x,y[,z][,w], got {header!r}", path, number)
  d, weighted = POINT_HEADERS[columns]
  rows = []
  numbers = []
  for number, line in lines[1:]:
    fields = [f.strip() for f in line.split(",")]
    if len(fields) != len(columns):
      raise ParseError(f"expected {len(columns)} fields, got {len(fields)}", path, number)
    rows.append(_floats(fields, path, number))
    numbers.append(number)
  if not rows:
    raise ParseError("point cloud has no rows", path)
  data = np.array(rows)
  points = data[:, :d]
  if not weighted:
    return DiscreteMeasure.create(points)
  weights = data[:, d]
  negative = np.flatnonzero(weights < 0)
  if negative.size:
    raise ParseError("negative weight", path, numbers[negative[0]])
  if _weights_as_given(weights):
    return DiscreteMeasure(points, weights)
  return DiscreteMeasure.create(points, weights)


def read_grid(path):
  """
  Parse a grid file.

  Returns:
      GridDensity or GridHistogram, depending on the `kind=` line. Densities
      that are not normalized are renormalized with a warning.
  """
  lines = list(_data_lines(read_text(path)))
  if len(lines) < 3:
    raise ParseError("grid file needs a kind line, a shape line and a bounds line", path)
  number, kind_line = lines[0]
  key, _, kind = kind_line.partition("=")
  kind = kind.strip()
  if key.strip() != "kind" or kind not in ("density", "histogram"):
    raise ParseError(f"expected 'kind=density' or 'kind=histogram', got {kind_line!r}", path, number)

  number, shape_line = lines[1]
  try:
    header = [int(v) for v in shape_line.split()]
  except ValueError:
    raise ParseError(f"malformed shape line {shape_line!r}", path, number) from None
  if len(header) < 2 or header[0] != len(header) - 1:
    raise ParseError(f"shape line must read 'd n1 ... nd', got {shape_line!r}", path, number)
  shape = tuple(header[1:])

  number, bounds_line = lines[2]
  bounds = _floats(bounds_line.split(), path, number)
  if len(bounds) != 2 * len(shape):
    raise ParseError(f"expected {2 * len(shape)} bounds, got {len(bounds)}", path, number)
  try:
    grid = RegularGrid(BoxDomain.from_bounds(bounds), shape)
  except MeasureError as e:
    raise ParseError(str(e), path, number) from e

  values = []
  numbers = []
  for number, line in lines[3:]:
    row = _floats(line.split(), path, number)
    values.extend(row)
    numbers.extend([number] * len(row))
  if len(values) != grid.size:
    raise ParseError(f"expected {grid.size} values, got {len(values)}", path)
  values = np.array(values)

  if kind == "density":
    density = GridDensity(grid, values)
    if not density.is_normalized():
      logger.warning("Density in %s is not normalized (error %.3e); renormalizing", path, density.normalization_error())
      density = normalize_log_density(density)
    return density
  negative = np.flatnonzero(values < 0)
  if negative.size:
    raise ParseError("negative histogram weight", path, numbers[negative[0]])
  if _weights_as_given(values):
    return GridHistogram(grid, values)
  return GridHistogram.from_counts(grid, values)


def read_gaussian(path):
  """Parse a Gaussian file (mean line followed by covariance rows)."""
  lines = list(_data_lines(read_text(path)))
  if not lines:
    raise ParseError("empty Gaussian file", path)
  number, line = lines[0]
  mean = _floats(line.split(), path, number)
  d = len(mean)
  if len(lines) != d + 1:
    raise ParseError(f"expected {d} covariance rows after the mean, got {len(lines) - 1}", path)
  rows = []
  for number, line in lines[1:]:
    row = _floats(line.split(), path, number)
    if len(row) != d:
      raise ParseError(f"covariance row needs {d} values, got {len(row)}", path, number)
    rows.append(row)
  return GaussianMeasure(mean, rows)


def read_pgm(path):
  """
  Read a greyscale PGM image as a histogram.

  Pixels become cells of a grid over [0, W/s] × [0, H/s] with s = max(W, H);
  axis 0 runs left to right and axis 1 bottom to top.
  """
  try:
    with Image.open(path) as img:
      if img.format != "PPM" or img.mode not in ("L", "I", "I;16", "I;16B"):
        raise ParseError(f"not a greyscale PGM image (format {img.format}, mode {img.mode})", path)
      pixels = np.asarray(img, dtype=float)
  except (UnidentifiedImageError, SyntaxError, ValueError) as e:
    raise ParseError(f"malformed PGM image: {e}", path) from e
  except OSError as e:
    raise InputFileError(f"cannot read {path}: {e.strerror or e}") from e
  height, width = pixels.shape
  scale = float(max(width, height))
  grid = RegularGrid(BoxDomain([0.0, 0.0], [width / scale, height / scale]), (width, height))
  counts = np.flipud(pixels).T
  return GridHistogram.from_counts(grid, counts)


READERS = {
  "pointcloud_csv": read_points,
  "histogram_grid": read_grid,
  "density_grid": read_grid,
  "gaussian_txt": read_gaussian,
  "pgm_image": read_pgm,
}


def infer_kind(path):
  """
  Ingest kind from the file extension (and the `kind=` line of grid files).

  Raises:
      ParseError: When the extension is not recognized.
  """
  ext = os.path.splitext(path)[1].lower()
  if ext == ".csv":
    return "pointcloud_csv"
  if ext == ".pgm":
    return "pgm_image"
  if ext == ".gauss":
    return "gaussian_txt"
  if ext == ".grid":
    for _, line in _data_lines(read_text(path)):
      return "histogram_grid" if line.replace(" ", "") == "kind=histogram" else "density_grid"
  raise ParseError(f"cannot infer the input kind from extension {ext!r}; give it explicitly", path)


def ingest(path, kind=None, weight=1.0, label=None):
  """
  Read an input file into a validated InputMeasure.

  Args:
      path (str): File to read
      kind (str, optional): One of INGEST_KINDS; inferred from the extension
          when omitted
      weight (float): Barycentric weight of this input
      label (str, optional): Diagnostic name (defaults to the path)

  Returns:
      InputMeasure

  Raises:
      InputFileError, ParseError, MeasureError
  """
  kind = kind or infer_kind(path)
  if kind not in READERS:
    raise ParseError(f"unknown input kind {kind!r} (expected one of {', '.join(INGEST_KINDS)})", path)
  measure = READERS[kind](path)
  if kind == "histogram_grid" and isinstance(measure, GridDensity):
    measure = measure.as_histogram()
  elif kind == "density_grid" and isinstance(measure, GridHistogram):
    raise ParseError("expected a density grid file, found kind=histogram", path)
  logger.debug("Ingested %s as %s", path, kind)
  return InputMeasure(measure, weight, label or path)


def format_grid(measure):
  if isinstance(measure, GridDensity):
    kind, values = "density", measure.log_values
  elif isinstance(measure, GridHistogram):
    kind, values = "histogram", measure.weights
  else:
    raise MeasureError(f"cannot write {type(measure).__name__} as a grid file")
  grid = measure.grid
  lines = [
    f"kind={kind}",
    " ".join(str(v) for v in (grid.dim,) + grid.shape),
    " ".join(fmt(v) for v in grid.domain.bounds()),
  ]
  lines.extend(fmt(v) for v in values)
  return "\n".join(lines) + "\n"


def write_grid(path, measure):
  write_text(path, format_grid(measure))


def write_points(path, points, weights=None):
  """Write atoms (and optionally their weights) as a point cloud CSV."""
  points = np.atleast_2d(np.asarray(points, dtype=float))
  d = points.shape[1]
  header = ["x", "y", "z"][:d] + (["w"] if weights is not None else [])
  if tuple(header) not in POINT_HEADERS:
    raise MeasureError(f"cannot write {d}-dimensional points")
  lines = [",".join(header)]
  for i, row in enumerate(points):
    fields = [fmt(v) for v in row]
    if weights is not None:
      fields.append(fmt(weights[i]))
    lines.append(",".join(fields))
  write_text(path, "\n".join(lines) + "\n")


def write_gaussian(path, gaussian):
  lines = [" ".join(fmt(v) for v in gaussian.mean)]
  lines.extend(" ".join(fmt(v) for v in row) for row in gaussian.cov)
  write_text(path, "\n".join(lines) + "\n")


class TraceWriter:
  """
  CSV sink for trace rows.

  Usable as the `sink` callback of run_frbary(): the header is written on
  open and each row is flushed as it arrives.

  Args:
      path (str): Output file
      n_inputs (int): Number of residual columns
  """

  def __init__(self, path, n_inputs):
    self.path = path
    self.n_inputs = int(n_inputs)
    self._file = None
    self._writer = None

  def __enter__(self):
    try:
      self._file = open(self.path, "w", encoding="utf-8", newline="")
    except OSError as e:
      raise InputFileError(f"cannot write {self.path}: {e.strerror or e}") from e
    self._writer = csv.writer(self._file, lineterminator="\n")
    self._writer.writerow(list(TRACE_COLUMNS) + [f"residual_{i}" for i in range(self.n_inputs)])
    return self

  def __exit__(self, *exc):
    self._file.close()
    return False

  def __call__(self, row):
    self._writer.writerow(
      [row.k, fmt(row.eta), fmt(row.objective), fmt(row.kl_step), fmt(row.max_potential), fmt(row.wall_ms)]
      + [fmt(r) for r in row.residuals]
    )
    self._file.flush()


def write_trace(path, trace, n_inputs):
  with TraceWriter(path, n_inputs) as sink:
    for row in trace:
      sink(row)


def write_gaussian_trace(path, trace):
  lines = [",".join(GAUSSIAN_TRACE_COLUMNS)]
  for k, eta, distance, kl in trace.rows():
    lines.append(",".join([str(k), fmt(eta), fmt(distance), fmt(kl)]))
  write_text(path, "\n".join(lines) + "\n")


def read_trace(path):
  """Parse a trace CSV into a list of dicts of floats (k as int)."""
  rows = list(csv.DictReader(read_text(path).splitlines()))
  parsed = []
  for row in rows:
    entry = {key: float(value) for key, value in row.items()}
    entry["k"] = int(entry["k"])
    parsed.append(entry)
  return parsed


def write_summary(path, summary):
  """Write a flat key=value summary; floats use 17 significant digits."""
  lines = []
  for key, value in summary.items():
    if isinstance(value, float):
      value = fmt(value)
    lines.append(f"{key}={value}")
  write_text(path, "\n".join(lines) + "\n")

#fin
