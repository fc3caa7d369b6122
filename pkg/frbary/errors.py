#!/usr/bin/env python3
"""
Exception hierarchy for frbary.

Every error raised by the library derives from FRBaryError and carries the
process exit code the command-line interface reports for it:

  1  file could not be read or written
  2  usage error
  3  parse or validation error (malformed files, invalid measures)
  4  solver error
  5  invariant violation in strict mode
"""


class FRBaryError(Exception):
  """Base class for all frbary errors."""
  exit_code = 1


class InputFileError(FRBaryError):
  """A file could not be opened, read or written."""
  exit_code = 1


class UsageError(FRBaryError):
  """Command-line or configuration usage error."""
  exit_code = 2


class MeasureError(FRBaryError):
  """A measure, grid or matrix violates its type invariants."""
  exit_code = 3


class ParseError(FRBaryError):
  """
  Malformed input file.

  Args:
      message (str): What is wrong with the input
      path (str, optional): File being parsed
      line (int, optional): 1-based line number of the offending row
  """
  exit_code = 3

  def __init__(self, message, path=None, line=None):
    self.path = path
    self.line = line
    location = ""
    if path is not None and line is not None:
      location = f"{path}:{line}: "
    elif path is not None:
      location = f"{path}: "
    elif line is not None:
      location = f"line {line}: "
    super().__init__(f"{location}{message}")


class SolverError(FRBaryError):
  """An optimal transport or mirror descent solve failed."""
  exit_code = 4


class NoProgressError(SolverError):
  """
  Backtracking could not find an ascent step above the minimum step size.

  The best solution reached so far is attached as `solution`.
  """

  def __init__(self, message, solution=None):
    super().__init__(message)
    self.solution = solution


class InstanceTooLargeError(SolverError):
  """A discrete transport instance exceeds the configured size cap."""


class StepTooLargeError(SolverError):
  """A Gaussian mirror step left the precision matrix non-SPD."""


class ConvergenceError(SolverError):
  """An iterative routine hit its iteration cap before converging."""


class InvariantViolation(FRBaryError):
  """A run invariant (normalization, potential or KL bound) failed in strict mode."""
  exit_code = 5

#fin
