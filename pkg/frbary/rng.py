#!/usr/bin/env python3
"""
Seeded random streams.

All randomness in frbary flows through make_rng(), which keys a Philox
counter-based generator with a SeedSequence. Independent consumers (one per
input measure, one per projection direction, ...) pass a distinct stream path
so their draws do not depend on execution order.
"""

import numpy as np


def make_rng(seed, *stream):
  """
  Build a generator for the given seed and stream path.

  Args:
      seed (int): Root seed of the run
      *stream (int): Spawn key identifying an independent substream

  Returns:
      numpy.random.Generator: Philox-backed generator

  Example:
      >>> rng = make_rng(7, 2)     # substream 2 of seed 7
      >>> rng.random(3).shape
      (3,)
  """
  if seed is None:
    seed = 0
  sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
  return np.random.Generator(np.random.Philox(sequence))

#fin
