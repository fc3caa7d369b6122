#!/usr/bin/env python3
"""
Pytest configuration for frbary tests.

This module defines fixtures and common utilities for testing the frbary
library and command-line interface.
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path so the package imports without installation
parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, parent_dir)

from frbary.measures import BoxDomain, DiscreteMeasure, GridDensity, RegularGrid  # noqa: E402
from frbary.rng import make_rng  # noqa: E402


@pytest.fixture
def unit_box():
    """The unit square [0, 1]²."""
    return BoxDomain([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def unit_grid(unit_box):
    """
    Fixture providing a 16×16 cell-centered grid on the unit square.

    Returns:
        RegularGrid: 256 cells of side 1/16
    """
    return RegularGrid(unit_box, (16, 16))


@pytest.fixture
def centered_grid():
    """8×8 grid on [-1, 1]², symmetric under reflections through the origin."""
    return RegularGrid(BoxDomain([-1.0, -1.0], [1.0, 1.0]), (8, 8))


@pytest.fixture
def random_cloud():
    """
    Fixture for generating seeded point clouds inside a box.

    Returns:
        function: (m, seed, domain) -> DiscreteMeasure with uniform weights
    """
    def _make(m, seed=0, domain=None):
        domain = domain or BoxDomain([0.0, 0.0], [1.0, 1.0])
        rng = make_rng(seed)
        points = domain.lo + rng.random((m, domain.dim)) * domain.widths
        return DiscreteMeasure.create(points, domain=domain)
    return _make


@pytest.fixture
def bump_density():
    """
    Fixture for smooth positive densities on a grid.

    Returns:
        function: (grid, center, scale) -> normalized GridDensity with
        log-values −‖y − center‖²/(2·scale²)
    """
    def _make(grid, center=None, scale=0.25):
        center = grid.domain.lo + 0.5 * grid.domain.widths if center is None else np.asarray(center)
        log_values = -np.sum((grid.nodes - center) ** 2, axis=1) / (2.0 * scale ** 2)
        return GridDensity.from_log_values(grid, log_values)
    return _make


@pytest.fixture
def write_file(tmp_path):
    """
    Fixture for creating text files in a temporary directory.

    Returns:
        function: (name, content) -> str path of the written file
    """
    def _write(name, content):
        filepath = tmp_path / name
        with open(filepath, "w", encoding="utf-8") as f:
            f.write(content)
        return str(filepath)
    return _write
