#!/usr/bin/env python3
"""
Tests for domains, grids, measure types and log-space density arithmetic.
"""

import logging

import numpy as np
import pytest

from frbary.errors import MeasureError
from frbary.measures import (BoxDomain, DiscreteMeasure, GaussianMeasure,
                             GridDensity, GridHistogram, InputMeasure,
                             RegularGrid, check_input_weights, domain_radius,
                             lsp, normalize_input_weights,
                             normalize_log_density, resample_to_grid,
                             support_bounds)
from frbary.rng import make_rng


def test_box_rejects_bad_bounds():
    """Test that inverted, unsupported-dimension and non-finite boxes are rejected."""
    with pytest.raises(MeasureError, match="lo < hi"):
        BoxDomain([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(MeasureError, match="unsupported dimension"):
        BoxDomain([0.0], [1.0])
    with pytest.raises(MeasureError, match="finite"):
        BoxDomain([0.0, -np.inf], [1.0, 1.0])


def test_box_from_flat_bounds():
    """Test building a box from lo1 hi1 lo2 hi2."""
    box = BoxDomain.from_bounds([-1.0, 2.0, 0.0, 3.0])
    assert box.dim == 2
    assert box.lo.tolist() == [-1.0, 0.0]
    assert box.hi.tolist() == [2.0, 3.0]
    assert box.bounds() == [-1.0, 2.0, 0.0, 3.0]
    assert box.volume == pytest.approx(9.0)


def test_domain_radius_uses_farthest_corner():
    """Test R² = Σ max(lo², hi²)."""
    box = BoxDomain([-1.0, 0.0], [2.0, 3.0])
    assert domain_radius(box) == pytest.approx(np.sqrt(13.0))
    assert box.radius == pytest.approx(np.sqrt(13.0))


def test_grid_nodes_are_row_major_cell_centers(unit_grid):
    """Test that nodes are cell centers with the last axis varying fastest."""
    nodes = unit_grid.nodes
    assert nodes.shape == (256, 2)
    assert unit_grid.cell_volume == pytest.approx(1.0 / 256)
    np.testing.assert_allclose(nodes[0], [1 / 32, 1 / 32])
    np.testing.assert_allclose(nodes[1], [1 / 32, 3 / 32])
    np.testing.assert_allclose(nodes[16], [3 / 32, 1 / 32])
    assert not nodes.flags.writeable


def test_grid_locate(unit_grid):
    """Test cell lookup, including points on the upper boundary."""
    idx = unit_grid.locate([[0.99, 0.01], [1.0, 1.0], [0.0, 0.0], [0.5, 0.5]])
    assert idx.tolist() == [240, 255, 0, 8 * 16 + 8]


def test_grid_shape_must_match_domain(unit_box):
    """Test that a 3D shape on a 2D box is rejected."""
    with pytest.raises(MeasureError, match="does not match"):
        RegularGrid(unit_box, (4, 4, 4))


def test_discrete_measure_create_normalizes():
    """Test that create() normalizes weights and defaults to uniform."""
    mu = DiscreteMeasure.create([[0.0, 0.0], [1.0, 1.0]], [1.0, 3.0])
    np.testing.assert_allclose(mu.weights, [0.25, 0.75])
    uniform = DiscreteMeasure.create([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    assert uniform.is_uniform()


def test_discrete_measure_rejects_zero_mass_and_bad_weights():
    """Test zero-mass and non-normalized weight errors."""
    with pytest.raises(MeasureError, match="zero-mass input"):
        DiscreteMeasure.create([[0.0, 0.0]], [0.0])
    with pytest.raises(MeasureError, match="sum to"):
        DiscreteMeasure([[0.0, 0.0], [1.0, 0.0]], [0.5, 0.6])
    with pytest.raises(MeasureError, match="nonnegative"):
        DiscreteMeasure([[0.0, 0.0], [1.0, 0.0]], [1.5, -0.5])


def test_discrete_measure_domain_check(unit_box):
    """Test that atoms outside the given domain are rejected."""
    with pytest.raises(MeasureError, match="outside the domain"):
        DiscreteMeasure.create([[0.5, 0.5], [1.5, 0.5]], domain=unit_box)


def test_merge_duplicates_sums_weights():
    """Test that coincident atoms are merged with their weights added."""
    mu = DiscreteMeasure([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]], [0.25, 0.5, 0.25])
    merged = mu.merge_duplicates()
    assert merged.size == 2
    np.testing.assert_allclose(merged.points, [[0.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(merged.weights, [0.5, 0.5])
    distinct = DiscreteMeasure.create([[0.0, 0.0], [1.0, 1.0]])
    assert distinct.merge_duplicates() is distinct


def test_lsp_example():
    """Test lsp on a two-value example: log(0.5·(1 + 3)) = log 2."""
    assert lsp([0.0, np.log(3.0)], 0.5) == pytest.approx(np.log(2.0), abs=1e-15)


def test_lsp_is_stable_for_large_values():
    """Test that huge log-values do not overflow."""
    assert lsp([1000.0, 1000.0], 1.0) == pytest.approx(1000.0 + np.log(2.0))


def test_lsp_permutation_and_shift():
    """Test that lsp ignores the order of v and moves with a constant added to every entry."""
    v = make_rng(6).normal(size=50)
    base = lsp(v, 0.01)
    assert lsp(v[::-1], 0.01) == pytest.approx(base, abs=1e-12)
    assert lsp(make_rng(7).permutation(v), 0.01) == pytest.approx(base, abs=1e-12)
    assert lsp(v + 2.5, 0.01) == pytest.approx(base + 2.5, abs=1e-12)


def test_translated_density_keeps_its_values(unit_grid, bump_density):
    """Test that a shifted density has the same log-values on the shifted grid."""
    rho = bump_density(unit_grid)
    moved = rho.translated([0.5, -1.0])
    assert moved.grid.same_as(RegularGrid(BoxDomain([0.5, -1.0], [1.5, 0.0]), unit_grid.shape))
    np.testing.assert_array_equal(moved.log_values, rho.log_values)
    assert moved.is_normalized()


def test_lsp_empty_grid():
    """Test the empty input error."""
    with pytest.raises(MeasureError, match="empty grid"):
        lsp([], 1.0)


def test_normalize_log_density(unit_grid):
    """Test that normalization makes Δ·Σρ = 1 and is idempotent."""
    raw = GridDensity(unit_grid, np.linspace(-3.0, 5.0, unit_grid.size))
    rho = normalize_log_density(raw)
    assert rho.normalization_error() <= 1e-12
    again = normalize_log_density(rho)
    np.testing.assert_allclose(again.log_values, rho.log_values, atol=1e-14)


def test_normalize_rejects_non_finite(unit_grid):
    """Test the non-finite log-density error."""
    values = np.zeros(unit_grid.size)
    values[3] = np.nan
    with pytest.raises(MeasureError, match="non-finite log-density"):
        normalize_log_density(GridDensity(unit_grid, values))


def test_uniform_density_moments(unit_grid):
    """Test that a uniform grid density has the moments of U([0,1]²)."""
    rho = GridDensity.uniform(unit_grid)
    np.testing.assert_allclose(rho.values, 1.0)
    assert rho.is_normalized()
    mean, cov = rho.moments()
    np.testing.assert_allclose(mean, [0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(cov, np.eye(2) / 12.0, atol=1e-12)


def test_density_from_gaussian(unit_grid):
    """Test Gaussian discretization: normalized, mean close to the Gaussian mean."""
    g = GaussianMeasure([0.4, 0.6], np.diag([0.01, 0.02]))
    rho = GridDensity.from_gaussian(unit_grid, g)
    assert rho.is_normalized()
    mean, _ = rho.moments()
    np.testing.assert_allclose(mean, [0.4, 0.6], atol=5e-3)


def test_gaussian_invalid_covariance():
    """Test that asymmetric or indefinite covariances are rejected."""
    with pytest.raises(MeasureError, match="invalid covariance"):
        GaussianMeasure([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(MeasureError, match="invalid covariance"):
        GaussianMeasure([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def test_gaussian_support_bounds():
    """Test the ±4σ support box used for automatic domains."""
    g = GaussianMeasure([1.0, -1.0], np.diag([0.25, 4.0]))
    lo, hi = support_bounds(g)
    np.testing.assert_allclose(lo, [-1.0, -9.0])
    np.testing.assert_allclose(hi, [3.0, 7.0])


def test_histogram_as_discrete_drops_empty_cells(unit_box):
    """Test that zero-weight cells are not turned into atoms."""
    grid = RegularGrid(unit_box, (2, 2))
    hist = GridHistogram(grid, [0.5, 0.0, 0.0, 0.5])
    atoms = hist.as_discrete()
    assert atoms.size == 2
    np.testing.assert_allclose(atoms.points, [[0.25, 0.25], [0.75, 0.75]])


def test_histogram_from_counts_zero_mass(unit_box):
    """Test that an all-zero histogram is reported as zero-mass input."""
    grid = RegularGrid(unit_box, (2, 2))
    with pytest.raises(MeasureError, match="zero-mass input"):
        GridHistogram.from_counts(grid, np.zeros(4))


def test_resample_uniform_to_coarser_grid(unit_box):
    """Test that resampling a uniform density gives a uniform histogram."""
    fine = GridDensity.uniform(RegularGrid(unit_box, (8, 8)))
    coarse = RegularGrid(unit_box, (4, 4))
    hist = resample_to_grid(fine, coarse)
    assert hist.grid.same_as(coarse)
    np.testing.assert_allclose(hist.weights, 1.0 / 16)


def test_resample_zero_outside_source(unit_box):
    """Test that target cells outside the source box receive no mass."""
    source = GridDensity.uniform(RegularGrid(unit_box, (4, 4)))
    target = RegularGrid(BoxDomain([0.0, 0.0], [2.0, 1.0]), (4, 2))
    hist = resample_to_grid(source, target).weights.reshape(4, 2)
    assert np.all(hist[2:] == 0.0)
    np.testing.assert_allclose(hist[:2], 0.25)


def test_input_weight_normalization(caplog):
    """Test that unnormalized input weights are rescaled with a warning."""
    mu = DiscreteMeasure.create([[0.0, 0.0]])
    inputs = [InputMeasure(mu, 1.0), InputMeasure(mu, 3.0)]
    with pytest.raises(MeasureError, match="input weights"):
        check_input_weights(inputs)
    with caplog.at_level(logging.WARNING, logger="frbary"):
        fixed, changed = normalize_input_weights(inputs)
    assert changed
    assert [inp.weight for inp in fixed] == [0.25, 0.75]
    assert "normalizing" in caplog.text
    check_input_weights(fixed)


def test_input_measure_kind():
    """Test the kind names of the supported input types."""
    mu = DiscreteMeasure.create([[0.0, 0.0]])
    assert InputMeasure(mu).kind == "discrete"
    assert InputMeasure(GaussianMeasure([0.0, 0.0], np.eye(2))).kind == "gaussian"
    with pytest.raises(MeasureError, match="unsupported input"):
        InputMeasure([[0.0, 0.0]])
