#!/usr/bin/env python3
"""
Tests for the mirror descent loop: schedules, the multiplicative update,
per-iteration bounds and end-to-end runs on small grids.
"""

import logging

import numpy as np
import pytest

from frbary.errors import (InstanceTooLargeError, InvariantViolation, MeasureError,
                           SolverError)
from frbary.measures import (BoxDomain, DiscreteMeasure, GaussianMeasure,
                             GridDensity, GridHistogram, InputMeasure,
                             RegularGrid, domain_radius)
from frbary.mirror import (MirrorOptions, RoutePotential, Schedule,
                           averaged_potential, diverged, mirror_step,
                           objective_estimate, run_frbary)
from frbary.rng import make_rng
from frbary.semidiscrete import GridPotential


def test_schedule_kinds():
    """Test the step size formulas."""
    assert Schedule("constant_over_sqrtT", c=1.0, T=4).eta(7) == pytest.approx(0.5)
    assert Schedule("inverse_sqrt_k", c=1.0).eta(3) == pytest.approx(0.5)
    assert Schedule("power", c=0.1, alpha=0.3).eta(0) == pytest.approx(0.1)
    assert Schedule("power", c=0.1, alpha=0.3).eta(9) == pytest.approx(0.1 * 10 ** -0.3)
    assert Schedule("constant", c=0.25).eta(100) == 0.25


def test_schedule_validation():
    """Test that unknown kinds and nonpositive constants are rejected."""
    with pytest.raises(MeasureError, match="unknown schedule"):
        Schedule("linear")
    with pytest.raises(MeasureError, match="positive"):
        Schedule("constant", c=0.0)


def test_averaged_potential(unit_grid):
    """Test the weighted pointwise sum of grid potentials."""
    zeros = GridPotential(unit_grid, np.zeros(unit_grid.size))
    fours = GridPotential(unit_grid, np.full(unit_grid.size, 4.0))
    np.testing.assert_allclose(averaged_potential([zeros, fours], [0.25, 0.75]), 3.0)
    np.testing.assert_array_equal(averaged_potential([fours], [1.0]), fours.values)


def test_averaged_potential_grid_mismatch(unit_grid, unit_box):
    """Test that potentials on different grids cannot be averaged."""
    other = RegularGrid(unit_box, (4, 4))
    with pytest.raises(MeasureError, match="different grids"):
        averaged_potential(
            [GridPotential(unit_grid, np.zeros(unit_grid.size)), GridPotential(other, np.zeros(16))],
            [0.5, 0.5],
        )


def test_mirror_step_two_cell_example(unit_box):
    """Test the update and KL step on a 2-cell grid by hand."""
    grid = RegularGrid(unit_box, (2, 1))
    rho = GridDensity.uniform(grid)
    updated, kl = mirror_step(rho, [0.0, np.log(4.0)], 1.0)
    np.testing.assert_allclose(updated.values, [1.6, 0.4], rtol=1e-14)
    expected = 0.5 * (1.0 * (0.0 - np.log(1.6)) + 1.0 * (0.0 - np.log(0.4)))
    assert kl == pytest.approx(expected, rel=1e-12)


def test_mirror_step_constant_potential_and_zero_step(unit_grid, bump_density):
    """Test that a constant potential or η = 0 leaves the density unchanged."""
    rho = bump_density(unit_grid)
    same, kl = mirror_step(rho, np.full(unit_grid.size, 2.5), 0.8)
    np.testing.assert_allclose(same.log_values, rho.log_values, atol=1e-12)
    assert kl == pytest.approx(0.0, abs=1e-12)
    frozen, kl = mirror_step(rho, np.linspace(0, 1, unit_grid.size), 0.0)
    np.testing.assert_allclose(frozen.log_values, rho.log_values, atol=1e-12)


def test_mirror_step_rejects_non_finite(unit_grid):
    """Test that a non-finite potential is refused."""
    phi = np.zeros(unit_grid.size)
    phi[0] = np.inf
    with pytest.raises(MeasureError, match="non-finite"):
        mirror_step(GridDensity.uniform(unit_grid), phi, 0.5)


def test_fixed_point_when_inputs_match_the_iterate(unit_box):
    """Test that inputs equal to the iterate's own cells give zero objective and no update."""
    grid = RegularGrid(unit_box, (8, 8))
    rho0 = GridDensity.uniform(grid)
    atoms = rho0.as_discrete()
    inputs = [InputMeasure(atoms, 1 / 3) for _ in range(2)] + [InputMeasure(atoms, 1 - 2 / 3)]
    result = run_frbary(inputs, grid, Schedule("inverse_sqrt_k", T=0))
    row = result.trace[0]
    assert row.objective <= 2 * grid.cell_volume * grid.dim
    assert np.max(np.abs(result.density.log_values - rho0.log_values)) <= 1e-6


def test_single_atom_objective_decreases(unit_grid):
    """Test that mass concentrates toward a lone atom with strictly falling objective."""
    atom = DiscreteMeasure.create([[0.3, 0.7]])
    result = run_frbary([InputMeasure(atom)], unit_grid, Schedule("inverse_sqrt_k", c=1.0, T=10))
    objectives = result.trace.objectives()
    assert len(objectives) == 11
    assert np.all(np.diff(objectives) < 0)
    assert result.best_k == 10
    # the objective is half the second moment about the atom
    rho = GridDensity.uniform(unit_grid)
    direct = 0.5 * float(rho.masses @ np.sum((unit_grid.nodes - [0.3, 0.7]) ** 2, axis=1))
    assert objectives[0] == pytest.approx(direct, rel=1e-12)


def test_run_respects_per_iteration_bounds(unit_grid, random_cloud):
    """Test KL, potential and normalization bounds on every row of a strict run."""
    cloud = random_cloud(20, seed=3)
    rng = make_rng(4)
    hist = GridHistogram.from_counts(RegularGrid(unit_grid.domain, (6, 6)), rng.random(36))
    inputs = [InputMeasure(cloud, 0.6), InputMeasure(hist, 0.4)]
    schedule = Schedule("inverse_sqrt_k", c=0.5, T=8)
    result = run_frbary(inputs, unit_grid, schedule, MirrorOptions(strict=True))
    radius = domain_radius(unit_grid.domain)
    assert len(result.trace) == 9
    for row in result.trace:
        assert row.kl_step <= 2 * row.eta ** 2 * radius ** 4 + 1e-7
        assert 0.0 <= row.max_potential <= 2 * radius ** 2 + 1e-7
        assert row.normalization_error <= 1e-10
        assert len(row.residuals) == 2
    assert result.density.is_normalized()


def test_strict_mode_raises_on_violated_bound(unit_grid, random_cloud, monkeypatch, caplog):
    """Test that a failed potential bound raises in strict mode and warns otherwise."""
    monkeypatch.setattr("frbary.mirror.domain_radius", lambda domain: 0.0)
    inputs = [InputMeasure(random_cloud(5, seed=1))]
    schedule = Schedule("constant", c=0.1, T=1)
    with pytest.raises(InvariantViolation, match="potential"):
        run_frbary(inputs, unit_grid, schedule, MirrorOptions(strict=True))
    with caplog.at_level(logging.WARNING, logger="frbary"):
        run_frbary(inputs, unit_grid, schedule, MirrorOptions(strict=False))
    assert "Invariant violated" in caplog.text


def test_histogram_barycenter_is_reflection_symmetric(centered_grid):
    """Test that a histogram and its mirror image have a mirror-symmetric barycenter."""
    rng = make_rng(17)
    counts = rng.random((8, 8)) + 0.05
    h1 = GridHistogram.from_counts(centered_grid, counts)
    h2 = GridHistogram.from_counts(centered_grid, counts[::-1, :])
    inputs = [InputMeasure(h1, 0.5), InputMeasure(h2, 0.5)]
    result = run_frbary(inputs, centered_grid, Schedule("inverse_sqrt_k", c=1.0, T=25))
    values = result.density.values.reshape(8, 8)
    np.testing.assert_allclose(values, values[::-1, :], atol=1e-6)


def test_histogram_best_objective_non_increasing_in_T(centered_grid):
    """Test that longer runs extend shorter ones and never worsen the best objective."""
    rng = make_rng(18)
    inputs = [
        InputMeasure(GridHistogram.from_counts(centered_grid, rng.random(64)), 0.5),
        InputMeasure(GridHistogram.from_counts(centered_grid, rng.random(64)), 0.5),
    ]
    best = []
    traces = []
    for T in (25, 50, 100):
        result = run_frbary(inputs, centered_grid, Schedule("inverse_sqrt_k", T=T))
        best.append(result.best_objective)
        traces.append(result.trace.objectives())
    assert best[1] <= best[0]
    assert best[2] <= best[1]
    np.testing.assert_array_equal(traces[1][:26], traces[0])


def test_density_and_gaussian_inputs(unit_grid, bump_density):
    """Test mixed input kinds: a density on the run grid, one on another grid, and a Gaussian."""
    same_grid = bump_density(unit_grid, center=[0.3, 0.3], scale=0.15)
    coarse = bump_density(RegularGrid(unit_grid.domain, (10, 10)), center=[0.7, 0.7], scale=0.15)
    gaussian = GaussianMeasure([0.5, 0.4], np.diag([0.01, 0.01]))
    inputs = [InputMeasure(same_grid, 0.4), InputMeasure(coarse, 0.3), InputMeasure(gaussian, 0.3)]
    opts = MirrorOptions(gaussian_samples=300, seed=5)
    result = run_frbary(inputs, unit_grid, Schedule("inverse_sqrt_k", c=0.5, T=3), opts)
    assert len(result.trace) == 4
    assert all(np.isfinite(row.objective) for row in result.trace)
    assert result.density.is_normalized()


def test_eval_every_skips_objectives(unit_grid):
    """Test that objectives are only evaluated on the stride and at k = T."""
    inputs = [InputMeasure(DiscreteMeasure.create([[0.5, 0.5]]))]
    result = run_frbary(inputs, unit_grid, Schedule(T=5), MirrorOptions(eval_every=3))
    evaluated = [np.isfinite(row.objective) for row in result.trace]
    assert evaluated == [True, False, False, True, False, True]


def test_store_best_and_sink(unit_grid, random_cloud):
    """Test the sink callback and the stored best iterate."""
    rows = []
    inputs = [InputMeasure(random_cloud(8, seed=2))]
    result = run_frbary(inputs, unit_grid, Schedule(T=4), MirrorOptions(store_best=True), sink=rows.append)
    assert [row.k for row in rows] == [0, 1, 2, 3, 4]
    assert (result.best_k, result.best_objective) == result.trace.best()
    assert result.final_density is not None


def test_thread_count_does_not_change_results(unit_grid, random_cloud):
    """Test that per-input solves on several threads reproduce the sequential trace."""
    inputs = [InputMeasure(random_cloud(10, seed=s), 0.25) for s in range(4)]
    schedule = Schedule(T=4)
    one = run_frbary(inputs, unit_grid, schedule, MirrorOptions(threads=1))
    two = run_frbary(inputs, unit_grid, schedule, MirrorOptions(threads=2))
    np.testing.assert_array_equal(one.trace.objectives(), two.trace.objectives())
    np.testing.assert_array_equal(one.density.log_values, two.density.log_values)


def test_subsolver_errors_name_input_and_iteration(unit_grid):
    """Test that subsolver failures carry the input index and iteration."""
    hist = GridHistogram.from_counts(unit_grid, np.ones(unit_grid.size))
    with pytest.raises(InstanceTooLargeError, match=r"input 0 .*iteration 0"):
        run_frbary([InputMeasure(hist, label="h")], unit_grid, Schedule(T=2), MirrorOptions(size_cap=10))


def test_inputs_must_fit_the_grid(unit_grid):
    """Test dimension and domain checks on inputs."""
    with pytest.raises(MeasureError, match="dimension mismatch"):
        run_frbary([InputMeasure(DiscreteMeasure.create([[0.5, 0.5, 0.5]]))], unit_grid, Schedule(T=1))
    with pytest.raises(MeasureError, match="outside the grid domain"):
        run_frbary([InputMeasure(DiscreteMeasure.create([[1.5, 0.5]]))], unit_grid, Schedule(T=1))


def test_objective_estimate_single_atom(unit_grid, bump_density):
    """Test E(ρ) for one atom against the direct quadrature of ½‖y − x‖²."""
    rho = bump_density(unit_grid, center=[0.6, 0.4])
    atom = DiscreteMeasure.create([[0.2, 0.8]])
    direct = 0.5 * float(rho.masses @ np.sum((unit_grid.nodes - [0.2, 0.8]) ** 2, axis=1))
    assert objective_estimate(rho, [InputMeasure(atom)]) == pytest.approx(direct, rel=1e-12)


def test_objective_estimate_reflection_invariance(centered_grid, bump_density):
    """Test that reflecting the density and both inputs leaves the objective unchanged."""
    rho = bump_density(centered_grid, center=[0.3, -0.2], scale=0.5)
    reflected = GridDensity(centered_grid, rho.log_values.reshape(8, 8)[::-1, :].ravel())
    left = DiscreteMeasure.create([[-0.5, 0.1]])
    right = DiscreteMeasure.create([[0.5, 0.1]])
    inputs = [InputMeasure(left, 0.3), InputMeasure(right, 0.7)]
    mirrored = [InputMeasure(right, 0.3), InputMeasure(left, 0.7)]
    assert objective_estimate(rho, inputs) == pytest.approx(objective_estimate(reflected, mirrored), rel=1e-12)


def test_gaussian_surrogate_objective(unit_grid):
    """Test that the closed-form surrogate vanishes when ρ discretizes the input Gaussian."""
    g = GaussianMeasure([0.5, 0.5], np.diag([0.01, 0.01]))
    rho = GridDensity.from_gaussian(unit_grid, g)
    value = objective_estimate(rho, [InputMeasure(g)], MirrorOptions(gaussian_surrogate=True, gaussian_samples=200))
    assert value == pytest.approx(0.0, abs=1e-3)


def test_domain_with_offset(random_cloud):
    """Test a run on a box away from the origin."""
    box = BoxDomain([2.0, -3.0], [4.0, -1.0])
    grid = RegularGrid(box, (12, 12))
    cloud = random_cloud(10, seed=6, domain=box)
    result = run_frbary([InputMeasure(cloud)], grid, Schedule(c=0.1, T=3), MirrorOptions(strict=True))
    assert result.density.is_normalized()


def test_divergence_rule():
    """Test that only a rise of more than factor × max(first, floor) counts as divergence."""
    assert not diverged(1e-6, 0.0, 10.0, 1e-3)
    assert diverged(0.5, 0.0, 10.0, 1e-3)
    assert not diverged(10.5, 1.0, 10.0, 1e-3)
    assert diverged(11.5, 1.0, 10.0, 1e-3)


@pytest.mark.parametrize("later, fails", [(1e-6, False), (1.0, True)])
def test_run_starting_at_zero_objective(unit_grid, monkeypatch, later, fails):
    """Test that quadrature-sized noise after a zero first objective is tolerated and a real rise is not."""
    def fixed_costs(parallel, routes, inputs, rho, k):
        return [RoutePotential(np.zeros(unit_grid.size), 0.0 if k == 0 else later, 0.0, 0)]

    monkeypatch.setattr("frbary.mirror._solve_routes", fixed_costs)
    inputs = [InputMeasure(DiscreteMeasure.create([[0.5, 0.5]]))]
    schedule = Schedule("constant", c=0.1, T=5)
    if fails:
        with pytest.raises(SolverError, match="diverged at iteration 1"):
            run_frbary(inputs, unit_grid, schedule)
    else:
        result = run_frbary(inputs, unit_grid, schedule)
        assert result.best_k == 0
        assert len(result.trace) == 6
