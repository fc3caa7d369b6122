#!/usr/bin/env python3
"""
Tests for exact discrete optimal transport and its dual potentials.
"""

import numpy as np
import pytest

from frbary.discrete import (discrete_c_transform, half_sq_cost,
                             oracle_assignment, solve_discrete)
from frbary.errors import InstanceTooLargeError, MeasureError
from frbary.measures import DiscreteMeasure
from frbary.rng import make_rng


def _uniform(rng, m, d=2):
    return DiscreteMeasure.create(rng.random((m, d)))


def _weighted(rng, m, d=2):
    return DiscreteMeasure.create(rng.random((m, d)), rng.random(m) + 0.05)


def test_matches_permutation_oracle():
    """Test solve_discrete against brute-force enumeration on small uniform instances."""
    for trial in range(200):
        rng = make_rng(21, trial)
        m = int(rng.integers(1, 7))
        mu1, mu2 = _uniform(rng, m), _uniform(rng, m)
        plan, _ = solve_discrete(mu1, mu2)
        assert plan.cost == pytest.approx(oracle_assignment(mu1, mu2), abs=1e-10)


@pytest.mark.parametrize("make", [_uniform, _weighted])
def test_strong_duality_and_feasibility(make):
    """Test zero duality gap, dual feasibility and complementary slackness."""
    for trial in range(40):
        rng = make_rng(5, trial)
        mu1, mu2 = make(rng, int(rng.integers(1, 51))), make(rng, int(rng.integers(1, 51)))
        plan, duals = solve_discrete(mu1, mu2)
        cost = half_sq_cost(mu1.points, mu2.points)
        assert abs(plan.cost - duals.value(mu1, mu2)) <= 1e-8 * (1.0 + plan.cost)
        slack = cost - duals.phi[:, None] - duals.psi[None, :]
        assert slack.min() >= -1e-10
        assert np.all(np.abs(slack[plan.row_index, plan.col_index]) <= 1e-9)
        assert duals.phi.min() == 0.0


def test_cost_is_symmetric():
    """Test that swapping the two measures gives the same cost."""
    for trial in range(20):
        rng = make_rng(13, trial)
        mu1, mu2 = _weighted(rng, int(rng.integers(1, 15))), _weighted(rng, int(rng.integers(1, 15)))
        forward, _ = solve_discrete(mu1, mu2)
        backward, _ = solve_discrete(mu2, mu1)
        assert backward.cost == pytest.approx(forward.cost, rel=1e-10, abs=1e-14)
        np.testing.assert_allclose(backward.row_sums(), mu2.weights, atol=1e-12)


def test_plan_marginals():
    """Test that the plan's row and column sums are the input weights."""
    rng = make_rng(8)
    mu1, mu2 = _weighted(rng, 12), _weighted(rng, 9)
    plan, _ = solve_discrete(mu1, mu2)
    np.testing.assert_allclose(plan.row_sums(), mu1.weights, atol=1e-12)
    np.testing.assert_allclose(plan.col_sums(), mu2.weights, atol=1e-12)
    assert plan.dense().shape == (12, 9)
    assert len(plan.entries) == plan.nnz


def test_identical_measures_cost_nothing():
    """Test that a measure transported to itself has zero cost and a diagonal plan."""
    mu = _weighted(make_rng(3), 6)
    plan, _ = solve_discrete(mu, mu)
    assert plan.cost == pytest.approx(0.0, abs=1e-15)
    assert np.array_equal(plan.row_index, plan.col_index)


def test_single_atom_target():
    """Test that everything moves to a lone target atom."""
    mu1 = DiscreteMeasure.create([[0.0, 0.0], [1.0, 0.0]])
    mu2 = DiscreteMeasure.create([[0.0, 1.0]])
    plan, _ = solve_discrete(mu1, mu2)
    assert plan.cost == pytest.approx(0.5 * (0.5 * 1.0 + 0.5 * 2.0))


def test_duplicates_are_merged():
    """Test that coincident atoms are merged before solving."""
    mu1 = DiscreteMeasure([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]], [0.25, 0.25, 0.5])
    mu2 = DiscreteMeasure.create([[0.0, 0.0], [1.0, 1.0]])
    plan, duals = solve_discrete(mu1, mu2)
    assert plan.rows == 2
    assert duals.phi.shape == (2,)
    assert plan.cost == pytest.approx(0.0, abs=1e-15)


def test_instance_too_large():
    """Test the size cap."""
    rng = make_rng(0)
    with pytest.raises(InstanceTooLargeError, match="instance too large"):
        solve_discrete(_uniform(rng, 10), _uniform(rng, 10), size_cap=99)


def test_degenerate_weights():
    """Test that vanishing weights are rejected unless min_weight is 0."""
    mu1 = DiscreteMeasure([[0.0, 0.0], [1.0, 0.0]], [1.0 - 1e-20, 1e-20])
    mu2 = DiscreteMeasure.create([[0.5, 0.5]])
    with pytest.raises(MeasureError, match="degenerate weights"):
        solve_discrete(mu1, mu2)
    plan, duals = solve_discrete(mu1, mu2, min_weight=0.0)
    assert plan.cost == pytest.approx(0.25, rel=1e-12)
    assert duals.phi.shape == (2,)


def test_dimension_mismatch():
    """Test that 2D and 3D measures cannot be coupled."""
    with pytest.raises(MeasureError, match="dimension mismatch"):
        solve_discrete(DiscreteMeasure.create([[0.0, 0.0]]), DiscreteMeasure.create([[0.0, 0.0, 0.0]]))


def test_discrete_c_transform():
    """Test ψ_j = min_i ‖x_i − y_j‖²/2 − φ_i on a two-atom example."""
    atoms1 = [[0.0, 0.0], [2.0, 0.0]]
    atoms2 = [[1.0, 0.0], [3.0, 0.0]]
    psi = discrete_c_transform([0.0, 1.0], atoms1, atoms2)
    np.testing.assert_allclose(psi, [-0.5, -0.5])


def test_oracle_size_exceeded():
    """Test that the oracle refuses large or non-uniform instances."""
    rng = make_rng(1)
    with pytest.raises(MeasureError, match="oracle size exceeded"):
        oracle_assignment(_uniform(rng, 9), _uniform(rng, 9))
    with pytest.raises(MeasureError, match="oracle size exceeded"):
        oracle_assignment(_weighted(rng, 3), _weighted(rng, 3))


def test_discrete_c_transform_shift():
    """Test (φ + c)^c = φ^c − c."""
    rng = make_rng(9)
    atoms1, atoms2 = rng.random((5, 2)), rng.random((7, 2))
    phi = rng.normal(size=5)
    np.testing.assert_allclose(
        discrete_c_transform(phi + 1.25, atoms1, atoms2),
        discrete_c_transform(phi, atoms1, atoms2) - 1.25,
        atol=1e-12,
    )
