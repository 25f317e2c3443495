"""Partition geometry: pixel ownership, neighbor graph, Laplacian."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpcover import (Domain, OutsideDomainError, cell_pixels, compute_partition,
                     laplacian_of)

from oracles import brute_force_owner


def test_single_agent_owns_everything():
    domain = Domain(12, 7)
    part = compute_partition([[3.0, 2.0]], domain)
    assert np.all(part.owner == 0)
    assert len(part.cells[0]) == 12 * 7
    assert part.neighbors == ((),)
    assert part.laplacian.tolist() == [[0]]


def test_two_agent_bisector_splits_grid_in_half():
    domain = Domain(10, 10)
    part = compute_partition([[2.5, 5.0], [7.5, 5.0]], domain)
    # bisector at x=5: columns 0..4 (centers 0.5..4.5) to agent 0
    assert np.all(part.owner[:, :5] == 0)
    assert np.all(part.owner[:, 5:] == 1)
    assert len(part.cells[0]) == 50
    assert len(part.cells[1]) == 50
    assert part.neighbors == ((1,), (0,))


def test_tie_goes_to_lowest_agent_index():
    domain = Domain(10, 10)
    # centers at x=4.5 are equidistant from agents at x=2 and x=7
    part = compute_partition([[2.0, 5.0], [7.0, 5.0]], domain)
    assert np.all(part.owner[:, 4] == 0)
    assert np.all(part.owner[:, 5] == 1)


def test_matches_brute_force_oracle_on_seeded_configs():
    domain = Domain(24, 16)
    rng = np.random.default_rng(42)
    for _ in range(10):
        n = int(rng.integers(1, 6))
        pos = rng.uniform([0, 0], [domain.world_width, domain.world_height], size=(n, 2))
        part = compute_partition(pos, domain)
        np.testing.assert_array_equal(part.owner, brute_force_owner(pos, domain))


def test_cells_are_sorted_flat_indices_partitioning_the_grid():
    domain = Domain(20, 11)
    part = compute_partition([[3, 3], [14, 8], [10, 2]], domain)
    all_idx = np.concatenate(part.cells)
    assert len(all_idx) == domain.n_pixels
    assert len(np.unique(all_idx)) == domain.n_pixels
    for cell in part.cells:
        assert np.all(np.diff(cell) > 0)
    # flat indices are row-major: recovering (iy, ix) must match the owner grid
    for i, cell in enumerate(part.cells):
        iy, ix = np.divmod(cell, domain.width)
        assert np.all(part.owner[iy, ix] == i)


def test_neighbor_graph_of_corner_agents_matches_its_own_laplacian():
    domain = Domain(96, 54)
    pos = [[5.0, 5.0], [91.0, 5.0], [5.0, 49.0], [91.0, 49.0]]
    part = compute_partition(pos, domain)
    # corner cells meet along the two mid lines but not diagonally
    assert part.neighbors == ((1, 2), (0, 3), (0, 3), (1, 2))
    np.testing.assert_array_equal(part.laplacian, laplacian_of(part.neighbors))
    assert np.array_equal(part.laplacian, part.laplacian.T)
    np.testing.assert_array_equal(part.laplacian.sum(axis=1), np.zeros(4))


def test_laplacian_of_path_graph():
    lap = laplacian_of([(1,), (0, 2), (1,)])
    assert lap.tolist() == [[1, -1, 0], [-1, 2, -1], [0, -1, 1]]


def test_laplacian_rejects_bad_relations():
    with pytest.raises(ValueError):
        laplacian_of([(0,)])  # self loop
    with pytest.raises(ValueError):
        laplacian_of([(1,), ()])  # asymmetric
    with pytest.raises(ValueError):
        laplacian_of([(5,), ()])  # out of range


def test_position_outside_domain_raises():
    domain = Domain(10, 10)
    with pytest.raises(OutsideDomainError):
        compute_partition([[5.0, 5.0], [11.0, 5.0]], domain)
    with pytest.raises(OutsideDomainError):
        compute_partition([[-0.1, 5.0]], domain)
    # the closed boundary itself is fine
    compute_partition([[10.0, 10.0], [0.0, 0.0]], domain)


def test_empty_positions_rejected():
    with pytest.raises(ValueError):
        compute_partition(np.zeros((0, 2)), Domain(5, 5))


def test_partition_is_deterministic():
    domain = Domain(31, 17)
    pos = np.random.default_rng(7).uniform([0, 0], [31, 17], size=(4, 2))
    a = compute_partition(pos, domain)
    b = compute_partition(pos, domain)
    np.testing.assert_array_equal(a.owner, b.owner)
    assert a.neighbors == b.neighbors
    np.testing.assert_array_equal(a.laplacian, b.laplacian)


def test_cell_pixels_returns_centers_with_area():
    domain = Domain(4, 4, cell_size=0.5)
    part = compute_partition([[0.5, 1.0], [1.5, 1.0]], domain)
    cell = cell_pixels(part, 0, domain)
    assert cell.pixel_area == 0.25
    assert len(cell) == 8
    np.testing.assert_allclose(cell.centers[0], [0.25, 0.25])
    np.testing.assert_allclose(cell.geometric_center, [0.5, 1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 12), st.floats(0, 8)), min_size=1, max_size=5),
       st.integers(0, 10_000))
def test_partition_invariants_on_random_inputs(points, _seed):
    domain = Domain(12, 8)
    part = compute_partition(points, domain)
    np.testing.assert_array_equal(part.owner, brute_force_owner(points, domain))
    lap = part.laplacian
    assert np.array_equal(lap, lap.T)
    np.testing.assert_array_equal(lap.sum(axis=1), np.zeros(len(points)))
    off_diag = lap[~np.eye(len(points), dtype=bool)]
    assert np.all(np.isin(off_diag, [0, -1]))
    for i, nbrs in enumerate(part.neighbors):
        for j in nbrs:
            assert i in part.neighbors[j]
