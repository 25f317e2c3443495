"""Grid-rasterized Voronoi partitions and the induced communication graph.

The workspace is a rectangle discretized into square pixels. Ownership of a
pixel goes to the nearest agent (measured at the pixel center), ties to the
lowest agent index. Two agents are neighbors when their regions share at
least one 4-adjacent pixel edge, which on a grid is the Delaunay relation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import OutsideDomainError


@dataclass(frozen=True)
class Domain:
    """Discretized rectangular workspace.

    Pixel ``(ix, iy)`` has its center at ``((ix + 0.5) * cell_size,
    (iy + 0.5) * cell_size)``; world coordinates span
    ``[0, width * cell_size] x [0, height * cell_size]``.
    """

    width: int
    height: int
    cell_size: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"domain must be at least 1x1 pixels, got {self.width}x{self.height}")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")

    @property
    def world_width(self) -> float:
        return self.width * self.cell_size

    @property
    def world_height(self) -> float:
        return self.height * self.cell_size

    @property
    def pixel_area(self) -> float:
        return self.cell_size * self.cell_size

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def axis_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates along each axis: ``(x (W,), y (H,))``."""
        xs = (np.arange(self.width) + 0.5) * self.cell_size
        ys = (np.arange(self.height) + 0.5) * self.cell_size
        return xs, ys

    @cached_property
    def pixel_centers(self) -> np.ndarray:
        """All pixel centers, shape ``(H * W, 2)``, row-major (y outer)."""
        xs, ys = self.axis_centers()
        gx, gy = np.meshgrid(xs, ys)
        out = np.column_stack([gx.ravel(), gy.ravel()])
        out.setflags(write=False)
        return out

    def contains(self, point) -> bool:
        x, y = float(point[0]), float(point[1])
        return 0.0 <= x <= self.world_width and 0.0 <= y <= self.world_height

    def clamp(self, point) -> np.ndarray:
        """Coordinatewise projection onto the closed workspace rectangle."""
        p = np.asarray(point, dtype=float)
        return np.clip(p, 0.0, [self.world_width, self.world_height])


@dataclass(frozen=True, eq=False)
class VoronoiPartition:
    """Pixel ownership plus the neighbor graph it induces.

    ``owner`` is ``(H, W)`` with the winning agent index per pixel.
    ``cells[i]`` holds agent i's pixels as sorted flat row-major indices.
    ``neighbors[i]`` is a sorted tuple of adjacent agent indices and
    ``laplacian`` is the integer graph Laplacian ``D - A`` of that relation.
    """

    owner: np.ndarray
    cells: tuple[np.ndarray, ...]
    neighbors: tuple[tuple[int, ...], ...]
    laplacian: np.ndarray

    @property
    def n_agents(self) -> int:
        return len(self.cells)

    def edges(self) -> list[tuple[int, int]]:
        """Undirected neighbor pairs ``(i, j)`` with ``i < j``."""
        return [(i, j) for i, nbrs in enumerate(self.neighbors) for j in nbrs if i < j]


@dataclass(frozen=True, eq=False)
class CellPixels:
    """Pixel centers of one Voronoi cell with their common quadrature area."""

    centers: np.ndarray
    pixel_area: float

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def geometric_center(self) -> np.ndarray:
        if len(self.centers) == 0:
            raise ValueError("empty cell has no geometric center")
        return self.centers.mean(axis=0)


def compute_partition(positions, domain: Domain) -> VoronoiPartition:
    """Assign every pixel to its nearest agent and build the neighbor graph.

    Distances are compared between pixel centers and agent positions; exact
    ties go to the lowest agent index. Raises ``OutsideDomainError`` if any
    position falls outside the workspace rectangle.
    """
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if pos.ndim != 2 or pos.shape[1] != 2 or len(pos) == 0:
        raise ValueError(f"positions must be a non-empty (n, 2) array, got shape {pos.shape}")
    for i, p in enumerate(pos):
        if not domain.contains(p):
            raise OutsideDomainError(f"agent {i} at ({p[0]}, {p[1]}) is outside the workspace")

    xs, ys = domain.axis_centers()
    # (n, H, W) squared distances; argmin returns the first (lowest) index on ties
    d2 = (xs[None, None, :] - pos[:, 0, None, None]) ** 2 \
        + (ys[None, :, None] - pos[:, 1, None, None]) ** 2
    owner = np.argmin(d2, axis=0)

    n = len(pos)
    flat = owner.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    cells = tuple(order[bounds[i]:bounds[i + 1]] for i in range(n))

    neighbors = _adjacent_pairs(owner, n)
    return VoronoiPartition(owner, cells, neighbors, laplacian_of(neighbors))


def _adjacent_pairs(owner: np.ndarray, n: int) -> tuple[tuple[int, ...], ...]:
    # horizontal and vertical pixel-edge crossings between different owners
    pairs = []
    for a, b in ((owner[:, :-1], owner[:, 1:]), (owner[:-1, :], owner[1:, :])):
        mask = a != b
        if mask.any():
            lo = np.minimum(a[mask], b[mask])
            hi = np.maximum(a[mask], b[mask])
            pairs.append(lo.astype(np.int64) * n + hi.astype(np.int64))
    adj: list[set[int]] = [set() for _ in range(n)]
    if pairs:
        for code in np.unique(np.concatenate(pairs)):
            i, j = divmod(int(code), n)
            adj[i].add(j)
            adj[j].add(i)
    return tuple(tuple(sorted(s)) for s in adj)


def laplacian_of(neighbors) -> np.ndarray:
    """Integer graph Laplacian ``D - A`` of a symmetric neighbor relation.

    ``neighbors[i]`` lists the agents adjacent to i. Self-loops, out-of-range
    indices, and asymmetric relations are rejected.
    """
    n = len(neighbors)
    adjacency = np.zeros((n, n), dtype=np.int64)
    for i, nbrs in enumerate(neighbors):
        for j in nbrs:
            j = int(j)
            if j == i:
                raise ValueError(f"agent {i} lists itself as a neighbor")
            if not 0 <= j < n:
                raise ValueError(f"neighbor index {j} out of range for {n} agents")
            adjacency[i, j] = 1
    if not np.array_equal(adjacency, adjacency.T):
        raise ValueError("neighbor relation is not symmetric")
    return np.diag(adjacency.sum(axis=1)) - adjacency


def cell_pixels(partition: VoronoiPartition, agent: int, domain: Domain) -> CellPixels:
    """Pixel centers owned by ``agent`` with their quadrature area."""
    idx = partition.cells[agent]
    return CellPixels(domain.pixel_centers[idx], domain.pixel_area)
