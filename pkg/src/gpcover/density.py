"""Ground-truth density fields: Gaussian mixtures rasterized onto the grid.

Scenario layouts are defined on a 960x540 canonical workspace; building one
on a smaller or larger domain rescales blob centers with the domain and blob
widths with the horizontal scale factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor

import numpy as np

from .errors import ConfigurationError, OutsideDomainError
from .geometry import Domain

CANONICAL_WIDTH = 960.0
CANONICAL_HEIGHT = 540.0


@dataclass(frozen=True)
class GaussianBlob:
    """Isotropic Gaussian bump ``amplitude * exp(-||q - center||^2 / (2 sigma^2))``."""

    center: tuple[float, float]
    sigma: float
    amplitude: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class GaussianMixture:
    """Sum of Gaussian blobs over a constant non-negative background."""

    blobs: tuple[GaussianBlob, ...]
    background: float = 0.0

    def value_at(self, points) -> np.ndarray:
        """Evaluate the mixture at ``(k, 2)`` points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), float(self.background))
        for blob in self.blobs:
            d2 = ((pts - np.asarray(blob.center)) ** 2).sum(axis=1)
            out += blob.amplitude * np.exp(-d2 / (2.0 * blob.sigma ** 2))
        return out


@dataclass(frozen=True, eq=False)
class DensityField:
    """Non-negative density sampled at every pixel center, shape ``(H, W)``."""

    domain: Domain
    values: np.ndarray
    analytic: GaussianMixture | None = None

    def __post_init__(self):
        if self.values.shape != (self.domain.height, self.domain.width):
            raise ValueError(
                f"values shape {self.values.shape} does not match domain "
                f"{self.domain.height}x{self.domain.width}")
        if np.any(self.values < 0):
            raise ValueError("density values must be non-negative")

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    @classmethod
    def from_mixture(cls, domain: Domain, mixture: GaussianMixture) -> "DensityField":
        xs, ys = domain.axis_centers()
        gx, gy = np.meshgrid(xs, ys)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        values = mixture.value_at(pts).reshape(domain.height, domain.width)
        return cls(domain, values, mixture)

    @classmethod
    def constant(cls, domain: Domain, level: float = 1.0) -> "DensityField":
        mixture = GaussianMixture(blobs=(), background=level)
        return cls(domain, np.full((domain.height, domain.width), float(level)), mixture)


def bilinear(field: DensityField, point) -> float:
    """Bilinear interpolation of the grid at a continuous workspace position.

    Exact at pixel centers; positions between the outermost pixel centers and
    the workspace boundary clamp to the edge row/column. Raises
    ``OutsideDomainError`` outside the workspace rectangle.
    """
    domain = field.domain
    if not domain.contains(point):
        raise OutsideDomainError(f"position ({point[0]}, {point[1]}) is outside the workspace")
    s = domain.cell_size
    u = float(point[0]) / s - 0.5
    v = float(point[1]) / s - 0.5
    u = min(max(u, 0.0), domain.width - 1.0)
    v = min(max(v, 0.0), domain.height - 1.0)
    ix = min(int(floor(u)), max(domain.width - 2, 0))
    iy = min(int(floor(v)), max(domain.height - 2, 0))
    fx = min(u - ix, 1.0) if domain.width > 1 else 0.0
    fy = min(v - iy, 1.0) if domain.height > 1 else 0.0
    jx = min(ix + 1, domain.width - 1)
    jy = min(iy + 1, domain.height - 1)
    vals = field.values
    return float((1.0 - fx) * (1.0 - fy) * vals[iy, ix]
                 + fx * (1.0 - fy) * vals[iy, jx]
                 + (1.0 - fx) * fy * vals[jy, ix]
                 + fx * fy * vals[jy, jx])


def _scales(domain: Domain) -> tuple[float, float, float]:
    sx = domain.world_width / CANONICAL_WIDTH
    sy = domain.world_height / CANONICAL_HEIGHT
    return sx, sy, sx


def four_gaussians(domain: Domain) -> DensityField:
    """Four equal unit-amplitude bumps near the workspace corners."""
    sx, sy, ss = _scales(domain)
    centers = [(100.0, 100.0), (850.0, 450.0), (100.0, 450.0), (850.0, 100.0)]
    blobs = tuple(GaussianBlob((cx * sx, cy * sy), 10.0 * ss, 1.0) for cx, cy in centers)
    return DensityField.from_mixture(domain, GaussianMixture(blobs))


def hotspots(domain: Domain) -> DensityField:
    """Three unequal-width bumps of amplitude 150 over a background of 20."""
    w, h = domain.world_width, domain.world_height
    _, _, ss = _scales(domain)
    layout = [((0.2 * w, 0.3 * h), 80.0), ((0.8 * w, 0.7 * h), 120.0), ((0.6 * w, 0.2 * h), 60.0)]
    blobs = tuple(GaussianBlob(center, sigma * ss, 150.0) for center, sigma in layout)
    return DensityField.from_mixture(domain, GaussianMixture(blobs, background=20.0))


def single_peak(domain: Domain) -> DensityField:
    """One central bump of amplitude 150."""
    _, _, ss = _scales(domain)
    center = (domain.world_width / 2.0, domain.world_height / 2.0)
    mixture = GaussianMixture((GaussianBlob(center, 80.0 * ss, 150.0),))
    return DensityField.from_mixture(domain, mixture)


def uniform(domain: Domain) -> DensityField:
    """Constant density of 1 everywhere."""
    return DensityField.constant(domain, 1.0)


_SCENARIOS = {
    "four_gaussians": four_gaussians,
    "hotspots": hotspots,
    "single_peak": single_peak,
    "uniform": uniform,
}


def build_scenario(name: str, domain: Domain, params: dict | None = None) -> DensityField:
    """Construct a named density scenario on the given domain.

    ``custom`` takes ``params`` with ``blobs`` (rows of
    ``[cx, cy, sigma, amplitude]`` in world coordinates) and an optional
    ``background``. The named scenarios take no parameters.
    """
    if name == "custom":
        params = params or {}
        blobs = tuple(GaussianBlob((float(b[0]), float(b[1])), float(b[2]), float(b[3]))
                      for b in params.get("blobs", ()))
        background = float(params.get("background", 0.0))
        return DensityField.from_mixture(domain, GaussianMixture(blobs, background))
    if name not in _SCENARIOS:
        known = ", ".join(sorted([*_SCENARIOS, "custom"]))
        raise ConfigurationError(f"unknown scenario {name!r}; expected one of: {known}")
    if params:
        raise ConfigurationError(f"scenario {name!r} takes no parameters")
    return _SCENARIOS[name](domain)
