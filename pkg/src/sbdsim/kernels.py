"""Dispersal kernels and sampling regions used by the built-in rate models.

Kernels are probability densities on R^d (total mass 1) with exact
samplers.  Regions are axis-aligned boxes with uniform sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .rng import Stream


@lru_cache(maxsize=16)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=16)
def _hermegauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _ball_volume(dimension: int, radius: float) -> float:
    return math.pi ** (dimension / 2.0) / math.gamma(dimension / 2.0 + 1.0) * radius**dimension


@dataclass(frozen=True)
class UniformBallKernel:
    """Uniform density on the closed ball of the given radius."""

    radius: float
    dimension: int

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def height(self) -> float:
        return 1.0 / _ball_volume(self.dimension, self.radius)

    def density(self, z: np.ndarray) -> float:
        return self.height if float(np.linalg.norm(z)) <= self.radius else 0.0

    def support_radius(self) -> float:
        return self.radius

    def sample(self, stream: Stream) -> np.ndarray:
        d = self.dimension
        if d == 1:
            return np.array([(2.0 * stream.uniform() - 1.0) * self.radius])
        # isotropic direction times radius ~ r * U^(1/d)
        v = np.array([stream.standard_normal() for _ in range(d)])
        norm = float(np.linalg.norm(v))
        while norm == 0.0:
            v = np.array([stream.standard_normal() for _ in range(d)])
            norm = float(np.linalg.norm(v))
        r = self.radius * stream.open_uniform() ** (1.0 / d)
        return v / norm * r

    def integral_against(self, g: Callable[[np.ndarray], float], center: np.ndarray) -> float:
        """Integral of a(z) g(center + z) dz by fixed-order Gauss-Legendre."""
        if self.dimension == 1:
            nodes, weights = _leggauss(64)
            xs = center[0] + nodes * self.radius
            vals = np.array([g(np.array([x])) for x in xs])
            return float(np.sum(weights * vals) * self.radius * self.height)
        # product rule over the bounding box, density zero outside the ball
        nodes, weights = _leggauss(48)
        grids = np.meshgrid(*([nodes] * self.dimension), indexing="ij")
        pts = np.stack([gg.ravel() for gg in grids], axis=1) * self.radius
        wts = np.prod(
            np.stack(np.meshgrid(*([weights] * self.dimension), indexing="ij"), axis=-1), axis=-1
        ).ravel()
        inside = np.linalg.norm(pts, axis=1) <= self.radius
        vals = np.array([g(center + z) if ok else 0.0 for z, ok in zip(pts, inside)])
        return float(np.sum(wts * vals) * self.radius**self.dimension * self.height)


@dataclass(frozen=True)
class GaussianKernel:
    """Isotropic Gaussian density with scale sigma."""

    sigma: float
    dimension: int

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def density(self, z: np.ndarray) -> float:
        d = self.dimension
        q = float(np.dot(z, z)) / (2.0 * self.sigma**2)
        return math.exp(-q) / ((2.0 * math.pi) ** (d / 2.0) * self.sigma**d)

    def support_radius(self) -> float:
        # effective support for bounding boxes and quadrature
        return 10.0 * self.sigma

    def sample(self, stream: Stream) -> np.ndarray:
        return np.array([self.sigma * stream.standard_normal() for _ in range(self.dimension)])

    def integral_against(self, g: Callable[[np.ndarray], float], center: np.ndarray) -> float:
        """Integral of a(z) g(center + z) dz by tensor Gauss-Hermite."""
        nodes, weights = _hermegauss(48)
        d = self.dimension
        if d == 1:
            xs = center[0] + nodes * self.sigma
            vals = np.array([g(np.array([x])) for x in xs])
            return float(np.sum(weights * vals) / math.sqrt(2.0 * math.pi))
        grids = np.meshgrid(*([nodes] * d), indexing="ij")
        pts = np.stack([gg.ravel() for gg in grids], axis=1) * self.sigma
        wts = np.prod(
            np.stack(np.meshgrid(*([weights] * d), indexing="ij"), axis=-1), axis=-1
        ).ravel()
        vals = np.array([g(center + z) for z in pts])
        return float(np.sum(wts * vals) / (2.0 * math.pi) ** (d / 2.0))


Kernel = UniformBallKernel | GaussianKernel


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with uniform sampling."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for lo, hi in b:
            if not hi > lo:
                raise ValueError("box bounds must satisfy lo < hi")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def cube(cls, lo: float, hi: float, dimension: int) -> "Box":
        return cls(tuple((lo, hi) for _ in range(dimension)))

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    @property
    def volume(self) -> float:
        v = 1.0
        for lo, hi in self.bounds:
            v *= hi - lo
        return v

    def contains(self, x: Sequence[float]) -> bool:
        return all(lo <= c <= hi for c, (lo, hi) in zip(x, self.bounds))

    def sample(self, stream: Stream) -> np.ndarray:
        return np.array([lo + (hi - lo) * stream.uniform() for lo, hi in self.bounds])

    def mean_of(self, g: Callable[[np.ndarray], float]) -> float:
        """Average of g over the box by tensor Gauss-Legendre."""
        nodes, weights = _leggauss(64 if self.dimension == 1 else 24)
        axes = []
        for lo, hi in self.bounds:
            axes.append(0.5 * (hi - lo) * nodes + 0.5 * (hi + lo))
        if self.dimension == 1:
            vals = np.array([g(np.array([x])) for x in axes[0]])
            return float(np.sum(weights * vals) / 2.0)
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([gg.ravel() for gg in grids], axis=1)
        wts = np.prod(
            np.stack(np.meshgrid(*([weights] * self.dimension), indexing="ij"), axis=-1), axis=-1
        ).ravel()
        vals = np.array([g(p) for p in pts])
        return float(np.sum(wts * vals) / 2.0**self.dimension)
