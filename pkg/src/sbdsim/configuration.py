"""Finite point configurations with persistent particle identities.

A configuration is a finite set of pairwise-distinct points in R^d.  Each
particle carries an integer label that survives for its whole lifetime:
initial particles are labelled 0, -1, -2, ... following the lexicographic
order of their positions, and every later birth takes the smallest unused
positive label.  Labels are never reused.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


def as_point(coords: Sequence[float], dimension: int | None = None) -> np.ndarray:
    """Validate and return a point of R^d as a 1-d float array."""
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("a point must be a non-empty 1-d coordinate vector")
    if dimension is not None and x.size != dimension:
        raise ValueError(f"expected dimension {dimension}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point coordinates must be finite")
    x.setflags(write=False)
    return x


def lex_compare(a: Sequence[float], b: Sequence[float]) -> int:
    """Lexicographic comparison of two points: -1, 0 or +1."""
    pa = np.asarray(a, dtype=float)
    pb = np.asarray(b, dtype=float)
    if pa.shape != pb.shape:
        raise ValueError("lex_compare requires points of equal dimension")
    for u, v in zip(pa.tolist(), pb.tolist()):
        if u < v:
            return -1
        if u > v:
            return 1
    return 0


def _check_distinct(positions: np.ndarray) -> None:
    n = positions.shape[0]
    if n < 2:
        return
    order = np.lexsort(positions.T[::-1])
    sorted_pos = positions[order]
    if np.any(np.all(sorted_pos[1:] == sorted_pos[:-1], axis=1)):
        raise ValueError("configuration positions must be pairwise distinct")


@dataclass(frozen=True)
class Configuration:
    """A finite labelled configuration in R^d.

    ``positions`` is an (n, d) array, ``indices`` the matching particle
    labels.  Instances are immutable; all operations return new values.
    """

    positions: np.ndarray
    indices: tuple[int, ...]
    dimension: int

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2:
            pos = pos.reshape(-1, self.dimension)
        if pos.shape[0] != len(self.indices):
            raise ValueError("positions and indices disagree in length")
        if pos.shape[0] > 0 and pos.shape[1] != self.dimension:
            raise ValueError("positions disagree with the declared dimension")
        if not np.all(np.isfinite(pos)):
            raise ValueError("configuration coordinates must be finite")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("particle indices must be pairwise distinct")
        _check_distinct(pos)
        pos = pos.copy()
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]], dimension: int | None = None) -> "Configuration":
        """Build an initial configuration, labelling points 0, -1, ... in lexicographic order."""
        pts = [tuple(float(c) for c in p) for p in points]
        if dimension is None:
            if not pts:
                raise ValueError("dimension is required for an empty configuration")
            dimension = len(pts[0])
        pts_sorted = sorted(pts)
        indices = tuple(-k for k in range(len(pts_sorted)))
        arr = np.asarray(pts_sorted, dtype=float).reshape(len(pts_sorted), dimension)
        return cls(arr, indices, dimension)

    @classmethod
    def empty(cls, dimension: int) -> "Configuration":
        return cls(np.empty((0, dimension)), (), dimension)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        for i, idx in enumerate(self.indices):
            yield idx, self.positions[i]

    def position_of(self, index: int) -> np.ndarray:
        i = self.indices.index(index)
        return self.positions[i]

    def contains_position(self, point: Sequence[float]) -> bool:
        if len(self) == 0:
            return False
        x = np.asarray(point, dtype=float)
        return bool(np.any(np.all(self.positions == x, axis=1)))

    def add(self, index: int, point: Sequence[float]) -> "Configuration":
        x = as_point(point, self.dimension)
        if index in self.indices:
            raise ValueError(f"particle index {index} is already alive")
        pos = np.vstack([self.positions, x[None, :]]) if len(self) else x[None, :]
        return Configuration(pos, self.indices + (index,), self.dimension)

    def remove(self, index: int) -> "Configuration":
        i = self.indices.index(index)
        keep = [j for j in range(len(self)) if j != i]
        return Configuration(
            self.positions[keep], tuple(self.indices[j] for j in keep), self.dimension
        )

    def position_tuples(self) -> list[tuple[float, ...]]:
        return [tuple(row) for row in self.positions.tolist()]

    def count_in_ball(self, radius: float, center: Sequence[float] | None = None) -> int:
        """Number of particles inside the closed ball of given radius."""
        if len(self) == 0:
            return 0
        c = np.zeros(self.dimension) if center is None else np.asarray(center, dtype=float)
        return int(np.sum(np.linalg.norm(self.positions - c, axis=1) <= radius))


@dataclass(frozen=True)
class ParticleRegistry:
    """Allocator for persistent particle labels.

    Initial particles get 0, -1, ..., -(n-1) in lexicographic position
    order; every birth takes the next positive label.  ``allocate`` is
    functional: it returns the fresh label and the advanced registry.
    """

    next_birth_index: int = 1
    initial_assignment: tuple[tuple[int, tuple[float, ...]], ...] = field(default_factory=tuple)

    @classmethod
    def for_initial(cls, config: Configuration) -> "ParticleRegistry":
        assignment = tuple(
            (idx, tuple(pos.tolist())) for idx, pos in config
        )
        used = max((i for i in config.indices if i > 0), default=0)
        return cls(next_birth_index=used + 1, initial_assignment=assignment)

    def allocate(self) -> tuple[int, "ParticleRegistry"]:
        return self.next_birth_index, ParticleRegistry(
            self.next_birth_index + 1, self.initial_assignment
        )
