"""Test functions on configurations, with structure hints for the generator.

A test function may declare how its value changes under a single birth:
``cardinality_increment(n)`` when the change depends only on the current
population, or ``point_increment(x)`` when the change is a pure function
of the new point.  The generator evaluator exploits either hint to avoid
generic quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .configuration import Configuration


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # not a pytest class

    name: str
    fn: Callable[[Configuration], float]
    sup_bound: Optional[float] = None
    cardinality_increment: Optional[Callable[[int], float]] = None
    point_increment: Optional[Callable[[np.ndarray], float]] = None

    def __call__(self, eta: Configuration) -> float:
        return self.fn(eta)


def size() -> TestFunction:
    """f(eta) = |eta|; unbounded but integrable on certified models."""
    return TestFunction("size", lambda eta: float(len(eta)), None, lambda n: 1.0)


def capped_size(cap: int) -> TestFunction:
    """f(eta) = min(|eta|, cap)."""
    return TestFunction(
        f"capped_size_{cap}",
        lambda eta: float(min(len(eta), cap)),
        float(cap),
        lambda n: 1.0 if n < cap else 0.0,
    )


def indicator_leq(cap: int) -> TestFunction:
    """f(eta) = 1{|eta| <= cap}."""
    return TestFunction(
        f"indicator_leq_{cap}",
        lambda eta: 1.0 if len(eta) <= cap else 0.0,
        1.0,
        lambda n: -1.0 if n == cap else 0.0,
    )


def soft_count() -> TestFunction:
    """f(eta) = sum over particles of exp(-|x|^2), a smoothly localised count."""

    def g(x: np.ndarray) -> float:
        return math.exp(-float(np.dot(x, x)))

    def fn(eta: Configuration) -> float:
        if len(eta) == 0:
            return 0.0
        return float(np.sum(np.exp(-np.sum(eta.positions**2, axis=1))))

    return TestFunction("soft_count", fn, None, None, g)
