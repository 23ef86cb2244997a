"""Generator evaluation, martingale residuals, semigroup estimates and the
statistical test utilities that tie simulation output back to closed-form
laws.

The time integral in the martingale residual is exact: trajectories are
piecewise constant, so the integral of the generator along a path is the
sum of generator values times interval lengths.  All Monte-Carlo
reductions use compensated summation, so the result does not depend on
reduction order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .configuration import Configuration
from .functionals import TestFunction
from .rates import RateModel, _integrate_over_box
from .rng import StreamKey
from .simulate import (
    BIRTH,
    Caps,
    Trajectory,
    _LiveState,
    population_at,
    expectation_bound,
    simulate,
    state_at,
)


@dataclass(frozen=True)
class SimReport:
    """Monte-Carlo summary: point estimate, its standard error, sample
    count and any named side statistics."""

    estimate: float
    standard_error: float
    n_samples: int
    test_statistics: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-6


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    if n == 0:
        raise ValueError("no samples to summarise")
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


class GeneratorEvaluator:
    """Applies the generator of a model to states along one trajectory.

    Death sums are exact.  The birth integral uses the cheapest exact
    route the test function admits: a closed form for cardinality-only
    increments, per-component integration of a point increment (cached
    per particle position), and adaptive quadrature otherwise.
    """

    def __init__(self, model: RateModel, f: TestFunction, quad: QuadratureSpec | None = None):
        self.model = model
        self.f = f
        self.quad = quad or QuadratureSpec()
        self._point_cache: dict[tuple[float, ...], float] = {}
        self._region_means: dict[int, float] = {}

    def __call__(self, eta: Configuration) -> float:
        return self._birth_term(eta) + self._death_term(eta)

    def _death_term(self, eta: Configuration) -> float:
        model, f = self.model, self.f
        if not model.deaths or len(eta) == 0:
            return 0.0
        n = len(eta)
        if f.cardinality_increment is not None:
            drop = -f.cardinality_increment(n - 1)
            if drop == 0.0:
                return 0.0
            return drop * model.cumulative_death_rate(eta)
        rates = model.death_rates(eta)
        total = 0.0
        base = None
        for i in range(n):
            rate = float(rates[i])
            if rate == 0.0:
                continue
            if f.point_increment is not None:
                diff = -self._g(tuple(eta.positions[i].tolist()))
            else:
                if base is None:
                    base = f(eta)
                diff = f(eta.remove(eta.indices[i])) - base
            total += rate * diff
        return total

    def _birth_term(self, eta: Configuration) -> float:
        model, f = self.model, self.f
        if not model.births:
            return 0.0
        if f.cardinality_increment is not None:
            inc = f.cardinality_increment(len(eta))
            if inc == 0.0:
                return 0.0
            return inc * model.cumulative_birth_rate(eta)
        if f.point_increment is not None:
            return self._point_birth_term(eta)
        return self._generic_birth_term(eta)

    def _g(self, pt: tuple[float, ...]) -> float:
        v = self._point_cache.get(pt)
        if v is None:
            v = self.f.point_increment(np.asarray(pt))
            self._point_cache[pt] = v
        return v

    def _point_birth_term(self, eta: Configuration) -> float:
        from .rates import ContactBirth, ImmigrationBirth, SuperlinearBirth

        g = self.f.point_increment
        total = 0.0
        for ci, comp in enumerate(self.model.births):
            if isinstance(comp, ContactBirth):
                s = 0.0
                for i in range(len(eta)):
                    pt = tuple(eta.positions[i].tolist())
                    key = ("conv", ci, pt)
                    v = self._point_cache.get(key)
                    if v is None:
                        v = comp.kernel.integral_against(g, eta.positions[i])
                        self._point_cache[key] = v
                    s += v
                total += comp.lam * s
            elif isinstance(comp, (ImmigrationBirth, SuperlinearBirth)):
                m = self._region_means.get(ci)
                if m is None:
                    m = comp.region.mean_of(g)
                    self._region_means[ci] = m
                total += comp.total_rate(eta) * m
            else:
                total += comp.integral_against(g, eta)
        return total

    def _generic_birth_term(self, eta: Configuration) -> float:
        box = self.model.support_box(eta)
        if box is None:
            return 0.0
        f = self.f
        base = f(eta)
        fresh = max((i for i in eta.indices if i > 0), default=0) + 1

        def integrand(x: np.ndarray) -> float:
            b = self.model.birth_rate(x, eta)
            if b == 0.0:
                return 0.0
            return b * (f(eta.add(fresh, x)) - base)

        return _integrate_over_box(integrand, box, rel_tol=self.quad.rel_tol)


def generator_apply(
    model: RateModel,
    f: TestFunction,
    eta: Configuration,
    quad: QuadratureSpec | None = None,
) -> float:
    """Value of the model's generator applied to f at the state eta."""
    return GeneratorEvaluator(model, f, quad)(eta)


def _path_integral(
    traj: Trajectory, upto: float, gen: GeneratorEvaluator
) -> float:
    """Exact integral of (generator f)(state) over [0, upto]."""
    parts: list[float] = []
    state = _LiveState(traj.initial)
    t_prev = 0.0
    for e in traj.events:
        if e.time > upto:
            break
        if e.time > t_prev:
            parts.append(gen(state.to_configuration()) * (e.time - t_prev))
        if e.kind == BIRTH:
            state.add(e.particle_index, e.position)
        else:
            state.remove_at(state.idx.index(e.particle_index))
        t_prev = e.time
    if upto > t_prev:
        parts.append(gen(state.to_configuration()) * (upto - t_prev))
    return math.fsum(parts)


def _warn_exclusions(n_excluded: int, n_traj: int, what: str) -> None:
    if n_excluded > 0.01 * n_traj:
        warnings.warn(
            f"{what}: {n_excluded} of {n_traj} trajectories hit a cap and were excluded",
            stacklevel=3,
        )


def martingale_residual(
    model: RateModel,
    f: TestFunction,
    eta0: Configuration,
    t: float,
    n_traj: int,
    key: StreamKey,
    caps: Caps = Caps(),
    quad: QuadratureSpec | None = None,
) -> SimReport:
    """Monte-Carlo mean of f(eta_t) - f(eta_0) - integral of (generator f).

    Zero mean within noise is the observable content of the martingale
    property.  Capped trajectories are excluded and counted.
    """
    if model.certificate is None:
        raise ValueError("martingale residuals require a certified model")
    f0 = f(eta0)
    residuals: list[float] = []
    excluded = 0
    for j in range(n_traj):
        traj = simulate(model, eta0, t, key.for_trajectory(key.trajectory + j), caps)
        if traj.status.kind == "cap_hit":
            excluded += 1
            continue
        gen = GeneratorEvaluator(model, f, quad)
        integral = _path_integral(traj, t, gen)
        residuals.append(f(state_at(traj, t)) - f0 - integral)
    _warn_exclusions(excluded, n_traj, "martingale_residual")
    mean, se = _mean_se(residuals)
    return SimReport(mean, se, len(residuals), {"n_excluded": float(excluded)})


def semigroup_estimate(
    model: RateModel,
    f: TestFunction,
    alpha: Configuration,
    t: float,
    n_traj: int,
    key: StreamKey,
    caps: Caps = Caps(),
) -> SimReport:
    """Monte-Carlo estimate of E f(eta_t) started from alpha."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return SimReport(f(alpha), 0.0, n_traj, {"n_excluded": 0.0})
    values: list[float] = []
    excluded = 0
    for j in range(n_traj):
        traj = simulate(model, alpha, t, key.for_trajectory(key.trajectory + j), caps)
        if traj.status.kind == "cap_hit":
            excluded += 1
            continue
        values.append(f(state_at(traj, t)))
    _warn_exclusions(excluded, n_traj, "semigroup_estimate")
    mean, se = _mean_se(values)
    return SimReport(mean, se, len(values), {"n_excluded": float(excluded)})


@dataclass(frozen=True)
class GeneratorGapRow:
    t: float
    quotient: float
    generator_value: float
    gap: float
    standard_error: float


def generator_limit_check(
    model: RateModel,
    f: TestFunction,
    alpha: Configuration,
    t_grid: Sequence[float],
    n_traj: int,
    key: StreamKey,
    caps: Caps = Caps(),
    quad: QuadratureSpec | None = None,
) -> list[GeneratorGapRow]:
    """Difference quotients (E f(eta_t) - f(alpha))/t against the generator.

    All grid points reuse the same trajectories (common random numbers),
    so the gap sequence is directly comparable down the grid.
    """
    grid = list(t_grid)
    if not grid or any(t <= 0 for t in grid):
        raise ValueError("t_grid must contain positive times")
    if any(b > a for a, b in zip(grid, grid[1:])) and any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("t_grid must be monotone")
    horizon = max(grid)
    f0 = f(alpha)
    lf = generator_apply(model, f, alpha, quad)
    per_t_values: dict[float, list[float]] = {t: [] for t in grid}
    excluded = 0
    for j in range(n_traj):
        traj = simulate(model, alpha, horizon, key.for_trajectory(key.trajectory + j), caps)
        if traj.status.kind == "cap_hit":
            excluded += 1
            continue
        for t in grid:
            per_t_values[t].append(f(state_at(traj, t)))
    _warn_exclusions(excluded, n_traj, "generator_limit_check")
    rows = []
    for t in grid:
        mean, se = _mean_se(per_t_values[t])
        quotient = (mean - f0) / t
        rows.append(GeneratorGapRow(t, quotient, lf, abs(quotient - lf), se / t))
    return rows


def mean_size_curve(
    model: RateModel,
    eta0: Configuration,
    t_grid: Sequence[float],
    n_traj: int,
    key: StreamKey,
    caps: Caps = Caps(),
) -> list[SimReport]:
    """Empirical mean population at each grid time, with the linear-growth
    bound check recorded in the test statistics."""
    if model.certificate is None:
        raise ValueError("mean_size_curve requires a certified model")
    grid = list(t_grid)
    if any(t < 0 for t in grid):
        raise ValueError("grid times must be nonnegative")
    horizon = max(grid)
    if horizon <= 0:
        raise ValueError("the grid must reach a positive time")
    sizes: dict[float, list[int]] = {t: [] for t in grid}
    excluded = 0
    for j in range(n_traj):
        traj = simulate(model, eta0, horizon, key.for_trajectory(key.trajectory + j), caps)
        if traj.status.kind == "cap_hit":
            excluded += 1
            continue
        for t in grid:
            sizes[t].append(population_at(traj, t))
    _warn_exclusions(excluded, n_traj, "mean_size_curve")
    reports = []
    for t in grid:
        mean, se = _mean_se(sizes[t])
        bound = expectation_bound(float(len(eta0)), model.certificate, t)
        reports.append(
            SimReport(
                mean,
                se,
                len(sizes[t]),
                {
                    "t": t,
                    "bound": bound,
                    "within_bound": 1.0 if mean - 3.0 * se <= bound else 0.0,
                    "n_excluded": float(excluded),
                },
            )
        )
    return reports


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    thresholds: dict[str, float]

    def passed(self, level: str = "0.001") -> bool:
        return self.statistic < self.thresholds[level]


_KS_COEFF = {"0.05": 1.358, "0.001": 1.949}


def ks_exponential(samples: Sequence[float], rate: float) -> KsResult:
    """One-sample Kolmogorov-Smirnov statistic against Exp(rate)."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.size
    if n < 100:
        raise ValueError("need at least 100 samples")
    if rate <= 0:
        raise ValueError("rate must be positive")
    if np.any(xs <= 0):
        raise ValueError("samples must be positive")
    cdf = 1.0 - np.exp(-rate * xs)
    grid = np.arange(1, n + 1) / n
    d_plus = float(np.max(grid - cdf))
    d_minus = float(np.max(cdf - (grid - 1.0 / n)))
    stat = max(d_plus, d_minus)
    thresholds = {lvl: c / math.sqrt(n) for lvl, c in _KS_COEFF.items()}
    return KsResult(stat, n, thresholds)


def two_sample_ks(a: Sequence[float], b: Sequence[float]) -> KsResult:
    """Two-sample Kolmogorov-Smirnov statistic on empirical CDFs."""
    xa = np.sort(np.asarray(a, dtype=float))
    xb = np.sort(np.asarray(b, dtype=float))
    n, m = xa.size, xb.size
    if n < 100 or m < 100:
        raise ValueError("need at least 100 samples on each side")
    pooled = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, pooled, side="right") / n
    fb = np.searchsorted(xb, pooled, side="right") / m
    stat = float(np.max(np.abs(fa - fb)))
    scale = math.sqrt((n + m) / (n * m))
    thresholds = {lvl: c * scale for lvl, c in _KS_COEFF.items()}
    return KsResult(stat, min(n, m), thresholds)
