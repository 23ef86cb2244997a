"""Statistical verification suites.

Every check compares simulator output against an independent quantitative
law: exponential first-jump times, the birth/death split, closed-form
population means, pathwise coupling inclusion, martingale residuals, the
small-time generator limit, explosion detection, metric correctness and
shared-noise continuity.  The same functions back the ``verify`` CLI
command and the acceptance test suite; sizes default to the full
acceptance-grade sample counts and can be scaled down for quick runs.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .analysis import (
    generator_apply,
    ks_exponential,
    martingale_residual,
    mean_size_curve,
    semigroup_estimate,
    two_sample_ks,
)
from .configuration import Configuration, ParticleRegistry
from .coupling import inclusion_flags, simulate_coupled, sup_distance_shared_noise
from .functionals import capped_size, size, soft_count
from .kernels import Box, UniformBallKernel
from .metric import brute_force_matching_distance, dist, euclidean_matching_distance
from .rates import combine, constant_death, contact, superlinear_birth
from .rng import NoiseSource, StreamKey
from .simulate import Caps, next_event, population_at, simulate, yule_mean


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    threshold: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "verdict": "pass" if self.passed else "fail",
            "detail": self.detail,
        }


def default_jobs() -> int:
    env = os.environ.get("SBDSIM_JOBS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def _pool_map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) < 4:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (jobs * 8))
    with multiprocessing.Pool(jobs) as pool:
        return pool.map(fn, items, chunksize=chunk)


def _standard_model(lam: float = 1.0, mu: float = 1.0):
    parts = []
    if lam > 0:
        parts.append(contact(lam, UniformBallKernel(0.5, 1)))
    if mu > 0:
        parts.append(constant_death(mu))
    return combine(*parts)


def _spaced_points(n: int) -> Configuration:
    return Configuration.from_points([[float(i)] for i in range(n)], 1)


def _scaled(n: int, scale: float) -> int:
    # keep enough samples for the KS-based checks to stay well defined
    return max(100, int(round(n * scale)))


# 1 & 2: first-jump law and the birth/death split

def first_jump_checks(seed: int, n_traj: int = 10_000) -> list[CheckResult]:
    model = _standard_model(1.0, 1.0)
    eta0 = _spaced_points(10)
    registry = ParticleRegistry.for_initial(eta0)
    rate = model.cumulative_birth_rate(eta0) + model.cumulative_death_rate(eta0)
    times = []
    births = 0
    for j in range(n_traj):
        ev = next_event(model, eta0, registry, 0.0, NoiseSource(StreamKey(seed, j)))
        times.append(ev.time)
        if ev.kind == "birth":
            births += 1
    ks = ks_exponential(times, rate)
    p_birth = model.cumulative_birth_rate(eta0) / rate
    freq = births / n_traj
    sd = math.sqrt(p_birth * (1.0 - p_birth) / n_traj)
    return [
        CheckResult(
            "first_jump_exponential_ks",
            ks.statistic,
            ks.thresholds["0.001"],
            ks.passed("0.001"),
            f"KS vs Exp({rate:g}) on {n_traj} first jumps",
        ),
        CheckResult(
            "birth_death_split",
            abs(freq - p_birth),
            3.0 * sd,
            abs(freq - p_birth) <= 3.0 * sd,
            f"birth-first frequency {freq:.4f} vs {p_birth:.4f}",
        ),
    ]


# 3: Yule mean

def yule_mean_check(seed: int, n_traj: int = 10_000) -> list[CheckResult]:
    model = _standard_model(1.0, 0.0)  # pure birth at rate |eta|
    eta0 = _spaced_points(5)
    target = yule_mean(5, 1.0, 1.0)
    rep = semigroup_estimate(model, size(), eta0, 1.0, n_traj, StreamKey(seed))
    gap = abs(rep.estimate - target)
    return [
        CheckResult(
            "yule_mean",
            gap,
            3.0 * rep.standard_error,
            gap <= 3.0 * rep.standard_error,
            f"mean {rep.estimate:.4f} vs 5e = {target:.4f}, se {rep.standard_error:.4f}",
        )
    ]


# 4: moment bound and the mean ODE

def moment_bound_checks(seed: int, n_traj: int = 10_000) -> list[CheckResult]:
    model = _standard_model(1.0, 1.0)
    eta0 = _spaced_points(10)
    grid = (0.5, 1.0, 2.0)
    rows = mean_size_curve(model, eta0, grid, n_traj, StreamKey(seed))
    out = []
    for row in rows:
        t = row.test_statistics["t"]
        bound = row.test_statistics["bound"]
        out.append(
            CheckResult(
                f"moment_bound_t{t:g}",
                row.estimate - 3.0 * row.standard_error,
                bound,
                row.test_statistics["within_bound"] == 1.0,
                f"mean {row.estimate:.4f} (se {row.standard_error:.4f}) vs bound {bound:.4f}",
            )
        )
        ode = 10.0 * math.exp((1.0 - 1.0) * t)  # lam = mu: constant mean
        gap = abs(row.estimate - ode)
        out.append(
            CheckResult(
                f"mean_ode_t{t:g}",
                gap,
                3.0 * row.standard_error,
                gap <= 3.0 * row.standard_error,
                f"mean {row.estimate:.4f} vs ODE {ode:.4f}",
            )
        )
    return out


# 5: linear death exactness

def linear_death_checks(seed: int, n_traj: int = 10_000) -> list[CheckResult]:
    model = _standard_model(0.0, 1.0)
    n0 = 20
    eta0 = _spaced_points(n0)
    sizes = []
    extinction = []
    structural_ok = True
    for j in range(n_traj):
        traj = simulate(model, eta0, 100.0, StreamKey(seed, j))
        sizes.append(population_at(traj, 1.0))
        if traj.status.kind != "absorbed" or len(traj.events) != n0:
            structural_ok = False
        extinction.append(traj.status.time)
    mean_size = math.fsum(sizes) / n_traj
    se_size = _se(sizes)
    target_size = n0 * math.exp(-1.0)
    mean_ext = math.fsum(extinction) / n_traj
    se_ext = _se(extinction)
    target_ext = sum(1.0 / k for k in range(1, n0 + 1))
    return [
        CheckResult(
            "linear_death_mean",
            abs(mean_size - target_size),
            3.0 * se_size,
            abs(mean_size - target_size) <= 3.0 * se_size,
            f"E|eta_1| = {mean_size:.4f} vs {target_size:.4f}",
        ),
        CheckResult(
            "extinction_time_mean",
            abs(mean_ext - target_ext),
            3.0 * se_ext,
            abs(mean_ext - target_ext) <= 3.0 * se_ext,
            f"mean extinction {mean_ext:.4f} vs H_{n0} = {target_ext:.4f}",
        ),
        CheckResult(
            "death_event_structure",
            0.0 if structural_ok else 1.0,
            0.5,
            structural_ok,
            f"every run: {n0} deaths then absorption",
        ),
    ]


def _se(values: Sequence[float]) -> float:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return math.sqrt(var / n)


# 6: coupling inclusion and marginal laws

def coupling_checks(seed: int, n_runs: int = 1_000) -> list[CheckResult]:
    m1 = _standard_model(1.0, 1.0)
    m2 = _standard_model(2.0, 1.0)
    eta0 = _spaced_points(5)
    inclusion_ok = True
    lower_sizes = []
    upper_sizes = []
    for j in range(n_runs):
        pair = simulate_coupled(m1, m2, eta0, eta0, 1.0, StreamKey(seed, j))
        if not all(flag for _, flag in inclusion_flags(pair)):
            inclusion_ok = False
        lower_sizes.append(population_at(pair.lower, 1.0))
        upper_sizes.append(population_at(pair.upper, 1.0))
    alone_lower = [
        population_at(simulate(m1, eta0, 1.0, StreamKey(seed + 1, j)), 1.0)
        for j in range(n_runs)
    ]
    alone_upper = [
        population_at(simulate(m2, eta0, 1.0, StreamKey(seed + 2, j)), 1.0)
        for j in range(n_runs)
    ]
    ks_low = two_sample_ks(lower_sizes, alone_lower)
    ks_up = two_sample_ks(upper_sizes, alone_upper)
    return [
        CheckResult(
            "coupling_inclusion",
            0.0 if inclusion_ok else 1.0,
            0.5,
            inclusion_ok,
            f"lower state within upper at every event over {n_runs} runs",
        ),
        CheckResult(
            "coupling_lower_marginal_ks",
            ks_low.statistic,
            ks_low.thresholds["0.001"],
            ks_low.passed("0.001"),
            "coupled lower |eta_1| vs standalone",
        ),
        CheckResult(
            "coupling_upper_marginal_ks",
            ks_up.statistic,
            ks_up.thresholds["0.001"],
            ks_up.passed("0.001"),
            "coupled upper |eta_1| vs standalone",
        ),
    ]


# 7: martingale residuals

def _martingale_worker(args: tuple) -> Optional[float]:
    seed, j, f_name, t = args
    model = _standard_model(1.0, 1.0)
    eta0 = _spaced_points(10)
    f = {"capped_size_50": capped_size(50), "soft_count": soft_count()}[f_name]
    rep = martingale_residual(model, f, eta0, t, 1, StreamKey(seed, j))
    if rep.n_samples == 0:
        return None
    return rep.estimate


def martingale_checks(
    seed: int, n_traj: int = 10_000, jobs: int | None = None
) -> list[CheckResult]:
    jobs = default_jobs() if jobs is None else jobs
    out = []
    for f_name in ("capped_size_50", "soft_count"):
        residuals = _pool_map(
            _martingale_worker,
            [(seed, j, f_name, 1.0) for j in range(n_traj)],
            jobs,
        )
        vals = [r for r in residuals if r is not None]
        mean = math.fsum(vals) / len(vals)
        se = _se(vals)
        out.append(
            CheckResult(
                f"martingale_residual_{f_name}",
                abs(mean),
                3.0 * se,
                abs(mean) <= 3.0 * se,
                f"mean residual {mean:.5f}, se {se:.5f}, n {len(vals)}",
            )
        )
    return out


# 8: generator limit

_GRID = (0.5, 0.1, 0.05, 0.01)


def _grid_size_worker(args: tuple) -> Optional[list[int]]:
    seed, j = args
    model = _standard_model(1.5, 1.0)
    eta0 = _spaced_points(10)
    traj = simulate(model, eta0, _GRID[0], StreamKey(seed, j))
    if traj.status.kind == "cap_hit":
        return None
    return [population_at(traj, t) for t in _GRID]


def generator_limit_checks(
    seed: int, n_traj: int = 100_000, jobs: int | None = None
) -> list[CheckResult]:
    jobs = default_jobs() if jobs is None else jobs
    model = _standard_model(1.5, 1.0)
    eta0 = _spaced_points(10)
    lf = generator_apply(model, size(), eta0)
    rows = _pool_map(_grid_size_worker, [(seed, j) for j in range(n_traj)], jobs)
    rows = [r for r in rows if r is not None]
    f0 = float(len(eta0))
    gaps = []
    ses = []
    for k, t in enumerate(_GRID):
        vals = [r[k] for r in rows]
        mean = math.fsum(vals) / len(vals)
        se = _se(vals) / t
        quotient = (mean - f0) / t
        gaps.append(abs(quotient - lf))
        ses.append(se)
    out = [
        CheckResult(
            "generator_limit_gap",
            gaps[-1],
            max(3.0 * ses[-1], 0.05 * abs(lf) + 0.01),
            gaps[-1] <= max(3.0 * ses[-1], 0.05 * abs(lf) + 0.01),
            f"t={_GRID[-1]:g}: quotient gap {gaps[-1]:.4f} vs Lf = {lf:g}",
        )
    ]
    trend_ok = all(
        gaps[k + 1] <= gaps[k] + 2.0 * math.hypot(ses[k], ses[k + 1])
        for k in range(len(_GRID) - 1)
    )
    out.append(
        CheckResult(
            "generator_gap_trend",
            0.0 if trend_ok else 1.0,
            0.5,
            trend_ok,
            "gaps down the grid: " + ", ".join(f"{g:.4f}" for g in gaps),
        )
    )
    return out


# 9: explosion detection

def _explosion_worker(args: tuple) -> tuple[str, float]:
    seed, j = args
    model = superlinear_birth(1.0, 2.0, Box.cube(0.0, 1.0, 1))
    eta0 = Configuration.from_points([[0.25], [0.75]], 1)
    traj = simulate(
        model, eta0, 10.0, StreamKey(seed, j), Caps(max_population=10_000)
    )
    return traj.status.kind, traj.status.time if traj.status.time is not None else math.inf


def explosion_checks(
    seed: int, n_runs: int = 1_000, jobs: int | None = None
) -> list[CheckResult]:
    jobs = default_jobs() if jobs is None else jobs
    results = _pool_map(_explosion_worker, [(seed, j) for j in range(n_runs)], jobs)
    capped = [tau for kind, tau in results if kind == "cap_hit"]
    frac = len(capped) / n_runs
    median_tau = float(np.median(capped)) if capped else math.inf
    return [
        CheckResult(
            "explosion_cap_hit_fraction",
            frac,
            0.99,
            frac >= 0.99,
            f"{len(capped)}/{n_runs} runs hit the population cap",
        ),
        CheckResult(
            "explosion_median_tau",
            median_tau,
            10.0,
            median_tau < 10.0,
            f"median cap time {median_tau:.4f}",
        ),
    ]


# 10: metric correctness

def metric_checks(
    seed: int, n_instances: int = 1_000, n_triples: int = 10_000
) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    exact = True
    for _ in range(n_instances):
        n = int(rng.integers(1, 8))
        d = int(rng.integers(1, 4))
        a = Configuration.from_points(rng.uniform(-5, 5, size=(n, d)), d)
        b = Configuration.from_points(rng.uniform(-5, 5, size=(n, d)), d)
        if euclidean_matching_distance(a, b) != brute_force_matching_distance(a, b):
            exact = False
            break
    triangle_ok = True
    worst = -math.inf
    for _ in range(n_triples):
        n = int(rng.integers(1, 9))
        d = int(rng.integers(1, 3))
        pts = [Configuration.from_points(rng.uniform(-3, 3, size=(n, d)), d) for _ in range(3)]
        ab = dist(pts[0], pts[1])
        bc = dist(pts[1], pts[2])
        ac = dist(pts[0], pts[2])
        excess = ac - (ab + bc)
        worst = max(worst, excess)
        if excess > 1e-12:
            triangle_ok = False
            break
    return [
        CheckResult(
            "matching_vs_bruteforce",
            0.0 if exact else 1.0,
            0.5,
            exact,
            f"assignment equals exhaustive minimum on {n_instances} instances",
        ),
        CheckResult(
            "metric_triangle_inequality",
            worst,
            1e-12,
            triangle_ok,
            f"worst triangle excess {worst:.3e} over {n_triples} triples",
        ),
    ]


# 11: continuity in the initial condition

def _continuity_worker(args: tuple) -> float:
    seed, j, displacement = args
    model = _standard_model(1.0, 1.0)
    alpha = _spaced_points(5)
    pert = Configuration.from_points(
        [[float(i) + displacement] for i in range(5)], 1
    )
    return sup_distance_shared_noise(model, alpha, pert, 1.0, StreamKey(seed, j))


def continuity_checks(
    seed: int, n_pairs: int = 1_000, jobs: int | None = None
) -> list[CheckResult]:
    jobs = default_jobs() if jobs is None else jobs
    displacements = (1e-2, 1e-3, 1e-4)
    freqs = []
    for k, disp in enumerate(displacements):
        sups = _pool_map(
            _continuity_worker,
            [(seed + k, j, disp) for j in range(n_pairs)],
            jobs,
        )
        freqs.append(sum(1 for s in sups if s > 0.1) / n_pairs)
    sds = [math.sqrt(max(f * (1 - f), 1e-9) / n_pairs) for f in freqs]
    trend_ok = all(
        freqs[k + 1] <= freqs[k] + 2.0 * math.hypot(sds[k], sds[k + 1])
        for k in range(len(freqs) - 1)
    )
    return [
        CheckResult(
            "continuity_exceedance_small",
            freqs[-1],
            0.05,
            freqs[-1] < 0.05,
            f"P(sup dist > 0.1) at displacement 1e-4: {freqs[-1]:.4f}",
        ),
        CheckResult(
            "continuity_trend",
            0.0 if trend_ok else 1.0,
            0.5,
            trend_ok,
            "exceedance by displacement 1e-2..1e-4: "
            + ", ".join(f"{f:.4f}" for f in freqs),
        ),
    ]


# 12: determinism

def reproducibility_checks(seed: int) -> list[CheckResult]:
    model = _standard_model(1.0, 1.0)
    eta0 = _spaced_points(10)
    a = simulate(model, eta0, 1.0, StreamKey(seed, 0))
    b = simulate(model, eta0, 1.0, StreamKey(seed, 0))
    same = [(e.time, e.kind, e.particle_index, e.position) for e in a.events] == [
        (e.time, e.kind, e.particle_index, e.position) for e in b.events
    ]
    pair_a = simulate_coupled(model, _standard_model(2.0, 1.0), eta0, eta0, 1.0, StreamKey(seed, 1))
    pair_b = simulate_coupled(model, _standard_model(2.0, 1.0), eta0, eta0, 1.0, StreamKey(seed, 1))
    same_pair = [
        (e.time, e.kind, e.particle_index) for e in pair_a.upper.events
    ] == [(e.time, e.kind, e.particle_index) for e in pair_b.upper.events]
    ok = same and same_pair
    return [
        CheckResult(
            "bit_reproducibility",
            0.0 if ok else 1.0,
            0.5,
            ok,
            "repeated runs with equal keys are event-for-event identical",
        )
    ]


SUITES: dict[str, Callable[..., list[CheckResult]]] = {
    "exponential-clocks": first_jump_checks,
    "yule": yule_mean_check,
    "moment-bounds": moment_bound_checks,
    "linear-death": linear_death_checks,
    "coupling": coupling_checks,
    "martingale": martingale_checks,
    "generator-limit": generator_limit_checks,
    "explosion": explosion_checks,
    "metric": metric_checks,
    "continuity": continuity_checks,
    "reproducibility": reproducibility_checks,
}

_SCALABLE = {
    "exponential-clocks": ("n_traj",),
    "yule": ("n_traj",),
    "moment-bounds": ("n_traj",),
    "linear-death": ("n_traj",),
    "coupling": ("n_runs",),
    "martingale": ("n_traj",),
    "generator-limit": ("n_traj",),
    "explosion": ("n_runs",),
    "metric": ("n_instances", "n_triples"),
    "continuity": ("n_pairs",),
}


def run_suite(name: str, seed: int, scale: float = 1.0, jobs: int | None = None) -> list[CheckResult]:
    fn = SUITES[name]
    kwargs: dict = {}
    if scale != 1.0:
        import inspect

        for param in _SCALABLE.get(name, ()):
            default = inspect.signature(fn).parameters[param].default
            kwargs[param] = _scaled(default, scale)
    if jobs is not None and "jobs" in fn.__code__.co_varnames:
        kwargs["jobs"] = jobs
    return fn(seed, **kwargs)
