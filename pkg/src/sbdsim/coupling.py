"""Monotone coupling of two processes and shared-noise experiments.

``simulate_coupled`` runs one joint jump chain whose two coordinates are
marginally the model-1 and model-2 processes while the lower state stays a
subset of the upper state pathwise.  Birth candidates are generated at the
upper rate and thinned into the lower copy; death candidates for shared
particles are generated at the (higher) lower rate and thinned into the
upper copy; particles alive only in the upper copy carry plain model-2
death clocks.

``continuity_experiment`` reruns one model from nearby initial conditions
on identical stream keys, so matched particles consume matched draws, and
measures how often the paths drift apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .configuration import Configuration
from .metric import dist
from .rates import RateModel
from .rng import (
    CHANNEL_ACCEPTANCE,
    CHANNEL_BIRTH_RACE,
    CHANNEL_DEATH_RACE,
    CHANNEL_LOCATION,
    NoiseSource,
    StreamKey,
)
from .simulate import (
    BIRTH,
    DEATH,
    Caps,
    Event,
    Trajectory,
    TrajectoryStatus,
    _LiveState,
)


class PremiseViolation(ValueError):
    """The monotonicity premise failed at a state reached by the coupling."""


@dataclass(frozen=True)
class CoupledPair:
    lower: Trajectory
    upper: Trajectory
    shared_key: StreamKey


@dataclass(frozen=True)
class PremiseWitness:
    kind: str  # "birth" | "death"
    point: tuple[float, ...]
    lower_config: Configuration
    upper_config: Configuration
    rate_1: float
    rate_2: float


@dataclass(frozen=True)
class PremiseReport:
    passed: bool
    trials: int
    witness: Optional[PremiseWitness] = None


def check_monotone_premise(
    m1: RateModel,
    m2: RateModel,
    trials: int,
    max_n: int,
    rng: np.random.Generator,
) -> PremiseReport:
    """Probe b1(x, eta1) <= b2(x, eta2) and d1(x, eta1) >= d2(x, eta2)
    on random nested pairs eta1 subset of eta2."""
    from .rates import _probe_span

    span = max(_probe_span(m1), _probe_span(m2))
    dim = _common_dimension(m1, m2)
    for _ in range(trials):
        n2 = int(rng.integers(1, max_n + 1))
        pts2 = rng.uniform(-span, span, size=(n2, dim))
        eta2 = Configuration.from_points(pts2, dim)
        n1 = int(rng.integers(0, n2 + 1))
        subset = rng.choice(n2, size=n1, replace=False)
        eta1 = Configuration.from_points(pts2[subset], dim) if n1 else Configuration.empty(dim)

        probes = [rng.uniform(-span, span, size=dim) for _ in range(3)]
        probes += [pts2[int(rng.integers(0, n2))] + rng.normal(scale=0.05, size=dim)]
        for x in probes:
            b1 = m1.birth_rate(x, eta1)
            b2 = m2.birth_rate(x, eta2)
            if b1 > b2 * (1.0 + 1e-12) + 1e-12:
                return PremiseReport(
                    False, trials, PremiseWitness("birth", tuple(x.tolist()), eta1, eta2, b1, b2)
                )
        for i in range(len(eta1)):
            x = eta1.positions[i]
            d1 = m1.death_rate(x, eta1)
            d2 = m2.death_rate(x, eta2)
            if d1 < d2 * (1.0 - 1e-12) - 1e-12:
                return PremiseReport(
                    False, trials, PremiseWitness("death", tuple(x.tolist()), eta1, eta2, d1, d2)
                )
    return PremiseReport(True, trials)


def _common_dimension(m1: RateModel, m2: RateModel) -> int:
    from .rates import _model_dimension

    return max(_model_dimension(m1), _model_dimension(m2))


def simulate_coupled(
    m1: RateModel,
    m2: RateModel,
    initial_lower: Configuration,
    initial_upper: Configuration,
    horizon: float,
    key: StreamKey,
    caps: Caps = Caps(),
) -> CoupledPair:
    """Joint simulation with pathwise inclusion of the lower process.

    Requires the initial inclusion and trusts (or detects at runtime) the
    rate monotonicity premise.  A particle born into both copies shares one
    index; bit-reproducible in the shared key.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    _require_subset(initial_lower, initial_upper)
    if caps.max_population <= len(initial_upper):
        raise ValueError("max_population cap must exceed the initial upper population")

    # shared identity: initial lower particles take the upper labels of
    # the same positions, so inclusion can be checked index for index
    by_position = {p: i for i, p in zip(initial_upper.indices, initial_upper.position_tuples())}
    lower_indices = tuple(by_position[p] for p in initial_lower.position_tuples())
    initial_lower = Configuration(
        initial_lower.positions, lower_indices, initial_lower.dimension
    )

    noise = NoiseSource(key)
    birth_stream = noise.stream(CHANNEL_BIRTH_RACE)
    loc = noise.stream(CHANNEL_LOCATION)
    acc = noise.stream(CHANNEL_ACCEPTANCE)

    upper = _LiveState(initial_upper)
    lower = _LiveState(initial_lower)
    lower_members = set(initial_lower.indices)
    next_index = max((i for i in initial_upper.indices if i > 0), default=0) + 1

    lower_events: list[Event] = []
    upper_events: list[Event] = []
    clock = 0.0
    n_steps = 0
    status: TrajectoryStatus

    while True:
        total_birth = m2.cumulative_birth_rate(upper)
        theta_birth = math.inf
        if total_birth > 0.0:
            theta_birth = birth_stream.exponential(total_birth)

        theta_death = math.inf
        victim_slot = -1
        victim_rate = 0.0
        for slot, index in enumerate(upper.idx):
            x = np.asarray(upper.pos[slot])
            if index in lower_members:
                r = sum(c.rate(x, lower) for c in m1.deaths)
            else:
                r = sum(c.rate(x, upper) for c in m2.deaths)
            if r > 0.0:
                t = noise.stream(CHANNEL_DEATH_RACE, index).exponential(r)
                if t < theta_death:
                    theta_death = t
                    victim_slot = slot
                    victim_rate = r

        if math.isinf(theta_birth) and math.isinf(theta_death):
            status = TrajectoryStatus.absorbed(clock)
            break

        t_next = clock + min(theta_birth, theta_death)
        if t_next > horizon:
            status = TrajectoryStatus.completed()
            break
        clock = t_next

        if theta_birth <= theta_death:
            x = m2.sample_birth_location(upper, loc, acc)
            pt = tuple(x.tolist())
            while pt in upper.pos_set:
                x = m2.sample_birth_location(upper, loc, acc)
                pt = tuple(x.tolist())
            b2 = m2.birth_rate(x, upper)
            b1 = m1.birth_rate(x, lower)
            if b1 > b2 * (1.0 + 1e-9):
                raise PremiseViolation(
                    f"b1(x, lower) = {b1:g} exceeds b2(x, upper) = {b2:g} at t = {clock:g}, "
                    f"x = {pt}, |lower| = {len(lower)}, |upper| = {len(upper)}"
                )
            index = next_index
            next_index += 1
            upper.add(index, pt)
            upper_events.append(Event(clock, BIRTH, index, pt))
            if b2 > 0.0 and acc.uniform() < b1 / b2:
                lower.add(index, pt)
                lower_members.add(index)
                lower_events.append(Event(clock, BIRTH, index, pt))
            if len(upper) > caps.max_population:
                status = TrajectoryStatus.cap_hit(caps.max_population, clock, "population")
                break
        else:
            index = upper.idx[victim_slot]
            pt = tuple(upper.pos[victim_slot])
            if index in lower_members:
                d2 = sum(c.rate(np.asarray(pt), upper) for c in m2.deaths)
                if d2 > victim_rate * (1.0 + 1e-9):
                    raise PremiseViolation(
                        f"d2(x, upper) = {d2:g} exceeds d1(x, lower) = {victim_rate:g} "
                        f"at t = {clock:g}, x = {pt}"
                    )
                lower.remove_at(lower.idx.index(index))
                lower_members.discard(index)
                lower_events.append(Event(clock, DEATH, index, pt))
                if victim_rate > 0.0 and acc.uniform() < d2 / victim_rate:
                    upper.remove_at(victim_slot)
                    upper_events.append(Event(clock, DEATH, index, pt))
            else:
                upper.remove_at(victim_slot)
                upper_events.append(Event(clock, DEATH, index, pt))

        n_steps += 1
        if n_steps >= caps.max_events:
            status = TrajectoryStatus.cap_hit(caps.max_events, clock, "events")
            break

    return CoupledPair(
        lower=Trajectory(initial_lower, tuple(lower_events), horizon, status, key),
        upper=Trajectory(initial_upper, tuple(upper_events), horizon, status, key),
        shared_key=key,
    )


def _require_subset(lower: Configuration, upper: Configuration) -> None:
    if lower.dimension != upper.dimension:
        raise ValueError("configurations must share a dimension")
    upper_pos = set(upper.position_tuples())
    for p in lower.position_tuples():
        if p not in upper_pos:
            raise ValueError("initial lower configuration is not a subset of the upper one")


def inclusion_flags(pair: CoupledPair) -> list[tuple[float, bool]]:
    """Replay both logs along the merged timeline; True when the lower
    state is a subset (positions and indices) of the upper state."""
    lower = _LiveState(pair.lower.initial)
    upper = _LiveState(pair.upper.initial)
    merged: dict[float, list[tuple[int, Event]]] = {}
    for side, events in ((0, pair.lower.events), (1, pair.upper.events)):
        for e in events:
            merged.setdefault(e.time, []).append((side, e))
    flags = []
    for t in sorted(merged):
        for side, e in merged[t]:
            state = lower if side == 0 else upper
            if e.kind == BIRTH:
                state.add(e.particle_index, e.position)
            else:
                state.remove_at(state.idx.index(e.particle_index))
        lower_set = set(zip(lower.idx, lower.pos))
        upper_set = set(zip(upper.idx, upper.pos))
        flags.append((t, lower_set <= upper_set))
    return flags


@dataclass(frozen=True)
class ContinuityReport:
    perturbation: Configuration
    displacement: float
    n_runs: int
    eps_grid: tuple[float, ...]
    exceedance: tuple[float, ...]  # empirical P{sup dist > eps} per eps


def sup_distance_shared_noise(
    model: RateModel,
    alpha: Configuration,
    beta: Configuration,
    horizon: float,
    key: StreamKey,
    caps: Caps = Caps(),
) -> float:
    """sup over [0, horizon] of dist between two runs driven by one key."""
    from .simulate import simulate

    ta = simulate(model, alpha, horizon, key, caps)
    tb = simulate(model, beta, horizon, key, caps)
    sup = dist(ta.initial, tb.initial)
    sa = _LiveState(ta.initial)
    sb = _LiveState(tb.initial)
    ia = ib = 0
    ea, eb = ta.events, tb.events
    while ia < len(ea) or ib < len(eb):
        na = ea[ia].time if ia < len(ea) else math.inf
        nb = eb[ib].time if ib < len(eb) else math.inf
        t = min(na, nb)
        # equal times arise exactly when the draws matched; apply jointly
        while ia < len(ea) and ea[ia].time == t:
            _apply(sa, ea[ia])
            ia += 1
        while ib < len(eb) and eb[ib].time == t:
            _apply(sb, eb[ib])
            ib += 1
        sup = max(sup, dist(sa.to_configuration(), sb.to_configuration()))
        if sup >= 1.0:
            return sup
    return sup


def _apply(state: _LiveState, e: Event) -> None:
    if e.kind == BIRTH:
        state.add(e.particle_index, e.position)
    else:
        state.remove_at(state.idx.index(e.particle_index))


def continuity_experiment(
    model: RateModel,
    alpha: Configuration,
    perturbations: Sequence[Configuration],
    horizon: float,
    n_runs: int,
    key: StreamKey,
    eps_grid: Sequence[float] = (0.1,),
    caps: Caps = Caps(),
) -> list[ContinuityReport]:
    """Shared-noise sensitivity of the path law to the initial condition.

    Each perturbed configuration must match alpha's cardinality; pairing of
    initial particles follows the position-sorted labelling both runs use.
    """
    reports = []
    for pert in perturbations:
        if len(pert) != len(alpha):
            raise ValueError("perturbation must have the same cardinality as alpha")
        if pert.dimension != alpha.dimension:
            raise ValueError("perturbation must share alpha's dimension")
        displacement = dist(alpha, pert)
        exceed = [0] * len(eps_grid)
        for j in range(n_runs):
            sup = sup_distance_shared_noise(
                model, alpha, pert, horizon, key.for_trajectory(key.trajectory + j), caps
            )
            for k, eps in enumerate(eps_grid):
                if sup > eps:
                    exceed[k] += 1
        reports.append(
            ContinuityReport(
                perturbation=pert,
                displacement=displacement,
                n_runs=n_runs,
                eps_grid=tuple(eps_grid),
                exceedance=tuple(c / n_runs for c in exceed),
            )
        )
    return reports
