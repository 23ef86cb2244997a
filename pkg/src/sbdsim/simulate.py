"""Exact event-driven simulation of the spatial birth-and-death process.

The process is simulated through its embedded jump chain.  At each state
the birth side holds an exponential clock with the cumulative birth rate
and every particle holds a private exponential death clock with its own
hazard; the earliest clock fires.  The winning-clock construction gives
exactly the right law: the inter-event time is exponential with the total
jump rate, a birth wins with probability B/(B+D), and the dying particle
is chosen proportionally to its hazard.  Clocks are redrawn from keyed
streams at every step, so two runs that share a key and agree in the
sequence of decisions consume identical randomness draw for draw.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .configuration import Configuration, ParticleRegistry
from .rates import GrowthCertificate, RateModel
from .rng import (
    CHANNEL_ACCEPTANCE,
    CHANNEL_BIRTH_RACE,
    CHANNEL_DEATH_RACE,
    CHANNEL_LOCATION,
    NoiseSource,
    StreamKey,
)

BIRTH = "birth"
DEATH = "death"


@dataclass(slots=True)
class Event:
    """One jump of the process.  Treated as immutable once recorded."""

    time: float
    kind: str
    particle_index: int
    position: tuple[float, ...]


@dataclass(frozen=True)
class Caps:
    """Hard limits that turn a would-be explosion into a reported CapHit."""

    max_population: int = 100_000
    max_events: int = 10_000_000

    def __post_init__(self) -> None:
        if self.max_population <= 0 or self.max_events <= 0:
            raise ValueError("caps must be positive")


@dataclass(frozen=True)
class TrajectoryStatus:
    kind: str  # "completed" | "absorbed" | "cap_hit"
    time: Optional[float] = None
    cap: Optional[int] = None
    capped_by: Optional[str] = None  # "population" | "events"

    @classmethod
    def completed(cls) -> "TrajectoryStatus":
        return cls("completed")

    @classmethod
    def absorbed(cls, time: float) -> "TrajectoryStatus":
        return cls("absorbed", time=time)

    @classmethod
    def cap_hit(cls, cap: int, time: float, capped_by: str) -> "TrajectoryStatus":
        return cls("cap_hit", time=time, cap=cap, capped_by=capped_by)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered event log together with its initial state and status."""

    initial: Configuration
    events: tuple[Event, ...]
    horizon: float
    status: TrajectoryStatus
    seed_key: StreamKey
    _times: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_times", tuple(e.time for e in self.events))

    def final_population(self) -> int:
        n = len(self.initial)
        for e in self.events:
            n += 1 if e.kind == BIRTH else -1
        return n


class _LiveState:
    """Mutable working state of the chain; duck-types the pieces of
    Configuration that rate components read."""

    __slots__ = ("dimension", "idx", "pos", "pos_set", "_arr")

    def __init__(self, config: Configuration):
        self.dimension = config.dimension
        self.idx: list[int] = list(config.indices)
        self.pos: list[tuple[float, ...]] = config.position_tuples()
        self.pos_set = set(self.pos)
        self._arr: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.idx)

    @property
    def positions(self) -> np.ndarray:
        if self._arr is None:
            self._arr = np.asarray(self.pos, dtype=float).reshape(len(self.pos), self.dimension)
        return self._arr

    def __iter__(self):
        for i, index in enumerate(self.idx):
            yield index, self.positions[i]

    def contains_position(self, x) -> bool:
        return tuple(np.asarray(x, dtype=float).tolist()) in self.pos_set

    def add(self, index: int, point: tuple[float, ...]) -> None:
        self.idx.append(index)
        self.pos.append(point)
        self.pos_set.add(point)
        self._arr = None

    def remove_at(self, i: int) -> None:
        self.idx.pop(i)
        p = self.pos.pop(i)
        self.pos_set.discard(p)
        self._arr = None

    def to_configuration(self) -> Configuration:
        return Configuration(self.positions.copy(), tuple(self.idx), self.dimension)


class _DeathEval:
    """Per-run split of the death components into a position-free constant
    part and the components that actually look at positions."""

    __slots__ = ("base", "positional")

    def __init__(self, model: RateModel):
        from .rates import ConstantDeath

        base = 0.0
        positional = []
        for c in model.deaths:
            if isinstance(c, ConstantDeath):
                base += c.mu
            else:
                positional.append(c)
        self.base = base
        self.positional = positional

    def rate(self, state: "_LiveState", slot: int) -> float:
        r = self.base
        if self.positional:
            x = np.asarray(state.pos[slot])
            for c in self.positional:
                r += c.rate(x, state)
        return r


class _RunCtx:
    """Prefetched per-trajectory streams and model split."""

    __slots__ = ("noise", "birth_stream", "loc", "acc", "death_eval", "single_birth", "death_streams")

    def __init__(self, model: RateModel, noise: NoiseSource):
        self.noise = noise
        self.birth_stream = noise.stream(CHANNEL_BIRTH_RACE)
        self.loc = noise.stream(CHANNEL_LOCATION)
        self.acc = noise.stream(CHANNEL_ACCEPTANCE)
        self.death_eval = _DeathEval(model)
        self.single_birth = model.births[0] if len(model.births) == 1 else None
        self.death_streams: dict[int, object] = {}

    def death_stream(self, index: int):
        s = self.death_streams.get(index)
        if s is None:
            s = self.noise.stream(CHANNEL_DEATH_RACE, index)
            self.death_streams[index] = s
        return s


def _next_jump(
    model: RateModel,
    state: _LiveState,
    ctx: _RunCtx,
) -> tuple[float, str, int, Optional[tuple[float, ...]]] | None:
    """One step of the clock race.

    Returns (waiting time, kind, victim slot, birth position) or None when
    all rates vanish (absorption).  Consumption order is fixed: birth clock
    first, then each particle's death clock in storage order, then location
    draws if the birth wins.
    """
    total_birth = 0.0
    for c in model.births:
        total_birth += c.total_rate(state)
    theta_birth = math.inf
    if total_birth > 0.0:
        theta_birth = ctx.birth_stream.exponential(total_birth)

    theta_death = math.inf
    victim_slot = -1
    if model.deaths and len(state) > 0:
        death_eval = ctx.death_eval
        death_stream = ctx.death_stream
        for i, index in enumerate(state.idx):
            r = death_eval.rate(state, i)
            if r > 0.0:
                t = death_stream(index).exponential(r)
                if t < theta_death:
                    theta_death = t
                    victim_slot = i

    if math.isinf(theta_birth) and math.isinf(theta_death):
        return None

    if theta_birth <= theta_death:
        if ctx.single_birth is not None:
            sample = lambda: ctx.single_birth.sample_location(state, ctx.loc, ctx.acc)
        else:
            sample = lambda: model.sample_birth_location(state, ctx.loc, ctx.acc)
        x = sample()
        pt = tuple(x.tolist())
        while pt in state.pos_set:
            # zero-probability float collision: resample
            x = sample()
            pt = tuple(x.tolist())
        return theta_birth, BIRTH, -1, pt
    return theta_death, DEATH, victim_slot, None


def next_event(
    model: RateModel,
    eta: Configuration,
    registry: ParticleRegistry,
    clock: float,
    noise: NoiseSource,
) -> Optional[Event]:
    """Draw the next jump from state eta at the given clock time.

    Returns None when both cumulative rates vanish (the process is
    absorbed and stays in eta forever).
    """
    state = _LiveState(eta)
    step = _next_jump(model, state, _RunCtx(model, noise))
    if step is None:
        return None
    wait, kind, slot, pt = step
    if kind == BIRTH:
        return Event(clock + wait, BIRTH, registry.next_birth_index, pt)
    return Event(clock + wait, DEATH, state.idx[slot], tuple(state.pos[slot]))


def simulate(
    model: RateModel,
    initial: Configuration,
    horizon: float,
    key: StreamKey,
    caps: Caps = Caps(),
) -> Trajectory:
    """Simulate the process on [0, horizon].

    Deterministic in (model, initial, horizon, caps, key).  The trajectory
    ends Completed at the horizon, Absorbed when all rates vanish, or
    CapHit when the population cap or the event budget is exceeded.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if caps.max_population <= len(initial):
        raise ValueError("max_population cap must exceed the initial population")

    noise = NoiseSource(key)
    state = _LiveState(initial)
    registry = ParticleRegistry.for_initial(initial)
    next_index = registry.next_birth_index
    ctx = _RunCtx(model, noise)
    events: list[Event] = []
    clock = 0.0
    status: TrajectoryStatus

    while True:
        step = _next_jump(model, state, ctx)
        if step is None:
            status = TrajectoryStatus.absorbed(clock)
            break
        wait, kind, slot, pt = step
        t_next = clock + wait
        if t_next > horizon:
            status = TrajectoryStatus.completed()
            break
        clock = t_next
        if kind == BIRTH:
            index = next_index
            next_index += 1
            state.add(index, pt)
            events.append(Event(clock, BIRTH, index, pt))
            if len(state) > caps.max_population:
                status = TrajectoryStatus.cap_hit(caps.max_population, clock, "population")
                break
        else:
            index = state.idx[slot]
            position = state.pos[slot]
            state.remove_at(slot)
            events.append(Event(clock, DEATH, index, position))
        if len(events) >= caps.max_events:
            status = TrajectoryStatus.cap_hit(caps.max_events, clock, "events")
            break

    return Trajectory(initial, tuple(events), horizon, status, key)


def state_at(traj: Trajectory, t: float) -> Configuration:
    """Right-continuous state of the trajectory at time t."""
    if t < 0 or t > traj.horizon:
        raise ValueError("t must lie in [0, horizon]")
    if traj.status.kind == "cap_hit" and t >= traj.status.time:
        raise ValueError("trajectory was capped at time %g; state undefined beyond" % traj.status.time)
    k = bisect_right(traj._times, t)
    state = _LiveState(traj.initial)
    for e in traj.events[:k]:
        if e.kind == BIRTH:
            state.add(e.particle_index, e.position)
        else:
            state.remove_at(state.idx.index(e.particle_index))
    return state.to_configuration()


def replay(traj: Trajectory) -> Iterator[tuple[float, Configuration]]:
    """Yield (time, state) after every event, validating the log.

    Raises ValueError on a structural defect: a death of an absent
    particle, a duplicated particle index, or a duplicated position.
    """
    state = _LiveState(traj.initial)
    yield 0.0, state.to_configuration()
    last_t = 0.0
    for e in traj.events:
        if e.time <= last_t and last_t > 0.0:
            raise ValueError("event times must strictly increase")
        last_t = e.time
        if e.kind == BIRTH:
            if e.particle_index in state.idx:
                raise ValueError(f"birth reuses live index {e.particle_index}")
            if e.position in state.pos_set:
                raise ValueError("birth duplicates an existing position")
            state.add(e.particle_index, e.position)
        elif e.kind == DEATH:
            if e.particle_index not in state.idx:
                raise ValueError(f"death of absent particle {e.particle_index}")
            state.remove_at(state.idx.index(e.particle_index))
        else:
            raise ValueError(f"unknown event kind {e.kind!r}")
        yield e.time, state.to_configuration()


def population_trace(traj: Trajectory) -> tuple[list[float], list[int]]:
    """Event times and populations immediately after each event."""
    times = [0.0]
    sizes = [len(traj.initial)]
    n = sizes[0]
    for e in traj.events:
        n += 1 if e.kind == BIRTH else -1
        times.append(e.time)
        sizes.append(n)
    return times, sizes


def population_at(traj: Trajectory, t: float) -> int:
    if t < 0 or t > traj.horizon:
        raise ValueError("t must lie in [0, horizon]")
    if traj.status.kind == "cap_hit" and t >= traj.status.time:
        raise ValueError("trajectory was capped at time %g" % traj.status.time)
    k = bisect_right(traj._times, t)
    n = len(traj.initial)
    for e in traj.events[:k]:
        n += 1 if e.kind == BIRTH else -1
    return n


def yule_mean(z0: int, mu: float, t: float) -> float:
    """Expected size of a pure-birth (rate mu*n) process started from z0."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    return z0 * math.exp(mu * t)


def expectation_bound(mean0: float, cert: GrowthCertificate, t: float) -> float:
    """Linear-growth population bound (c2 t + mean0) exp(c1 t)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return (cert.c2 * t + mean0) * math.exp(cert.c1 * t)
