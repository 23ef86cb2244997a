"""Keyed, counter-based random streams for reproducible parallel simulation.

Every random draw in the simulator is addressed by a stream coordinate
``(master_seed, trajectory, channel, index)`` plus the position of the draw
within that stream.  Identical coordinates always produce identical values,
and distinct coordinates give statistically independent streams.  This is
what makes shared-noise experiments work: two runs handed the same key
consume the same underlying randomness for the same semantic decision (the
birth clock, the death clock of particle 7, the next birth location), even
though they are separate processes.

Streams are splitmix64 counter generators: the stream seed is a 64-bit
hash of the coordinate and the k-th draw is a fixed avalanche function of
seed and k.  Construction is a few integer multiplies, which matters
because a fresh death-clock stream is opened for every particle ever born.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_INV53 = 2.0**-53


def _mix(z: int) -> int:
    # splitmix64 finalizer: full avalanche on 64 bits
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def _derive_seed(master_seed: int, words: tuple[int, ...]) -> int:
    z = master_seed & _M64
    for w in words:
        z = _mix(((z ^ (w & _M64)) * _GAMMA + 0x2545F4914F6CDD1D) & _M64)
    return z


# Semantic channels.  "death-race" is parameterised by the particle index,
# so each particle owns a private death-clock stream for its whole life.
CHANNEL_BIRTH_RACE = 0
CHANNEL_DEATH_RACE = 1
CHANNEL_LOCATION = 2
CHANNEL_ACCEPTANCE = 3
CHANNEL_INITIAL = 4


@dataclass(frozen=True)
class StreamKey:
    """Identifies one trajectory's noise realization.

    Two simulations given equal keys see identical randomness; keys with
    distinct ``(master_seed, trajectory)`` pairs are independent.
    """

    master_seed: int
    trajectory: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.trajectory < 0:
            raise ValueError("trajectory index must be nonnegative")

    def for_trajectory(self, trajectory: int) -> "StreamKey":
        return StreamKey(self.master_seed, trajectory)


def _encode_index(index: int) -> int:
    # zigzag: particle indices can be negative (initial particles)
    return 2 * index if index >= 0 else -2 * index - 1


class Stream:
    """One counter-based stream; draws advance a private counter."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _M64

    def uniform(self) -> float:
        """Next uniform draw in [0, 1)."""
        self._state = s = (self._state + _GAMMA) & _M64
        z = ((s ^ (s >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return ((z ^ (z >> 31)) >> 11) * _INV53

    def open_uniform(self) -> float:
        """Next uniform draw in the open interval (0, 1)."""
        v = 1.0 - self.uniform()
        while v <= 0.0 or v >= 1.0:
            v = 1.0 - self.uniform()
        return v

    def exponential(self, rate: float) -> float:
        """Inverse-CDF exponential draw, -ln(U)/rate with U in (0, 1)."""
        self._state = s = (self._state + _GAMMA) & _M64
        z = ((s ^ (s >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        v = 1.0 - ((z ^ (z >> 31)) >> 11) * _INV53
        while v <= 0.0 or v >= 1.0:
            v = 1.0 - self.uniform()
        return -math.log(v) / rate

    def standard_normal(self) -> float:
        # Box-Muller; consumes exactly two uniforms per call
        u1 = self.open_uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


class NoiseSource:
    """Lazy registry of the channel streams belonging to one trajectory."""

    def __init__(self, key: StreamKey):
        self.key = key
        self._streams: dict[tuple[int, int], Stream] = {}

    def stream(self, channel: int, index: int = 0) -> Stream:
        coord = (channel, index)
        s = self._streams.get(coord)
        if s is None:
            seed = _derive_seed(
                self.key.master_seed,
                (self.key.trajectory, channel, _encode_index(index)),
            )
            s = Stream(seed)
            self._streams[coord] = s
        return s
