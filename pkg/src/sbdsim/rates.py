"""Birth/death rate models: evaluation, cumulative rates and exact samplers.

A model is a sum of birth components and a sum of death components.  Each
birth component knows its pointwise rate b(x, eta), a closed-form total
rate where one exists, and an exact location sampler (or an envelope for
rejection).  A growth certificate (c1, c2) witnesses the linear bound
total birth rate <= c1 |eta| + c2; models without one can explode and may
only be simulated under caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from .configuration import Configuration
from .kernels import Box, Kernel
from .rng import Stream


@dataclass(frozen=True)
class GrowthCertificate:
    c1: float
    c2: float

    def __post_init__(self) -> None:
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("certificate constants must be nonnegative")

    def bound(self, n: int) -> float:
        return self.c1 * n + self.c2


class BirthComponent:
    """Interface for one additive birth term."""

    monotone: bool = False

    def rate(self, x: np.ndarray, eta: Configuration) -> float:
        raise NotImplementedError

    def total_rate(self, eta: Configuration) -> float:
        raise NotImplementedError

    def sample_location(self, eta: Configuration, loc: Stream, acc: Stream) -> np.ndarray:
        raise NotImplementedError

    def support_box(self, eta: Configuration) -> Box | None:
        raise NotImplementedError

    def integral_against(self, g: Callable[[np.ndarray], float], eta: Configuration) -> float:
        """Integral of rate(x, eta) g(x) dx."""
        raise NotImplementedError


@dataclass(frozen=True)
class ContactBirth(BirthComponent):
    """b(x, eta) = lam * sum over parents y of kernel(x - y)."""

    lam: float
    kernel: Kernel
    monotone = True

    def rate(self, x, eta):
        total = 0.0
        for _, y in eta:
            total += self.kernel.density(x - y)
        return self.lam * total

    def total_rate(self, eta):
        return self.lam * len(eta)

    def sample_location(self, eta, loc, acc):
        n = len(eta)
        k = min(int(loc.uniform() * n), n - 1)
        parent = eta.positions[k]
        return parent + self.kernel.sample(loc)

    def support_box(self, eta):
        if len(eta) == 0:
            return None
        r = self.kernel.support_radius()
        lo = eta.positions.min(axis=0) - r
        hi = eta.positions.max(axis=0) + r
        return Box(tuple(zip(lo.tolist(), hi.tolist())))

    def integral_against(self, g, eta):
        return self.lam * sum(
            self.kernel.integral_against(g, eta.positions[i]) for i in range(len(eta))
        )


@dataclass(frozen=True)
class ImmigrationBirth(BirthComponent):
    """b(x, eta) = kappa * uniform density on a box, independent of eta."""

    kappa: float
    region: Box
    monotone = True

    def rate(self, x, eta):
        return self.kappa / self.region.volume if self.region.contains(x) else 0.0

    def total_rate(self, eta):
        return self.kappa

    def sample_location(self, eta, loc, acc):
        return self.region.sample(loc)

    def support_box(self, eta):
        return self.region

    def integral_against(self, g, eta):
        return self.kappa * self.region.mean_of(g)


@dataclass(frozen=True)
class SuperlinearBirth(BirthComponent):
    """b(x, eta) = theta |eta|^p * uniform density on a box; p >= 2, no certificate."""

    theta: float
    power: float
    region: Box
    monotone = True

    def rate(self, x, eta):
        if not self.region.contains(x):
            return 0.0
        return self.theta * len(eta) ** self.power / self.region.volume

    def total_rate(self, eta):
        return self.theta * len(eta) ** self.power

    def sample_location(self, eta, loc, acc):
        return self.region.sample(loc)

    def support_box(self, eta):
        return self.region

    def integral_against(self, g, eta):
        return self.total_rate(eta) * self.region.mean_of(g)


@dataclass(frozen=True)
class GenericBirth(BirthComponent):
    """User-defined birth rate sampled by rejection from a declared envelope.

    The envelope component must dominate the rate pointwise; samples are
    proposed from the envelope and accepted with probability rate/envelope.
    Without a closed-form total the cumulative rate is integrated
    numerically (relative tolerance 1e-8).
    """

    rate_fn: Callable[[np.ndarray, Configuration], float]
    envelope: BirthComponent
    total_fn: Optional[Callable[[Configuration], float]] = None
    monotone: bool = False

    def rate(self, x, eta):
        v = self.rate_fn(x, eta)
        if v < 0:
            raise ValueError("birth rate must be nonnegative")
        return v

    def total_rate(self, eta):
        if self.total_fn is not None:
            return self.total_fn(eta)
        box = self.support_box(eta)
        if box is None:
            return 0.0
        return _integrate_over_box(lambda x: self.rate(x, eta), box, rel_tol=1e-8)

    def sample_location(self, eta, loc, acc):
        while True:
            x = self.envelope.sample_location(eta, loc, acc)
            e = self.envelope.rate(x, eta)
            b = self.rate(x, eta)
            if b > e * (1.0 + 1e-12):
                raise ValueError("envelope does not dominate the birth rate at x=%r" % (x,))
            if e > 0 and acc.uniform() * e <= b:
                return x

    def support_box(self, eta):
        return self.envelope.support_box(eta)

    def integral_against(self, g, eta):
        box = self.support_box(eta)
        if box is None:
            return 0.0
        return _integrate_over_box(lambda x: self.rate(x, eta) * g(x), box, rel_tol=1e-8)


class DeathComponent:
    """Interface for one additive death term, defined for x in eta."""

    def rate(self, x: np.ndarray, eta: Configuration) -> float:
        raise NotImplementedError

    def rates_vector(self, eta: Configuration) -> np.ndarray:
        """Hazards of all particles of eta, in storage order."""
        return np.array([self.rate(np.asarray(p), eta) for p in eta.positions])


@dataclass(frozen=True)
class ConstantDeath(DeathComponent):
    mu: float

    def rate(self, x, eta):
        return self.mu

    def rates_vector(self, eta):
        return np.full(len(eta), self.mu)


@dataclass(frozen=True)
class PairwiseDeath(DeathComponent):
    """d(x, eta) = m0 + sum over neighbours y != x of strength * 1{|x-y| <= radius}."""

    m0: float
    strength: float
    radius: float

    def rate(self, x, eta):
        total = self.m0
        if len(eta) > 1:
            d = np.linalg.norm(eta.positions - x, axis=1)
            near = int(np.sum(d <= self.radius))
            if bool(np.any(np.all(eta.positions == x, axis=1))):
                near -= 1  # x itself is not its own neighbour
            total += self.strength * near
        return total

    def rates_vector(self, eta):
        n = len(eta)
        if n == 0:
            return np.empty(0)
        diff = eta.positions[:, None, :] - eta.positions[None, :, :]
        d = np.sqrt(np.sum(diff * diff, axis=2))
        near = np.sum(d <= self.radius, axis=1) - 1  # exclude self
        return self.m0 + self.strength * near


def _integrate_over_box(fn: Callable[[np.ndarray], float], box: Box, rel_tol: float) -> float:
    from scipy import integrate

    d = box.dimension
    try:
        if d == 1:
            lo, hi = box.bounds[0]
            val, err = integrate.quad(
                lambda x: fn(np.array([x])), lo, hi, epsrel=rel_tol, epsabs=0.0, limit=400
            )
        elif d <= 3:
            val, err = integrate.nquad(
                lambda *xs: fn(np.array(xs)),
                [list(b) for b in box.bounds],
                opts={"epsrel": rel_tol, "epsabs": 0.0},
            )
        else:
            raise ValueError("numeric rate integration supports dimension <= 3")
    except OverflowError as exc:
        raise ValueError("birth rate is not integrable over its support") from exc
    if not math.isfinite(val):
        raise ValueError("birth rate is not integrable over its support")
    return float(val)


@dataclass(frozen=True)
class RateModel:
    """A birth/death rate pair with optional growth certificate."""

    name: str
    births: tuple[BirthComponent, ...] = ()
    deaths: tuple[DeathComponent, ...] = ()
    certificate: Optional[GrowthCertificate] = None

    def birth_rate(self, x: Sequence[float], eta: Configuration) -> float:
        x = np.asarray(x, dtype=float)
        return sum(c.rate(x, eta) for c in self.births)

    def death_rate(self, x: Sequence[float], eta: Configuration) -> float:
        x = np.asarray(x, dtype=float)
        if not eta.contains_position(x):
            raise ValueError("death rate is defined only for points of the configuration")
        return sum(c.rate(x, eta) for c in self.deaths)

    def cumulative_birth_rate(self, eta: Configuration) -> float:
        return sum(c.total_rate(eta) for c in self.births)

    def cumulative_death_rate(self, eta: Configuration) -> float:
        if not self.deaths or len(eta) == 0:
            return 0.0
        return math.fsum(self.death_rates(eta).tolist())

    def death_rates(self, eta: Configuration) -> np.ndarray:
        """Hazard of every particle of eta, in storage order."""
        n = len(eta)
        if n == 0 or not self.deaths:
            return np.zeros(n)
        total = np.zeros(n)
        for c in self.deaths:
            total = total + c.rates_vector(eta)
        return total

    def sample_birth_location(self, eta: Configuration, loc: Stream, acc: Stream) -> np.ndarray:
        totals = [c.total_rate(eta) for c in self.births]
        total = sum(totals)
        if total <= 0:
            raise ValueError("cumulative birth rate is zero; nothing to sample")
        u = loc.uniform() * total
        acc_total = 0.0
        chosen = self.births[-1]
        for c, t in zip(self.births, totals):
            acc_total += t
            if u < acc_total:
                chosen = c
                break
        return chosen.sample_location(eta, loc, acc)

    def majorant_birth_rate(self, x: Sequence[float], eta: Configuration) -> float:
        """Pure-birth majorant: sup of the birth rate over sub-configurations."""
        x = np.asarray(x, dtype=float)
        if all(c.monotone for c in self.births):
            return self.birth_rate(x, eta)
        n = len(eta)
        if n > 20:
            raise ValueError("generic majorant is limited to |eta| <= 20")
        best = 0.0
        items = list(eta)
        for k in range(n + 1):
            for subset in combinations(range(n), k):
                sub = Configuration(
                    eta.positions[list(subset)],
                    tuple(items[i][0] for i in subset),
                    eta.dimension,
                )
                best = max(best, self.birth_rate(x, sub))
        return best

    def support_box(self, eta: Configuration) -> Box | None:
        boxes = [c.support_box(eta) for c in self.births]
        boxes = [b for b in boxes if b is not None]
        if not boxes:
            return None
        lo = np.min([[b0[0] for b0 in b.bounds] for b in boxes], axis=0)
        hi = np.max([[b0[1] for b0 in b.bounds] for b in boxes], axis=0)
        return Box(tuple(zip(lo.tolist(), hi.tolist())))


# module-level aliases matching the operation names

def sample_birth_location(model: RateModel, eta: Configuration, noise) -> np.ndarray:
    """Draw a birth location from the model's normalised birth density,
    using the noise source's location and acceptance channels."""
    from .rng import CHANNEL_ACCEPTANCE, CHANNEL_LOCATION

    return model.sample_birth_location(
        eta, noise.stream(CHANNEL_LOCATION), noise.stream(CHANNEL_ACCEPTANCE)
    )


def birth_rate(model: RateModel, x, eta: Configuration) -> float:
    return model.birth_rate(x, eta)


def death_rate(model: RateModel, x, eta: Configuration) -> float:
    return model.death_rate(x, eta)


def cumulative_birth_rate(model: RateModel, eta: Configuration) -> float:
    return model.cumulative_birth_rate(eta)


def cumulative_death_rate(model: RateModel, eta: Configuration) -> float:
    return model.cumulative_death_rate(eta)


def majorant_birth_rate(model: RateModel, x, eta: Configuration) -> float:
    return model.majorant_birth_rate(x, eta)


@dataclass(frozen=True)
class CertificateReport:
    passed: bool
    max_ratio: float
    trials: int
    witness: Optional[Configuration] = None
    witness_rate: float = 0.0
    witness_bound: float = 0.0


def growth_certificate_check(
    model: RateModel, trials: int, max_n: int, rng: np.random.Generator
) -> CertificateReport:
    """Monte-Carlo spot check of total birth rate <= c1 |eta| + c2."""
    if model.certificate is None:
        raise ValueError(f"model {model.name!r} carries no growth certificate")
    cert = model.certificate
    dim = _model_dimension(model)
    span = _probe_span(model)
    max_ratio = 0.0
    for _ in range(trials):
        n = int(rng.integers(0, max_n + 1))
        eta = _random_configuration(rng, n, dim, span)
        total = model.cumulative_birth_rate(eta)
        bound = cert.bound(n)
        if bound == 0.0:
            ok = total <= 1e-12
            ratio = math.inf if not ok else 0.0
        else:
            ratio = total / bound
            ok = total <= bound * (1.0 + 1e-6)
        max_ratio = max(max_ratio, ratio)
        if not ok:
            return CertificateReport(False, max_ratio, trials, eta, total, bound)
    return CertificateReport(True, max_ratio, trials)


def _model_dimension(model: RateModel) -> int:
    for c in model.births:
        if isinstance(c, ContactBirth):
            return c.kernel.dimension
        if isinstance(c, (ImmigrationBirth, SuperlinearBirth)):
            return c.region.dimension
    return 1


def _probe_span(model: RateModel) -> float:
    span = 1.0
    for c in model.births:
        if isinstance(c, ContactBirth):
            span = max(span, 2.0 * c.kernel.support_radius())
        elif isinstance(c, (ImmigrationBirth, SuperlinearBirth)):
            span = max(span, max(abs(lo) + abs(hi) for lo, hi in c.region.bounds))
    return span + 2.0


def _random_configuration(
    rng: np.random.Generator, n: int, dim: int, span: float
) -> Configuration:
    pts = rng.uniform(-span, span, size=(n, dim))
    return Configuration.from_points(pts, dim)


# built-in model constructors

def contact(lam: float, kernel: Kernel, name: str | None = None) -> RateModel:
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    return RateModel(
        name or f"contact({lam:g})",
        births=(ContactBirth(lam, kernel),),
        certificate=GrowthCertificate(lam, 0.0),
    )


def immigration(kappa: float, region: Box, name: str | None = None) -> RateModel:
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    return RateModel(
        name or f"immigration({kappa:g})",
        births=(ImmigrationBirth(kappa, region),),
        certificate=GrowthCertificate(0.0, kappa),
    )


def constant_death(mu: float, name: str | None = None) -> RateModel:
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return RateModel(
        name or f"constant_death({mu:g})",
        deaths=(ConstantDeath(mu),),
        certificate=GrowthCertificate(0.0, 0.0),
    )


def pairwise_death(
    m0: float, strength: float, radius: float, name: str | None = None
) -> RateModel:
    if m0 < 0 or strength < 0:
        raise ValueError("pairwise death parameters must be nonnegative")
    return RateModel(
        name or f"pairwise_death({m0:g},{strength:g})",
        deaths=(PairwiseDeath(m0, strength, radius),),
        certificate=GrowthCertificate(0.0, 0.0),
    )


def superlinear_birth(
    theta: float, power: float, region: Box, name: str | None = None
) -> RateModel:
    if power < 2:
        raise ValueError("superlinear birth requires power >= 2")
    return RateModel(
        name or f"superlinear_birth({theta:g},{power:g})",
        births=(SuperlinearBirth(theta, power, region),),
        certificate=None,
    )


def combine(*models: RateModel, name: str | None = None) -> RateModel:
    """Sum of the birth parts and sum of the death parts of several models."""
    births: tuple[BirthComponent, ...] = ()
    deaths: tuple[DeathComponent, ...] = ()
    c1 = c2 = 0.0
    certified = True
    for m in models:
        births += m.births
        deaths += m.deaths
        if m.certificate is None:
            certified = False
        else:
            c1 += m.certificate.c1
            c2 += m.certificate.c2
    return RateModel(
        name or "+".join(m.name for m in models),
        births=births,
        deaths=deaths,
        certificate=GrowthCertificate(c1, c2) if certified else None,
    )
