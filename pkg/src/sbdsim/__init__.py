"""Exact event-driven simulation of finite spatial birth-and-death processes."""

from .analysis import (
    GeneratorGapRow,
    KsResult,
    QuadratureSpec,
    SimReport,
    generator_apply,
    generator_limit_check,
    ks_exponential,
    martingale_residual,
    mean_size_curve,
    semigroup_estimate,
    two_sample_ks,
)
from .configuration import Configuration, ParticleRegistry, as_point, lex_compare
from .coupling import (
    ContinuityReport,
    CoupledPair,
    PremiseReport,
    PremiseViolation,
    check_monotone_premise,
    continuity_experiment,
    inclusion_flags,
    simulate_coupled,
    sup_distance_shared_noise,
)
from .functionals import TestFunction, capped_size, indicator_leq, size, soft_count
from .kernels import Box, GaussianKernel, UniformBallKernel
from .metric import (
    compactness_statistic,
    dist,
    euclidean_matching_distance,
    min_pair_separation,
    psi_functional,
)
from .rates import (
    GrowthCertificate,
    RateModel,
    birth_rate,
    combine,
    constant_death,
    contact,
    cumulative_birth_rate,
    cumulative_death_rate,
    death_rate,
    growth_certificate_check,
    immigration,
    majorant_birth_rate,
    pairwise_death,
    sample_birth_location,
    superlinear_birth,
)
from .rng import NoiseSource, StreamKey
from .simulate import (
    Caps,
    Event,
    Trajectory,
    TrajectoryStatus,
    expectation_bound,
    next_event,
    population_at,
    replay,
    simulate,
    state_at,
    yule_mean,
)

__all__ = [
    "Box",
    "Caps",
    "Configuration",
    "ContinuityReport",
    "CoupledPair",
    "Event",
    "GaussianKernel",
    "GeneratorGapRow",
    "GrowthCertificate",
    "KsResult",
    "NoiseSource",
    "ParticleRegistry",
    "PremiseReport",
    "PremiseViolation",
    "QuadratureSpec",
    "RateModel",
    "SimReport",
    "StreamKey",
    "TestFunction",
    "Trajectory",
    "TrajectoryStatus",
    "UniformBallKernel",
    "as_point",
    "birth_rate",
    "capped_size",
    "check_monotone_premise",
    "combine",
    "compactness_statistic",
    "constant_death",
    "contact",
    "continuity_experiment",
    "cumulative_birth_rate",
    "cumulative_death_rate",
    "death_rate",
    "dist",
    "euclidean_matching_distance",
    "expectation_bound",
    "generator_apply",
    "generator_limit_check",
    "growth_certificate_check",
    "immigration",
    "inclusion_flags",
    "indicator_leq",
    "ks_exponential",
    "lex_compare",
    "majorant_birth_rate",
    "martingale_residual",
    "mean_size_curve",
    "min_pair_separation",
    "next_event",
    "pairwise_death",
    "population_at",
    "psi_functional",
    "replay",
    "sample_birth_location",
    "semigroup_estimate",
    "simulate",
    "simulate_coupled",
    "size",
    "soft_count",
    "state_at",
    "sup_distance_shared_noise",
    "superlinear_birth",
    "two_sample_ks",
    "yule_mean",
]
