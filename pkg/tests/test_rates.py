import math

import numpy as np
import pytest
from scipy import integrate, stats

from sbdsim import (
    Box,
    Configuration,
    GaussianKernel,
    GrowthCertificate,
    NoiseSource,
    RateModel,
    StreamKey,
    UniformBallKernel,
    combine,
    constant_death,
    contact,
    growth_certificate_check,
    immigration,
    pairwise_death,
    superlinear_birth,
)
from sbdsim.rates import GenericBirth, ImmigrationBirth
from sbdsim.rng import CHANNEL_ACCEPTANCE, CHANNEL_LOCATION


def conf(*xs):
    return Configuration.from_points([[float(x)] for x in xs], 1)


def streams(seed):
    ns = NoiseSource(StreamKey(seed))
    return ns.stream(CHANNEL_LOCATION), ns.stream(CHANNEL_ACCEPTANCE)


def test_birth_rate_contact_empty_configuration():
    m = contact(2.0, GaussianKernel(1.0, 1))
    assert m.birth_rate([0.7], Configuration.empty(1)) == 0.0


def test_birth_rate_contact_uniform_ball_kernel():
    # radius-1 ball in R^1 has density 1/2 on [-1, 1]
    m = contact(2.0, UniformBallKernel(1.0, 1))
    assert m.birth_rate([0.5], conf(0.0)) == pytest.approx(1.0)
    assert m.birth_rate([1.5], conf(0.0)) == 0.0


def test_birth_rate_immigration_inside_box():
    m = immigration(3.0, Box.cube(0.0, 1.0, 2))
    assert m.birth_rate([0.2, 0.9], Configuration.empty(2)) == pytest.approx(3.0)
    assert m.birth_rate([1.2, 0.9], Configuration.empty(2)) == 0.0


def test_death_rate_constant():
    m = constant_death(1.0)
    eta = conf(0.0, 2.0)
    assert m.death_rate([0.0], eta) == 1.0


def test_death_rate_pairwise_neighbour_sum():
    m = pairwise_death(0.1, 1.0, 1.0)
    eta = conf(0.0, 0.5, 3.0)
    assert m.death_rate([0.0], eta) == pytest.approx(1.1)


def test_death_rate_defined_only_on_the_configuration():
    m = constant_death(1.0)
    eta = conf(0.0, 1.0)
    with pytest.raises(ValueError):
        m.death_rate([0.25], eta)
    # random off-configuration probes always error
    rng = np.random.default_rng(2)
    for _ in range(100):
        x = float(rng.uniform(-5, 5))
        if not eta.contains_position([x]):
            with pytest.raises(ValueError):
                m.death_rate([x], eta)


def test_cumulative_birth_rate_contact_closed_form_vs_quadrature():
    m = contact(2.0, UniformBallKernel(1.0, 1))
    eta = conf(0.0, 0.4, 5.0)
    assert m.cumulative_birth_rate(eta) == pytest.approx(6.0)
    oracle, _ = integrate.quad(
        lambda x: m.birth_rate([x], eta), -3.0, 7.0, limit=300,
        points=[-1, -0.6, 0.4, 1, 1.4, 4, 6],
    )
    assert m.cumulative_birth_rate(eta) == pytest.approx(oracle, rel=1e-6)


def test_cumulative_birth_rate_empty_and_composite():
    k = UniformBallKernel(1.0, 1)
    assert contact(2.0, k).cumulative_birth_rate(Configuration.empty(1)) == 0.0
    m = combine(immigration(3.0, Box.cube(-1.0, 1.0, 1)), contact(2.0, k))
    eta = conf(*np.linspace(0.0, 2.0, 5))
    assert m.cumulative_birth_rate(eta) == pytest.approx(13.0)
    oracle, _ = integrate.quad(
        lambda x: m.birth_rate([x], eta), -3.0, 4.0, limit=500
    )
    assert m.cumulative_birth_rate(eta) == pytest.approx(oracle, rel=1e-5)


def test_cumulative_death_rate_examples():
    assert constant_death(1.0).cumulative_death_rate(conf(*range(7))) == pytest.approx(7.0)
    assert constant_death(1.0).cumulative_death_rate(Configuration.empty(1)) == 0.0


def test_cumulative_death_rate_pairwise_bruteforce():
    m = pairwise_death(0.3, 0.7, 1.2)
    rng = np.random.default_rng(8)
    for _ in range(30):
        pts = rng.uniform(-1.5, 1.5, size=(4, 1))
        eta = Configuration.from_points(pts, 1)
        oracle = 0.0
        for i in range(4):
            oracle += 0.3 + 0.7 * sum(
                1
                for j in range(4)
                if j != i and abs(pts[i, 0] - pts[j, 0]) <= 1.2 * (1 + 1e-12)
            )
        # brute-force double loop over ordered pairs
        got = m.cumulative_death_rate(eta)
        assert got == pytest.approx(oracle, rel=1e-12)


def test_sample_location_contact_symmetric_about_single_parent():
    m = contact(1.0, UniformBallKernel(1.0, 1))
    eta = conf(2.0)
    loc, acc = streams(31)
    signs = 0
    n = 4000
    for _ in range(n):
        x = m.sample_birth_location(eta, loc, acc)
        if x[0] > 2.0:
            signs += 1
    sd = math.sqrt(0.25 / n)
    assert abs(signs / n - 0.5) <= 3 * sd


def test_sample_location_immigration_uniform_mean():
    m = immigration(1.0, Box.cube(0.0, 1.0, 2))
    loc, acc = streams(32)
    n = 100_000
    total = np.zeros(2)
    for _ in range(n):
        total += m.sample_birth_location(Configuration.empty(2), loc, acc)
    mean = total / n
    sd = (1.0 / math.sqrt(12.0)) / math.sqrt(n)
    assert abs(mean[0] - 0.5) <= 3 * sd
    assert abs(mean[1] - 0.5) <= 3 * sd


def test_sample_location_two_parent_mixture_weights():
    m = contact(1.0, UniformBallKernel(0.25, 1))
    eta = conf(0.0, 10.0)
    loc, acc = streams(33)
    n = 10_000
    near_zero = 0
    for _ in range(n):
        x = m.sample_birth_location(eta, loc, acc)
        assert abs(x[0]) <= 0.25 + 1e-12 or abs(x[0] - 10.0) <= 0.25 + 1e-12
        if abs(x[0]) <= 0.25 + 1e-12:
            near_zero += 1
    sd = math.sqrt(0.25 / n)
    assert abs(near_zero / n - 0.5) <= 3 * sd


def test_sample_location_zero_rate_errors():
    m = contact(1.0, UniformBallKernel(1.0, 1))
    loc, acc = streams(34)
    with pytest.raises(ValueError):
        m.sample_birth_location(Configuration.empty(1), loc, acc)


def test_sample_location_matches_density_chi_square():
    # mixture of two gaussian bumps; bin masses from the error function
    m = contact(1.0, GaussianKernel(1.0, 1))
    eta = conf(0.0, 1.0)
    loc, acc = streams(35)
    n = 100_000
    edges = [-math.inf, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, math.inf]
    counts = np.zeros(len(edges) - 1)
    for _ in range(n):
        x = float(m.sample_birth_location(eta, loc, acc)[0])
        counts[np.searchsorted(edges, x, side="right") - 1] += 1

    def cdf(x):
        return 0.5 * (stats.norm.cdf(x, 0.0, 1.0) + stats.norm.cdf(x, 1.0, 1.0))

    probs = np.diff([cdf(e) for e in edges])
    chi2 = float(np.sum((counts - n * probs) ** 2 / (n * probs)))
    assert chi2 < stats.chi2.ppf(0.999, df=len(probs) - 1)


def test_generic_birth_total_rate_and_rejection_sampler():
    env = ImmigrationBirth(2.0, Box.cube(0.0, 1.0, 1))

    def rate_fn(x, eta):
        return (1.0 + math.sin(2.0 * math.pi * x[0]) ** 2) if 0.0 <= x[0] <= 1.0 else 0.0

    comp = GenericBirth(rate_fn, env)
    model = RateModel("wavy", births=(comp,), certificate=GrowthCertificate(0.0, 1.5))
    eta = Configuration.empty(1)
    # integral of 1 + sin^2(2 pi x) over [0, 1] is 3/2
    assert model.cumulative_birth_rate(eta) == pytest.approx(1.5, rel=1e-8)

    loc, acc = streams(36)
    n = 20_000
    samples = [float(model.sample_birth_location(eta, loc, acc)[0]) for _ in range(n)]
    grid = np.linspace(0.0, 1.0, 20_001)
    dens = 1.0 + np.sin(2.0 * np.pi * grid) ** 2
    cdf_grid = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2) * (grid[1] - grid[0])])
    cdf_grid /= cdf_grid[-1]
    ks = stats.kstest(samples, lambda x: np.interp(x, grid, cdf_grid))
    assert ks.statistic < 1.949 / math.sqrt(n)


def test_generic_birth_envelope_must_dominate():
    env = ImmigrationBirth(0.5, Box.cube(0.0, 1.0, 1))  # rate 0.5 < 1
    comp = GenericBirth(lambda x, eta: 1.0 if 0.0 <= x[0] <= 1.0 else 0.0, env)
    model = RateModel("bad", births=(comp,))
    loc, acc = streams(37)
    with pytest.raises(ValueError):
        model.sample_birth_location(Configuration.empty(1), loc, acc)


def test_non_integrable_birth_rate_errors():
    env = ImmigrationBirth(1.0, Box.cube(0.0, 30.0, 1))
    comp = GenericBirth(lambda x, eta: math.exp(x[0] * x[0]), env)
    model = RateModel("diverging", births=(comp,))
    with pytest.raises(ValueError):
        model.cumulative_birth_rate(Configuration.empty(1))


def test_majorant_equals_rate_for_monotone_models():
    m = combine(contact(1.5, UniformBallKernel(1.0, 1)), immigration(2.0, Box.cube(-1, 1, 1)))
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(0, 6))
        eta = conf(*rng.uniform(-2, 2, size=n)) if n else Configuration.empty(1)
        x = [float(rng.uniform(-2, 2))]
        assert m.majorant_birth_rate(x, eta) == m.birth_rate(x, eta)


def test_majorant_on_empty_configuration():
    m = immigration(2.0, Box.cube(0, 1, 1))
    assert m.majorant_birth_rate([0.5], Configuration.empty(1)) == pytest.approx(2.0)


def _nonmonotone_model():
    weights = [1.0, 5.0, 2.0, 7.0, 3.0, 4.0]
    env = ImmigrationBirth(10.0, Box.cube(0.0, 1.0, 1))

    def rate_fn(x, eta):
        if not 0.0 <= x[0] <= 1.0:
            return 0.0
        return weights[min(len(eta), 5)]

    return RateModel("bumpy", births=(GenericBirth(rate_fn, env),)), weights


def test_majorant_generic_matches_subset_enumeration_oracle():
    from itertools import combinations

    model, weights = _nonmonotone_model()
    eta = conf(0.1, 0.2, 0.3, 0.4, 0.5)
    x = [0.5]
    items = list(range(5))
    oracle = 0.0
    for k in range(6):
        for subset in combinations(items, k):
            sub = conf(*[0.1 * (i + 1) for i in subset]) if subset else Configuration.empty(1)
            oracle = max(oracle, model.birth_rate(x, sub))
    assert oracle == 7.0  # attained at |xi| = 3
    assert model.majorant_birth_rate(x, eta) == pytest.approx(oracle)


def test_majorant_generic_rejects_large_configurations():
    model, _ = _nonmonotone_model()
    eta = conf(*np.linspace(0, 1, 21, endpoint=False))
    with pytest.raises(ValueError):
        model.majorant_birth_rate([0.5], eta)


def test_majorant_dominates_birth_rate_everywhere():
    models = [
        contact(2.0, UniformBallKernel(0.5, 1)),
        immigration(1.0, Box.cube(-1, 1, 1)),
        _nonmonotone_model()[0],
    ]
    rng = np.random.default_rng(6)
    for model in models:
        for _ in range(3400):
            n = int(rng.integers(0, 6))
            eta = conf(*rng.uniform(-1, 1, size=n)) if n else Configuration.empty(1)
            x = [float(rng.uniform(-1.5, 1.5))]
            assert model.majorant_birth_rate(x, eta) >= model.birth_rate(x, eta) - 1e-12


def test_growth_certificate_check_passes_for_contact():
    m = contact(2.0, UniformBallKernel(1.0, 1))
    report = growth_certificate_check(m, trials=200, max_n=12, rng=np.random.default_rng(1))
    assert report.passed
    assert report.max_ratio <= 1.0 + 1e-9


def test_growth_certificate_check_requires_certificate():
    m = superlinear_birth(1.0, 2.0, Box.cube(0, 1, 1))
    with pytest.raises(ValueError):
        growth_certificate_check(m, trials=10, max_n=5, rng=np.random.default_rng(1))


def test_growth_certificate_check_fails_for_wrong_certificate():
    base = contact(2.0, UniformBallKernel(1.0, 1))
    wrong = RateModel(base.name, base.births, base.deaths, GrowthCertificate(1.0, 0.0))
    report = growth_certificate_check(wrong, trials=200, max_n=8, rng=np.random.default_rng(2))
    assert not report.passed
    assert report.witness is not None and len(report.witness) >= 1
    assert report.witness_rate > report.witness_bound


def test_contact_birth_monotone_in_configuration():
    m = contact(1.0, UniformBallKernel(1.0, 1))
    rng = np.random.default_rng(13)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        pts = rng.uniform(-2, 2, size=(n, 1))
        eta = Configuration.from_points(pts, 1)
        k = int(rng.integers(0, n))
        sub_idx = rng.choice(n, size=k, replace=False)
        sub = Configuration.from_points(pts[sub_idx], 1) if k else Configuration.empty(1)
        x = [float(rng.uniform(-2, 2))]
        assert m.birth_rate(x, sub) <= m.birth_rate(x, eta) + 1e-12


def test_pairwise_death_monotone_increasing_in_configuration():
    m = pairwise_death(0.2, 1.0, 1.0)
    rng = np.random.default_rng(14)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        pts = rng.uniform(-1, 1, size=(n, 1))
        eta = Configuration.from_points(pts, 1)
        k = int(rng.integers(1, n + 1))
        sub_idx = rng.choice(n, size=k, replace=False)
        sub = Configuration.from_points(pts[sub_idx], 1)
        x = pts[sub_idx[0]]
        assert m.death_rate(x, sub) <= m.death_rate(x, eta) + 1e-12
