import math

import numpy as np
import pytest
from scipy import stats

from sbdsim import (
    Box,
    Caps,
    Configuration,
    GrowthCertificate,
    NoiseSource,
    ParticleRegistry,
    RateModel,
    StreamKey,
    UniformBallKernel,
    combine,
    constant_death,
    contact,
    expectation_bound,
    next_event,
    population_at,
    replay,
    simulate,
    state_at,
    superlinear_birth,
    two_sample_ks,
    yule_mean,
)


def conf(*xs):
    return Configuration.from_points([[float(x)] for x in xs], 1)


def frozen_model():
    return RateModel("frozen", certificate=GrowthCertificate(0.0, 0.0))


def standard_model(lam=1.0, mu=1.0):
    parts = []
    if lam > 0:
        parts.append(contact(lam, UniformBallKernel(0.5, 1)))
    if mu > 0:
        parts.append(constant_death(mu))
    return combine(*parts)


def test_next_event_absorbed_when_all_rates_vanish():
    eta = conf(0.0, 1.0)
    reg = ParticleRegistry.for_initial(eta)
    assert next_event(frozen_model(), eta, reg, 0.0, NoiseSource(StreamKey(1))) is None


def test_next_event_victim_uniform_and_exponential_waiting_time():
    n = 5
    model = constant_death(1.0)
    eta = conf(*range(n))
    reg = ParticleRegistry.for_initial(eta)
    counts = {idx: 0 for idx, _ in eta}
    times = []
    n_draws = 10_000
    for j in range(n_draws):
        ev = next_event(model, eta, reg, 0.0, NoiseSource(StreamKey(10, j)))
        assert ev.kind == "death"
        counts[ev.particle_index] += 1
        times.append(ev.time)
    sd = math.sqrt((1 / n) * (1 - 1 / n) / n_draws)
    for idx in counts:
        assert abs(counts[idx] / n_draws - 1 / n) <= 3 * sd
    ks = stats.kstest(times, "expon", args=(0, 1.0 / n))
    assert ks.statistic < 1.949 / math.sqrt(n_draws)


def test_next_event_pure_immigration_from_empty():
    from sbdsim import immigration

    model = immigration(3.0, Box.cube(0.0, 1.0, 1))
    eta = Configuration.empty(1)
    reg = ParticleRegistry.for_initial(eta)
    times = []
    locs = []
    for j in range(10_000):
        ev = next_event(model, eta, reg, 0.0, NoiseSource(StreamKey(11, j)))
        assert ev.kind == "birth"
        assert ev.particle_index == 1
        times.append(ev.time)
        locs.append(ev.position[0])
    assert stats.kstest(times, "expon", args=(0, 1.0 / 3.0)).statistic < 1.949 / 100.0
    counts, _ = np.histogram(locs, bins=10, range=(0.0, 1.0))
    expected = len(locs) / 10.0
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2 < stats.chi2.ppf(0.999, df=9)


def test_next_event_offsets_clock():
    model = constant_death(1.0)
    eta = conf(0.0)
    reg = ParticleRegistry.for_initial(eta)
    ev = next_event(model, eta, reg, 5.0, NoiseSource(StreamKey(12)))
    assert ev.time > 5.0


def test_simulate_pure_death_structure_and_extinction_time():
    n0 = 10
    model = constant_death(1.0)
    eta0 = conf(*range(n0))
    harmonic = sum(1.0 / k for k in range(1, n0 + 1))
    ext = []
    for j in range(3000):
        traj = simulate(model, eta0, 50.0, StreamKey(13, j))
        assert traj.status.kind == "absorbed"
        assert len(traj.events) == n0
        assert all(e.kind == "death" for e in traj.events)
        ext.append(traj.status.time)
        final_time, final_state = list(replay(traj))[-1]
        assert len(final_state) == 0
    mean = np.mean(ext)
    se = np.std(ext, ddof=1) / math.sqrt(len(ext))
    assert abs(mean - harmonic) <= 3 * se


def test_simulate_empty_initial_is_absorbed_at_zero():
    traj = simulate(frozen_model(), Configuration.empty(1), 2.0, StreamKey(14))
    assert traj.status.kind == "absorbed"
    assert traj.status.time == 0.0
    assert traj.events == ()
    assert len(state_at(traj, 2.0)) == 0


def test_simulate_rejects_bad_arguments():
    eta0 = conf(0.0, 1.0)
    with pytest.raises(ValueError):
        simulate(standard_model(), eta0, 0.0, StreamKey(1))
    with pytest.raises(ValueError):
        simulate(standard_model(), eta0, 1.0, StreamKey(1), Caps(max_population=2))


def test_superlinear_birth_explodes_to_the_cap():
    model = superlinear_birth(1.0, 2.0, Box.cube(0.0, 1.0, 1))
    eta0 = conf(0.25, 0.75)
    hits = 0
    taus = []
    for j in range(50):
        traj = simulate(model, eta0, 10.0, StreamKey(15, j), Caps(max_population=2000))
        if traj.status.kind == "cap_hit":
            hits += 1
            taus.append(traj.status.time)
            assert traj.status.capped_by == "population"
    assert hits == 50
    assert np.median(taus) < 10.0


def test_event_budget_cap():
    model = superlinear_birth(1.0, 2.0, Box.cube(0.0, 1.0, 1))
    traj = simulate(model, conf(0.25, 0.75), 10.0, StreamKey(16), Caps(max_events=100))
    assert traj.status.kind == "cap_hit"
    assert traj.status.capped_by == "events"
    assert len(traj.events) == 100


def test_state_at_is_right_continuous():
    model = standard_model()
    eta0 = conf(*range(5))
    traj = simulate(model, eta0, 1.0, StreamKey(17, 3))
    assert len(traj.events) > 0
    assert sorted(state_at(traj, 0.0).position_tuples()) == sorted(eta0.position_tuples())
    t1 = traj.events[0].time
    before = state_at(traj, t1 * (1 - 1e-12))
    assert sorted(before.position_tuples()) == sorted(eta0.position_tuples())
    at = state_at(traj, t1)
    assert len(at) == len(eta0) + (1 if traj.events[0].kind == "birth" else -1)


def test_state_at_range_checks():
    model = standard_model()
    traj = simulate(model, conf(0.0), 1.0, StreamKey(18))
    with pytest.raises(ValueError):
        state_at(traj, -0.1)
    with pytest.raises(ValueError):
        state_at(traj, 1.5)
    capped = simulate(
        superlinear_birth(1.0, 2.0, Box.cube(0.0, 1.0, 1)),
        conf(0.25, 0.75),
        10.0,
        StreamKey(19),
        Caps(max_population=50),
    )
    tau = capped.status.time
    assert len(state_at(capped, tau * 0.5)) >= 2
    with pytest.raises(ValueError):
        state_at(capped, tau)


def test_simulate_is_bit_reproducible():
    model = standard_model()
    eta0 = conf(*range(8))
    a = simulate(model, eta0, 2.0, StreamKey(20, 5))
    b = simulate(model, eta0, 2.0, StreamKey(20, 5))
    assert [(e.time, e.kind, e.particle_index, e.position) for e in a.events] == [
        (e.time, e.kind, e.particle_index, e.position) for e in b.events
    ]
    c = simulate(model, eta0, 2.0, StreamKey(20, 6))
    assert [(e.time, e.kind) for e in c.events] != [(e.time, e.kind) for e in a.events]


def test_event_log_replays_cleanly():
    # replay raises on double kills, index reuse or duplicate positions
    model = standard_model(1.5, 1.0)
    for j in range(50):
        traj = simulate(model, conf(*range(6)), 2.0, StreamKey(21, j))
        states = list(replay(traj))
        assert len(states) == len(traj.events) + 1
        populations = [len(s) for _, s in states]
        assert all(p >= 0 for p in populations)
        assert traj.final_population() == populations[-1]


def test_birth_indices_increase_sequentially():
    model = standard_model(2.0, 0.0)
    traj = simulate(model, conf(0.0, 1.0), 1.5, StreamKey(22))
    born = [e.particle_index for e in traj.events if e.kind == "birth"]
    assert born == list(range(1, len(born) + 1))


def test_first_jump_law_and_birth_split():
    model = standard_model()
    eta0 = conf(*range(10))
    rate = model.cumulative_birth_rate(eta0) + model.cumulative_death_rate(eta0)
    assert rate == pytest.approx(20.0)
    times = []
    births = 0
    n = 4000
    reg = ParticleRegistry.for_initial(eta0)
    for j in range(n):
        ev = next_event(model, eta0, reg, 0.0, NoiseSource(StreamKey(23, j)))
        times.append(ev.time)
        births += ev.kind == "birth"
    assert stats.kstest(times, "expon", args=(0, 1.0 / rate)).statistic < 1.949 / math.sqrt(n)
    assert abs(births / n - 0.5) <= 3 * math.sqrt(0.25 / n)


def test_population_stays_within_yule_majorant_mean():
    # contact births at rate |eta| are dominated by the Yule mean curve
    model = standard_model(1.0, 1.0)
    eta0 = conf(*range(5))
    n = 2000
    for t in (0.5, 1.0, 2.0):
        sizes = [population_at(simulate(model, eta0, t, StreamKey(24, j)), t) for j in range(n)]
        mean = float(np.mean(sizes))
        se = float(np.std(sizes, ddof=1)) / math.sqrt(n)
        assert mean <= yule_mean(5, 1.0, t) + 3 * se


def test_certified_mean_bound_holds():
    model = standard_model(1.0, 1.0)
    eta0 = conf(*range(5))
    n = 2000
    sizes = [population_at(simulate(model, eta0, 1.0, StreamKey(25, j)), 1.0) for j in range(n)]
    mean = float(np.mean(sizes))
    se = float(np.std(sizes, ddof=1)) / math.sqrt(n)
    assert mean - 3 * se <= expectation_bound(5.0, model.certificate, 1.0)


def test_markov_restart_consistency():
    # law of |eta_{t+s}| from alpha equals law of |eta'_s| restarted from
    # the time-t state, by two-sample KS on 10^4 trajectories
    model = standard_model()
    alpha = conf(*range(5))
    t, s = 0.5, 0.5
    n = 10_000
    direct = []
    restarted = []
    for j in range(n):
        traj = simulate(model, alpha, t + s, StreamKey(26, j))
        direct.append(population_at(traj, t + s))
        half = simulate(model, alpha, t, StreamKey(27, j))
        mid = state_at(half, t)
        if len(mid) == 0:
            restarted.append(0)
            continue
        second = simulate(model, mid, s, StreamKey(28, j))
        restarted.append(population_at(second, s))
    ks = two_sample_ks(direct, restarted)
    assert ks.passed("0.001")


def test_thinned_clock_is_exponential_with_product_rate():
    # a geometric(p) sum of Exp(c) waiting times is Exp(c*p): accepting
    # candidate events with probability p thins the clock's rate by p
    from sbdsim.rng import CHANNEL_ACCEPTANCE, CHANNEL_DEATH_RACE

    c, p = 3.0, 0.4
    n = 10_000
    totals = []
    for j in range(n):
        ns = NoiseSource(StreamKey(29, j))
        clock = ns.stream(CHANNEL_DEATH_RACE, 0)
        accept = ns.stream(CHANNEL_ACCEPTANCE)
        total = clock.exponential(c)
        while accept.uniform() >= p:
            total += clock.exponential(c)
        totals.append(total)
    ks = stats.kstest(totals, "expon", args=(0, 1.0 / (c * p)))
    assert ks.statistic < 1.949 / math.sqrt(n)


def test_min_of_exponential_clocks_has_summed_rate():
    # the race winner's waiting time across heterogeneous clocks
    from sbdsim import immigration, pairwise_death

    model = combine(
        contact(0.7, UniformBallKernel(0.5, 1)),
        immigration(1.3, Box.cube(-1.0, 1.0, 1)),
        pairwise_death(0.4, 0.6, 1.5),
    )
    eta0 = conf(0.0, 1.0, 2.5)
    rate = model.cumulative_birth_rate(eta0) + model.cumulative_death_rate(eta0)
    reg = ParticleRegistry.for_initial(eta0)
    times = [
        next_event(model, eta0, reg, 0.0, NoiseSource(StreamKey(30, j))).time
        for j in range(5000)
    ]
    assert stats.kstest(times, "expon", args=(0, 1.0 / rate)).statistic < 1.949 / math.sqrt(5000)


def test_yule_mean_arithmetic():
    assert yule_mean(1, 1.0, 0.0) == 1.0
    assert yule_mean(1, 1.0, 1.0) == pytest.approx(math.e)
    assert yule_mean(5, 2.0, 0.5) == pytest.approx(5.0 * math.e)
    with pytest.raises(ValueError):
        yule_mean(1, 0.0, 1.0)
    with pytest.raises(ValueError):
        yule_mean(1, 1.0, -1.0)


def test_expectation_bound_arithmetic():
    assert expectation_bound(5.0, GrowthCertificate(1.0, 0.0), 1.0) == pytest.approx(5.0 * math.e)
    assert expectation_bound(7.0, GrowthCertificate(2.0, 3.0), 0.0) == 7.0
    assert expectation_bound(0.0, GrowthCertificate(0.0, 3.0), 2.0) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        expectation_bound(1.0, GrowthCertificate(1.0, 1.0), -0.5)
