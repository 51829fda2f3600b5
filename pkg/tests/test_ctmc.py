"""Event-driven sampler: exactness, determinism, and the protocol helpers."""

import math

import numpy as np
import pytest

import spad_anneal as sa
from spad_anneal import RateFunction, SimConfig
from spad_anneal.ctmc import draw_initial_values


def exp_net(model, T, r0=1.0):
    return sa.ising_network(model, RateFunction(kind="exponential", r0=r0, T=T))


@pytest.fixture(scope="module")
def small_net():
    m = sa.random_model(6, (-4, 4), seed=3)
    return m, exp_net(m, 5.0)


def test_clock_count():
    assert sa.clock_count(sa.random_model(5, (-2, 2), seed=0)) == 10
    pm = sa.PottsModel(sizes=np.array([3, 4]), weights={},
                       biases=[np.zeros(3), np.zeros(4)])
    assert sa.clock_count(pm) == 7


def test_network_rejects_wrong_function_count():
    m = sa.random_model(3, (-2, 2), seed=0)
    fns = [RateFunction(kind="exponential", r0=1.0, T=1.0)] * 5
    with pytest.raises(ValueError):
        sa.ising_network(m, fns)


def test_run_deterministic_bitwise(small_net):
    m, net = small_net
    a = sa.run(net, SimConfig(seed=11, max_events=50_000))
    b = sa.run(net, SimConfig(seed=11, max_events=50_000))
    assert np.array_equal(a.events.time, b.events.time)
    assert np.array_equal(a.samples.indices, b.samples.indices)
    assert np.array_equal(a.samples.weights, b.samples.weights)
    assert np.array_equal(a.dwell_mass, b.dwell_mass)
    assert a.final_time == b.final_time
    c = sa.run(net, SimConfig(seed=12, max_events=50_000))
    assert not np.array_equal(a.events.time, c.events.time)


def test_cached_recompute_matches_full(small_net):
    m, net = small_net
    a = sa.run(net, SimConfig(seed=11, max_events=50_000))
    b = sa.run(net, SimConfig(seed=11, max_events=50_000, use_cache=False))
    assert np.array_equal(a.events.time, b.events.time)
    assert np.array_equal(a.events.node, b.events.node)
    assert np.array_equal(a.dwell_mass, b.dwell_mass)
    assert np.array_equal(a.samples.weights, b.samples.weights)


def test_step_matches_kernel(small_net):
    m, net = small_net
    res = sa.run(net, SimConfig(seed=21, max_events=500))
    rng = np.random.default_rng(21)
    values = draw_initial_values(m, rng)
    state = sa.IsingState(values)
    t = 0.0
    for k in range(500):
        dt, rec = sa.step(net, state, rng)
        t += dt
        assert t == pytest.approx(res.events.time[k], rel=1e-12, abs=0)
        assert rec.node == res.events.node[k]
        assert rec.value == res.events.value[k]
        assert rec.rates_total == pytest.approx(res.events.rates_total[k], rel=1e-12)
    assert state.index() == res.final_state.index()


def test_dwell_stream_reproduces_mass(small_net):
    m, net = small_net
    res = sa.run(net, SimConfig(seed=7, max_events=100_000))
    st = res.samples
    hist = np.bincount(st.indices, weights=st.weights, minlength=m.state_count)
    np.testing.assert_allclose(hist, res.dwell_mass, rtol=1e-12, atol=0.0)
    assert st.weights.sum() == pytest.approx(res.dwell_mass.sum(), rel=1e-12)


def test_dwell_stream_merges_repeats(small_net):
    # a visit ends only when the joint state changes, so consecutive
    # emitted indices always differ (final open visit included)
    m, net = small_net
    res = sa.run(net, SimConfig(seed=7, max_events=100_000))
    assert np.all(np.diff(res.samples.indices) != 0)
    assert res.n_samples == len(res.samples)
    assert res.n_samples < res.n_events  # self-transitions occurred


def test_blackout_shifts_wall_clock_only(small_net):
    m, net = small_net
    plain = sa.run(net, SimConfig(seed=11, max_events=30_000))
    rate = plain.n_events / plain.final_time
    B = 2.0 / rate
    dead = sa.run(net, SimConfig(seed=11, max_events=30_000, blackout=B))
    assert np.array_equal(plain.samples.indices, dead.samples.indices)
    assert np.array_equal(plain.samples.weights, dead.samples.weights)
    assert np.array_equal(plain.dwell_mass, dead.dwell_mass)
    # wall clock grows by exactly one blackout per event
    assert dead.final_time == pytest.approx(plain.final_time + B * 30_000, rel=1e-9)


def test_constant_schedule_matches_plain(small_net):
    m, net = small_net
    plain = sa.run(net, SimConfig(seed=11, max_events=20_000))
    sched = sa.run(net, SimConfig(seed=11, max_events=20_000,
                                  schedule=((0.0, 5.0), (1e12, 5.0))))
    assert np.array_equal(plain.events.time, sched.events.time)
    assert np.array_equal(plain.dwell_mass, sched.dwell_mass)


def test_single_spin_dwell_fraction():
    # lone spin with bias: P(+1) = 1/(1 + exp(-2h/T)), frozen closed form
    m = sa.IsingModel(weights=np.zeros((1, 1)), biases=np.array([1.5]))
    net = exp_net(m, 2.0)
    res = sa.run(net, SimConfig(seed=2, max_events=200_000))
    frac = res.dwell_mass / res.dwell_mass.sum()
    assert frac[1] == pytest.approx(0.8175744761936437, abs=0.01)


def test_fixed_rate_balance():
    # one 4-state node with constant clock rates 1,2,3,4 occupies each state
    # in proportion to its rate
    m = sa.PottsModel(sizes=np.array([4]), weights={}, biases=[np.zeros(4)])
    fns = [RateFunction(kind="exponential", r0=float(r), T=1.0) for r in (1, 2, 3, 4)]
    net = sa.potts_network(m, fns)
    res = sa.run(net, SimConfig(seed=0, max_events=300_000,
                                record_events=False, record_samples=False))
    frac = res.dwell_mass / res.dwell_mass.sum()
    target = np.array([0.1, 0.2, 0.3, 0.4])
    sig = np.sqrt(target * (1 - target) / 300_000)
    assert np.all(np.abs(frac - target) <= 3 * sig)
    # fixed total rate 10: mean waiting time 0.1
    assert res.final_time / res.n_events == pytest.approx(0.1, rel=0.01)


def test_clock_selection_frequencies():
    # with constant rates the event stream picks clocks proportionally
    m = sa.PottsModel(sizes=np.array([4]), weights={}, biases=[np.zeros(4)])
    fns = [RateFunction(kind="exponential", r0=float(r), T=1.0) for r in (1, 2, 3, 4)]
    net = sa.potts_network(m, fns)
    res = sa.run(net, SimConfig(seed=1, max_events=200_000,
                                record_samples=False))
    counts = np.bincount(res.events.value, minlength=4)
    frac = counts / counts.sum()
    target = np.array([0.1, 0.2, 0.3, 0.4])
    sig = np.sqrt(target * (1 - target) / 200_000)
    assert np.all(np.abs(frac - target) <= 4 * sig)


def test_waiting_times_exponential():
    m = sa.PottsModel(sizes=np.array([4]), weights={}, biases=[np.zeros(4)])
    fns = [RateFunction(kind="exponential", r0=float(r), T=1.0) for r in (1, 2, 3, 4)]
    net = sa.potts_network(m, fns)
    res = sa.run(net, SimConfig(seed=3, max_events=100_000, record_samples=False))
    dts = np.diff(res.events.time)
    # Exp(10): mean 0.1, variance 0.01
    assert dts.mean() == pytest.approx(0.1, rel=0.02)
    assert dts.var() == pytest.approx(0.01, rel=0.05)


def test_clocked_sampling_counts_match_stream():
    m = sa.random_model(5, (-3, 3), seed=2)
    net = exp_net(m, 4.0)
    period = 0.37
    res = sa.run(net, SimConfig(seed=5, max_time=5000.0,
                                sample_mode="clocked", sample_period=period))
    assert res.samples.mode == "clocked"
    hist = np.bincount(res.samples.indices, minlength=m.state_count)
    assert np.array_equal(hist, res.clocked_counts)
    assert abs(res.n_samples - 5000.0 / period) <= 1
    assert res.stop_reason == "max_time"


def test_clocked_agrees_with_dwell_at_long_period():
    m = sa.random_model(4, (-3, 3), seed=6)
    net = exp_net(m, 4.0)
    probe = sa.run(net, SimConfig(seed=9, max_events=10_000, record_samples=False))
    mean_dt = probe.final_time / probe.n_events
    period = 50.0 * mean_dt  # near-independent draws
    res_c = sa.run(net, SimConfig(seed=10, max_time=60_000 * period,
                                  sample_mode="clocked", sample_period=period,
                                  record_events=False))
    res_d = sa.run(net, SimConfig(seed=11, max_events=200_000,
                                  record_events=False, record_samples=False))
    p_c = res_c.clocked_counts / res_c.clocked_counts.sum()
    p_d = res_d.dwell_mass / res_d.dwell_mass.sum()
    assert sa.kl_divergence(p_c, p_d) < 5e-3


def test_stationary_matches_exact_enumeration():
    m = sa.random_model(5, (-4, 4), seed=1)
    T = float(np.abs(sa.all_energies(m)).max()) / 4.0
    net = exp_net(m, T)
    res = sa.run(net, SimConfig(seed=4, max_events=400_000,
                                record_events=False, record_samples=False))
    ex = sa.exact_boltzmann(m, T)
    assert sa.kl_divergence(res.dwell_mass, ex.probs) < 1e-3
    assert sa.kl_divergence(res.visit_mass, ex.probs) < 1e-3


def test_rate_function_spread_cancels_after_calibration():
    # per-clock r0 spread plus calibration leaves the stationary law intact
    m = sa.random_model(4, (-3, 3), seed=5)
    T = 3.0
    rng = np.random.default_rng(8)
    raw = [RateFunction(kind="exponential", r0=float(r), T=T)
           for r in rng.uniform(0.5, 5.0, size=8)]
    fns = sa.calibrate(raw, target_rate=1.0)
    net = sa.ising_network(m, fns)
    res = sa.run(net, SimConfig(seed=4, max_events=400_000,
                                record_events=False, record_samples=False))
    ex = sa.exact_boltzmann(m, T)
    assert sa.kl_divergence(res.dwell_mass, ex.probs) < 1e-3


def test_zero_rates_raise():
    m = sa.IsingModel(weights=np.zeros((2, 2)), biases=np.zeros(2))
    net = sa.ising_network(m, RateFunction(kind="exponential", r0=1.0, T=1.0,
                                           offset=-1e9))
    with pytest.raises(ValueError, match="zero"):
        sa.run(net, SimConfig(seed=0, max_events=100))


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(seed=0)  # no stop condition
    with pytest.raises(ValueError):
        SimConfig(seed=0, max_events=10, max_time=1.0)  # both
    with pytest.raises(ValueError):
        SimConfig(seed=0, max_events=10, sample_mode="clocked",
                  sample_period=0.1)  # clocked needs max_time
    with pytest.raises(ValueError):
        SimConfig(seed=0, max_time=1.0, sample_mode="clocked")  # no period
    with pytest.raises(ValueError):
        SimConfig(seed=0, max_events=10, blackout=-1.0)


def test_sample_mode_from_string():
    mode, period = sa.sample_mode_from_string("dwell")
    assert mode == "dwell" and period is None
    mode, period = sa.sample_mode_from_string("clocked:0.25")
    assert mode == "clocked" and period == 0.25
    with pytest.raises(ValueError):
        sa.sample_mode_from_string("clocked")
    with pytest.raises(ValueError):
        sa.sample_mode_from_string("clocked:zero")


def test_config_roundtrip():
    cfg = SimConfig(seed=9, max_time=12.5, blackout=0.1,
                    sample_mode="clocked", sample_period=0.5,
                    schedule=((0.0, 8.0), (10.0, 4.0)),
                    latch=sa.LatchSpec(stage_delay=1e-11, q=10))
    back = sa.config_from_dict(sa.config_to_dict(cfg))
    assert back == cfg


def test_latch_invalid_fraction_values():
    assert sa.latch_invalid_fraction(1e8, 10, 1e-11) == 0.01
    assert sa.latch_invalid_fraction(1e12, 10, 1e-9) == 1.0  # capped
    assert sa.latch_invalid_fraction(0.0, 10, 1e-9) == 0.0


def test_run_reports_latch_budget():
    m = sa.PottsModel(sizes=np.array([4]), weights={}, biases=[np.zeros(4)])
    fns = [RateFunction(kind="exponential", r0=float(r), T=1.0) for r in (1, 2, 3, 4)]
    net = sa.potts_network(m, fns)
    res = sa.run(net, SimConfig(seed=0, max_events=10_000,
                                latch=sa.LatchSpec(stage_delay=1e-3, q=5),
                                record_events=False, record_samples=False))
    expect = min(1.0, (res.n_events / res.final_time) * 5 * 1e-3)
    assert res.latch_invalid == pytest.approx(expect, rel=1e-12)


def test_best_state_tracks_running_minimum(small_net):
    m, net = small_net
    res = sa.run(net, SimConfig(seed=13, max_events=100_000,
                                record_events=False, record_samples=False))
    e = sa.all_energies(m)
    visited = res.dwell_mass > 0
    assert res.best_energy == pytest.approx(e[visited].min(), abs=1e-6)
    assert e[res.best_index] == pytest.approx(res.best_energy, abs=1e-6)
    assert res.best_state(m).index() == res.best_index


def test_record_toggles():
    m = sa.random_model(4, (-2, 2), seed=4)
    net = exp_net(m, 3.0)
    res = sa.run(net, SimConfig(seed=1, max_events=5000,
                                record_events=False, record_samples=False))
    assert res.events is None and res.samples is None
    assert res.dwell_mass is not None  # accumulators stay on for small spaces
    res2 = sa.run(net, SimConfig(seed=1, max_events=5000, accumulate=False))
    assert res2.dwell_mass is None and res2.visit_mass is None
    assert res2.samples is not None


def test_potts_and_ising_runs_agree_through_mapping():
    m = sa.random_model(4, (-4, 4), seed=12)
    T = 3.5
    pm = sa.ising_to_potts(m)
    perm = sa.index_permutation(4)
    net_i = exp_net(m, T)
    net_p = sa.potts_network(pm, RateFunction(kind="exponential", r0=1.0, T=T))
    ri = sa.run(net_i, SimConfig(seed=3, max_events=1_500_000,
                                 record_events=False, record_samples=False))
    rp = sa.run(net_p, SimConfig(seed=3, max_events=1_500_000,
                                 record_events=False, record_samples=False))
    pi = ri.dwell_mass / ri.dwell_mass.sum()
    pp = rp.dwell_mass / rp.dwell_mass.sum()
    # the two chains share a stationary law but not a trajectory
    assert sa.kl_divergence(pi, pp[perm]) < 2e-3


def test_transfer_sweep_jobs_invariant():
    m = sa.IsingModel(weights=np.zeros((1, 1)), biases=np.zeros(1))
    net = exp_net(m, 10.0, r0=1e6)
    biases = np.array([-20.0, -5.0, 0.0, 5.0, 20.0])
    s1 = sa.ising_transfer_sweep(net, 0, biases, 2000, seed=6, jobs=1)
    s3 = sa.ising_transfer_sweep(net, 0, biases, 2000, seed=6, jobs=3)
    assert np.array_equal(s1.p_plus, s3.p_plus)
    assert s1.samples_per_point == 2000
    # response rises with bias and is near-saturated at the ends
    assert s1.p_plus[0] < 0.05 and s1.p_plus[-1] > 0.95
    assert np.all(np.diff(s1.p_plus) >= 0)


def test_transfer_sweep_rejects_coupled_neuron():
    m = sa.random_model(2, (-3, 3), seed=1)
    if m.weights[0, 1] == 0:
        m = sa.IsingModel(weights=np.array([[0.0, 1.0], [1.0, 0.0]]),
                          biases=np.zeros(2))
    net = exp_net(m, 5.0)
    with pytest.raises(ValueError):
        sa.ising_transfer_sweep(net, 0, np.array([0.0]), 100, seed=0)


def test_anneal_requires_decreasing_schedule():
    m = sa.random_model(4, (-3, 3), seed=7)
    net = exp_net(m, 5.0)
    with pytest.raises(ValueError):
        sa.anneal(net, SimConfig(seed=0, max_time=10.0,
                                 schedule=((0.0, 2.0), (10.0, 3.0))))


def test_anneal_trace_consistent():
    m = sa.random_model(6, (-6, 6), seed=2)
    e = sa.all_energies(m)
    T0 = float(np.abs(e).max()) / 5.0
    net = exp_net(m, T0)
    cfg = SimConfig(seed=1, max_time=2000.0,
                    schedule=((0.0, T0), (2000.0, T0 / 2.0)))
    ar = sa.anneal(net, cfg)
    w = ar.run.samples.weights
    np.testing.assert_allclose(ar.times, np.cumsum(w), rtol=1e-12)
    np.testing.assert_allclose(ar.energies, e[ar.run.samples.indices], rtol=1e-12)
    # the running time average must settle below the early average
    assert ar.running_avg[-1] < ar.running_avg[min(50, len(w) - 1)]
    assert ar.best_energy == pytest.approx(e[ar.run.best_index], abs=1e-6)


def test_max_time_stop_honors_horizon(small_net):
    m, net = small_net
    res = sa.run(net, SimConfig(seed=8, max_time=123.0))
    assert res.final_time == 123.0
    assert res.stop_reason == "max_time"
    assert res.dwell_mass.sum() == pytest.approx(123.0, rel=1e-12)
