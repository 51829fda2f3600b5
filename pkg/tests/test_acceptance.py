"""Acceptance gate: ten end-to-end checks of the sampler's headline claims.

Each test prints one verdict line into RESULTS (echoed by conftest at the
end of the session) and fails loudly if its clause is violated.  Sampling
budgets, seeds, and tolerances are frozen so the suite is deterministic.
"""

import math
import time

import numpy as np
import pytest

import spad_anneal as sa

RESULTS = []


def record(k: int, name: str, ok: bool, detail: str) -> bool:
    RESULTS.append(f"[{k:2d}/10] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def exp_net(model, T):
    return (sa.ising_network if isinstance(model, sa.IsingModel)
            else sa.potts_network)(model, sa.RateFunction(kind="exponential",
                                                          r0=1.0, T=T))


def quiet(seed, **kw):
    return sa.SimConfig(seed=seed, record_events=False, **kw)


def mean_event_dt(net, seed=999, events=200_000):
    probe = sa.run(net, quiet(seed, max_events=events, record_samples=False))
    return (probe.final_time / probe.n_events,
            probe.n_samples / probe.n_events)   # (mean dt, visits per event)


def test_01_boltzmann_exactness():
    t0 = time.perf_counter()
    m = sa.random_model(8, (-8, 8), seed=0)
    e = sa.all_energies(m)
    T = float(np.abs(e).max()) / 10.0
    exact = sa.exact_boltzmann(m, T)
    net = exp_net(m, T)
    mean_dt, visit_frac = mean_event_dt(net)

    # clause 1: 5e6 clocked samples vs exact enumeration
    period = 3.0 * mean_dt
    res_c = sa.run(net, quiet(1, max_time=5_000_000 * period,
                              sample_mode="clocked", sample_period=period,
                              record_samples=False))
    kl_c = sa.kl_divergence(res_c.clocked_counts, exact.probs)

    # clause 2: 1e7 dwell-weighted samples land within 3x the plug-in floor
    budget = int(10_000_000 / visit_frac * 1.06)
    res_d = sa.run(net, quiet(1, max_events=budget))
    assert len(res_d.samples) >= 10_000_000
    idx = res_d.samples.indices[:10_000_000]
    w = res_d.samples.weights[:10_000_000]
    emp = np.bincount(idx, weights=w, minlength=m.state_count)
    kl_d = sa.kl_divergence(emp, exact.probs)
    floor = sa.statistical_floor(m.state_count, 10_000_000)

    dt = time.perf_counter() - t0
    ok = record(1, "boltzmann exactness", kl_c <= 0.01 and kl_d <= 3 * floor
                and dt <= 120.0,
                f"clocked KL {kl_c:.2e} <= 0.01; dwell KL {kl_d / floor:.2f}x "
                f"floor <= 3x; {dt:.1f}s <= 120s")
    assert ok, RESULTS[-1]


def test_02_potts_equivalence():
    perm = sa.index_permutation(8)
    worst = 0.0
    energies_exact = True
    for seed in range(5):
        m = sa.random_model(8, (-8, 8), seed=seed)
        pm = sa.ising_to_potts(m)
        ei = sa.all_energies(m)
        energies_exact &= bool(np.array_equal(ei, sa.all_energies(pm)[perm]))
        T = float(np.abs(ei).max()) / 10.0
        exact = sa.exact_boltzmann(m, T)
        net = exp_net(pm, T)
        mean_dt, _ = mean_event_dt(net, events=100_000)
        period = 3.0 * mean_dt
        res = sa.run(net, quiet(1, max_time=5_000_000 * period,
                                sample_mode="clocked", sample_period=period,
                                record_samples=False))
        worst = max(worst, sa.kl_divergence(res.clocked_counts[perm],
                                            exact.probs))
    ok = record(2, "potts equivalence", energies_exact and worst <= 0.01,
                f"energies exact on 5/5 models: {energies_exact}; "
                f"worst clocked KL {worst:.2e} <= 0.01")
    assert ok, RESULTS[-1]


def test_03_neuron_transfer():
    T = 15.0
    fns = sa.calibrate([sa.RateFunction(kind="exponential", r0=1e6, T=T),
                        sa.RateFunction(kind="exponential", r0=3e6, T=T)],
                       target_rate=1e6)
    m = sa.IsingModel(weights=np.zeros((1, 1)), biases=np.zeros(1))
    net = sa.ising_network(m, fns)
    biases = np.arange(-75, 76, dtype=np.float64)
    sweep = sa.ising_transfer_sweep(net, 0, biases, 100_000, seed=3, jobs=4)
    fit = sa.fit_tanh(sweep.biases, sweep.p_plus, t0=T)
    t_err = abs(fit.temperature - T) / T
    p0 = float(sweep.p_plus[75])
    ok = record(3, "neuron transfer", t_err <= 0.02 and abs(p0 - 0.5) <= 0.002,
                f"fitted T {fit.temperature:.4g} ({100 * t_err:.2f}% <= 2%); "
                f"P(0) {p0:.5f} within 0.5 +/- 0.002")
    assert ok, RESULTS[-1]


def test_04_clock_balance():
    m = sa.PottsModel(sizes=np.array([4]), weights={}, biases=[np.zeros(4)])
    fns = [sa.RateFunction(kind="exponential", r0=float(r), T=1.0)
           for r in (1, 2, 3, 4)]
    net = sa.potts_network(m, fns)
    res = sa.run(net, quiet(0, max_events=1_000_000, record_samples=False))
    frac = res.dwell_mass / res.dwell_mass.sum()
    target = np.array([0.1, 0.2, 0.3, 0.4])
    sigma = np.sqrt(target * (1 - target) / 1_000_000)
    z = float(np.max(np.abs(frac - target) / sigma))
    ok = record(4, "clock balance", z <= 3.0,
                f"(1,2,3,4) Hz -> dwell {np.array2string(frac, precision=4)}, "
                f"max |z| {z:.2f} <= 3")
    assert ok, RESULTS[-1]


def _truncate_2sf(x: float) -> float:
    exp = math.floor(math.log10(abs(x)))
    scale = 10.0 ** (exp - 1)
    return math.floor(x / scale + 1e-9) * scale


def test_05_poisson_error_table():
    table = {242: 0.064, 100: 0.100, 1000: 0.031}
    got = {n: _truncate_2sf(sa.poisson_relative_error(n)) for n in table}
    ok_all = all(math.isclose(got[n], v, rel_tol=1e-9)
                 for n, v in table.items())
    ok = record(5, "poisson error table", ok_all,
                ", ".join(f"{n}->{got[n]:.3f}" for n in (242, 100, 1000))
                + " at 2 s.f.")
    assert ok, RESULTS[-1]


def test_06_pulse_regimes():
    # regime 1: photon interarrival comparable to the filter constant
    t0 = time.perf_counter()
    cfg_a = sa.PulseConfig(photon_rate=1e6, filter_tau=1e-6, dt=5e-8,
                           duration=0.5)
    curve = sa.transfer_function(cfg_a, np.linspace(2.5, 5.5, 16), seed=1)
    keep = curve.counts >= 10
    fit = sa.fit_rate(curve.thresholds[keep], curve.rates[keep],
                      kind="exponential")
    decades = float(np.log10(curve.rates[keep].max()
                             / curve.rates[keep].min()))
    cfg_ks = sa.PulseConfig(photon_rate=1e6, filter_tau=1e-6, dt=5e-8,
                            duration=0.35)
    trace = sa.generate_trace(cfg_ks, seed=5)
    times, _ = sa.count_crossings(trace, 3.5, refilter_tau=5e-7)
    st = sa.interval_statistics(times)
    dt_a = time.perf_counter() - t0

    # regime 2: filter a hundred times slower than the photon stream
    t1 = time.perf_counter()
    cfg_b = sa.PulseConfig(photon_rate=1e8, filter_tau=1e-6, dt=5e-8,
                           duration=0.02)
    th_b = 100.0 + math.sqrt(50.0) * np.linspace(1.0, 4.0, 16)
    curve_b = sa.transfer_function(cfg_b, th_b, seed=1)
    keep_b = curve_b.counts >= 10
    fe = sa.fit_rate(curve_b.thresholds[keep_b], curve_b.rates[keep_b],
                     kind="exponential")
    fc = sa.fit_rate(curve_b.thresholds[keep_b], curve_b.rates[keep_b],
                     kind="erfc")
    dt_b = time.perf_counter() - t1

    ok = record(6, "pulse regimes",
                fit.r_squared > 0.98 and decades >= 2.0
                and st.ks_pvalue > 0.01 and fc.residual < fe.residual
                and dt_a <= 300.0 and dt_b <= 300.0,
                f"exp fit R^2 {fit.r_squared:.4f} > 0.98 over {decades:.2f} "
                f"decades; KS p {st.ks_pvalue:.3f} > 0.01 (n={st.n_events}); "
                f"slow-filter erfc residual {fc.residual:.3f} < exp "
                f"{fe.residual:.3f}; {dt_a:.0f}s/{dt_b:.0f}s <= 300s")
    assert ok, RESULTS[-1]


def test_07_oracle_agreement():
    m = sa.random_model(4, (-8, 8), seed=0)
    e = sa.all_energies(m)
    T = float(np.abs(e).max()) / 4.0
    exact = sa.exact_boltzmann(m, T)

    net = exp_net(m, T)
    _, visit_frac = mean_event_dt(net)
    budget = int(1_000_000 / visit_frac * 1.1)
    res = sa.run(net, quiet(1, max_events=budget))
    assert len(res.samples) >= 1_000_000
    idx = res.samples.indices[:1_000_000]
    w = res.samples.weights[:1_000_000]
    kl_ctmc = sa.kl_divergence(
        np.bincount(idx, weights=w, minlength=16), exact.probs)

    gidx = sa.gibbs_run(m, T, 1_000_000, seed=1)
    kl_gibbs = sa.kl_divergence(np.bincount(gidx, minlength=16), exact.probs)

    ok = record(7, "oracle agreement",
                kl_ctmc <= 0.002 and kl_gibbs <= 0.002,
                f"event-driven KL {kl_ctmc:.2e}, heat-bath KL {kl_gibbs:.2e}, "
                f"both <= 2e-3 at 1e6 samples")
    assert ok, RESULTS[-1]


def test_08_blackout_invariance():
    m = sa.random_model(8, (-8, 8), seed=0)
    T = float(np.abs(sa.all_energies(m)).max()) / 10.0
    net = exp_net(m, T)
    mean_dt, visit_frac = mean_event_dt(net)
    blk = 10.0 * mean_dt
    budget = int(1_000_000 / visit_frac * 1.06)

    free = sa.run(net, quiet(1, max_events=budget))
    dead = sa.run(net, quiet(2, max_events=budget, blackout=blk))
    assert min(len(free.samples), len(dead.samples)) >= 1_000_000

    def mass(res):
        return np.bincount(res.samples.indices[:1_000_000],
                           weights=res.samples.weights[:1_000_000],
                           minlength=256)

    kl = sa.kl_divergence(mass(dead), mass(free))
    wall_ratio = dead.final_time / dead.dwell_mass.sum()
    same_seed = sa.run(net, quiet(1, max_events=200_000, blackout=blk))
    ref = sa.run(net, quiet(1, max_events=200_000))
    bitwise = (np.array_equal(same_seed.samples.indices, ref.samples.indices)
               and np.array_equal(same_seed.samples.weights,
                                  ref.samples.weights))

    ok = record(8, "blackout invariance",
                kl <= 0.01 and bitwise and 10.0 < wall_ratio < 12.0,
                f"10x-dead-time KL {kl:.2e} <= 0.01 at 1e6 samples; same-seed "
                f"dwell stream bitwise equal: {bitwise}; wall/live "
                f"{wall_ratio:.1f}")
    assert ok, RESULTS[-1]


def test_09_latch_budget():
    v = sa.latch_invalid_fraction(1e8, 10, 1e-11)
    ok = record(9, "latch budget", v == 0.01,
                f"latch_invalid_fraction(1e8/s, q=10, 10ps) = {v!r} == 0.01")
    assert ok, RESULTS[-1]


def test_10_anneal_ground_state():
    m = sa.random_model(8, (-8, 8), seed=0)
    e = sa.all_energies(m)
    ground = int(np.argmin(e))
    T0 = float(np.abs(e).max()) / 5.0
    horizon = 50_000.0
    schedule = ((0.0, T0), (horizon, T0 / 2.0))
    net = exp_net(m, T0)

    cooled = 0
    found = 0
    for seed in range(20):
        ar = sa.anneal(net, quiet(seed, max_time=horizon, schedule=schedule))
        en, w, t = ar.energies, ar.run.samples.weights, ar.times
        k0 = np.searchsorted(t, 0.05 * t[-1]) + 1
        k1 = np.searchsorted(t, 0.95 * t[-1])
        early = float(np.sum(en[:k0] * w[:k0]) / np.sum(w[:k0]))
        late = float(np.sum(en[k1:] * w[k1:]) / np.sum(w[k1:]))
        cooled += late < early
        found += ar.run.best_index == ground
    ok = record(10, "anneal ground state", cooled >= 18 and found >= 19,
                f"energy decreased on {cooled}/20 runs (need 18); ground "
                f"state visited in {found}/20 (need 19)")
    assert ok, RESULTS[-1]
