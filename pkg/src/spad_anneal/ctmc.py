"""Event-driven network sampler: competing per-value clocks in continuous time.

Every node runs one independent clock per attainable value; a clock firing
sets its node to that value, including re-asserting the current one.  Clock
rates follow each circuit's rate function evaluated at the energy the fired
value would land in, so the network's stationary occupancy is the Boltzmann
distribution of the model at the configured temperature.

Waiting times come from the total-rate exponential and the firing clock from
a rate-proportional draw, with every step consuming exactly two uniforms.
Runs are reproducible bit for bit from their seed, whether rates are fully
recomputed each step or refreshed only for the fired node's neighbours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import _engine
from ._engine import (CI_BEST_IDX, CI_CUR_IDX, CI_DWBUF, CI_EVBUF,
                      CI_NEVENTS, CI_NFLIPS, CI_NSAMPLES, CI_PENDING, CI_STOP,
                      CI_UPOS, CI_VALID, CF_BEST, CF_ENERGY, CF_PEND, CF_T,
                      PENDING_ALL, RUNNING, STOP_ZERO_RATE, CompiledNetwork,
                      clock_rate_scalar, compile_network, draw_initial_values,
                      state_index_of_values)
from .model import (IsingModel, IsingState, PottsModel, PottsState,
                    ising_energy, ising_state_from_index, potts_energy,
                    potts_state_from_index)
from .ratefn import RateFunction

CONFIG_SCHEMA = 1

_CHUNK = 1 << 16          # kernel steps per uniform refill
_ACCUMULATE_CAP = 1 << 20  # auto per-state accumulators up to this many states
_MAX_CLOCKED = 1 << 31


def clock_count(model) -> int:
    """Clocks a model needs: one per node value."""
    if isinstance(model, IsingModel):
        return 2 * model.n
    return int(model.sizes.sum())


@dataclass(eq=False)
class Network:
    """A model wired to one rate-function circuit per clock.

    Clocks are ordered node-major, values in canonical order (-1 then +1 for
    spins, labels 0..q-1).  ``ising_split`` selects the differential drive,
    where a spin's two clocks run at the rate function evaluated at minus and
    plus half the flip energy gap.  Because conditional energies here drop
    all terms not involving the node, the two absolute conditional energies
    already sit at exactly those points, so the absolute (Potts-style) drive
    yields bit-identical rates; the flag documents intent and both settings
    are exercised by the tests.
    """

    model: IsingModel | PottsModel
    rate_functions: list[RateFunction]
    ising_split: bool = True

    def __post_init__(self):
        want = clock_count(self.model)
        if len(self.rate_functions) != want:
            raise ValueError(f"model needs {want} rate functions, got {len(self.rate_functions)}")
        if self.ising_split and not isinstance(self.model, IsingModel):
            self.ising_split = False

    @cached_property
    def compiled(self) -> CompiledNetwork:
        return compile_network(self.model, self.rate_functions)


def ising_network(model: IsingModel, rate_function, split: bool = True) -> Network:
    fs = _broadcast(rate_function, 2 * model.n)
    return Network(model=model, rate_functions=fs, ising_split=split)


def potts_network(model: PottsModel, rate_function) -> Network:
    fs = _broadcast(rate_function, int(model.sizes.sum()))
    return Network(model=model, rate_functions=fs)


def _broadcast(f, k):
    if isinstance(f, RateFunction):
        return [f] * k
    fs = list(f)
    return fs


@dataclass(frozen=True)
class LatchSpec:
    """Readout chain geometry for the analytic invalid-state estimate."""
    stage_delay: float
    q: int

    def __post_init__(self):
        if not (self.stage_delay >= 0 and math.isfinite(self.stage_delay)):
            raise ValueError("stage_delay must be finite and >= 0")
        if self.q < 1:
            raise ValueError("q must be >= 1")


def latch_invalid_fraction(event_rate: float, q: int, stage_delay: float) -> float:
    """Fraction of time a q-stage latch chain holds a transient invalid state.

    Each event walks a q-deep one-hot chain with per-stage settle time
    ``stage_delay``; the fraction is rate * q * stage_delay, saturating at 1.
    """
    if event_rate < 0 or stage_delay < 0 or q < 1:
        raise ValueError("event_rate and stage_delay must be >= 0, q >= 1")
    return min(1.0, event_rate * q * stage_delay)


@dataclass
class SimConfig:
    """Run controls; exactly one of max_events / max_time stops the run.

    blackout inserts a dead time after every event during which all clocks
    are paused together.  Pausing is memoryless, so it never changes which
    clock fires next; dwell weights count live time only and the stationary
    dwell-weighted law is exactly blackout-invariant, while event timestamps
    and clocked samples stay on the wall clock as hardware would see them.
    """

    seed: object = 0                      # int or numpy SeedSequence
    max_events: int | None = None
    max_time: float | None = None
    blackout: float = 0.0
    sample_mode: str = "dwell"            # "dwell" | "clocked"
    sample_period: float | None = None
    schedule: tuple | None = None         # ((t, T), ...) piecewise-linear in time
    latch: LatchSpec | None = None
    record_events: bool = True
    record_samples: bool = True
    accumulate: bool | None = None        # None: on for small state spaces
    use_cache: bool = True

    def __post_init__(self):
        if (self.max_events is None) == (self.max_time is None):
            raise ValueError("set exactly one of max_events / max_time")
        if self.max_events is not None and self.max_events < 1:
            raise ValueError("max_events must be >= 1")
        if self.max_time is not None and not (self.max_time > 0):
            raise ValueError("max_time must be > 0")
        if not (self.blackout >= 0 and math.isfinite(self.blackout)):
            raise ValueError("blackout must be finite and >= 0")
        if self.sample_mode not in ("dwell", "clocked"):
            raise ValueError(f"unknown sample_mode {self.sample_mode!r}")
        if self.sample_mode == "clocked":
            if self.sample_period is None or not (self.sample_period > 0):
                raise ValueError("clocked sampling needs sample_period > 0")
            if self.max_time is None:
                raise ValueError("clocked sampling needs a max_time stop")
            if self.max_time / self.sample_period > _MAX_CLOCKED:
                raise ValueError("clocked sample count too large")
        if self.schedule is not None:
            pts = tuple((float(t), float(T)) for t, T in self.schedule)
            if len(pts) < 1:
                raise ValueError("schedule needs at least one (time, T) point")
            ts = [t for t, _ in pts]
            if any(b < a for a, b in zip(ts, ts[1:])) or ts[0] < 0:
                raise ValueError("schedule times must be non-decreasing and >= 0")
            if any(T <= 0 for _, T in pts):
                raise ValueError("schedule temperatures must be > 0")
            self.schedule = pts


def sample_mode_from_string(s: str) -> tuple[str, float | None]:
    """Parse 'dwell' or 'clocked:<period>' into (mode, period)."""
    if s == "dwell":
        return "dwell", None
    if s.startswith("clocked:"):
        return "clocked", float(s.split(":", 1)[1])
    raise ValueError(f"sample mode must be 'dwell' or 'clocked:<period>', got {s!r}")


def config_to_dict(cfg: SimConfig) -> dict:
    stop = ({"max_events": cfg.max_events} if cfg.max_events is not None
            else {"max_time": cfg.max_time})
    d = {"schema": CONFIG_SCHEMA, "seed": cfg.seed, "stop": stop,
         "blackout": cfg.blackout, "sample_mode": cfg.sample_mode}
    if cfg.sample_period is not None:
        d["sample_period"] = cfg.sample_period
    if cfg.schedule is not None:
        d["schedule"] = [list(p) for p in cfg.schedule]
    if cfg.latch is not None:
        d["latch"] = {"stage_delay": cfg.latch.stage_delay, "q": cfg.latch.q}
    return d


def config_from_dict(d: dict) -> SimConfig:
    if d.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
        raise ValueError(f"unsupported config schema {d.get('schema')!r}")
    stop = d.get("stop", {})
    latch = d.get("latch")
    return SimConfig(seed=d.get("seed", 0),
                     max_events=stop.get("max_events"),
                     max_time=stop.get("max_time"),
                     blackout=float(d.get("blackout", 0.0)),
                     sample_mode=d.get("sample_mode", "dwell"),
                     sample_period=d.get("sample_period"),
                     schedule=tuple(map(tuple, d["schedule"])) if "schedule" in d else None,
                     latch=LatchSpec(**latch) if latch else None)


@dataclass(frozen=True)
class EventRecord:
    time: float        # absolute within run(); waiting time from step()
    node: int
    value: int         # spin or label the fired clock asserts
    rates_total: float # total rate at the draw


@dataclass
class EventStream:
    time: np.ndarray
    node: np.ndarray
    value: np.ndarray
    rates_total: np.ndarray

    def __len__(self):
        return self.time.shape[0]

    def __getitem__(self, i) -> EventRecord:
        return EventRecord(float(self.time[i]), int(self.node[i]),
                           int(self.value[i]), float(self.rates_total[i]))


@dataclass
class SampleStream:
    """Recorded samples.

    Dwell mode emits one (index, weight) pair per state visit: the weight is
    the visit's total live dwell, and self-transitions extend the open visit
    rather than closing it.  The trailing pair is the visit still open when
    the run stopped.  Clocked mode emits the state index at each multiple of
    the period, with no weights.
    """

    mode: str                       # "dwell" | "clocked"
    indices: np.ndarray             # canonical state index per sample
    weights: np.ndarray | None      # live dwell time per visit (dwell mode)
    period: float | None            # sample spacing (clocked mode)

    def __len__(self):
        return self.indices.shape[0]


@dataclass
class RunResult:
    events: EventStream | None
    samples: SampleStream | None
    dwell_mass: np.ndarray | None     # live-time mass per state
    visit_mass: np.ndarray | None     # expected-dwell (1/total rate) mass per state
    clocked_counts: np.ndarray | None
    final_state: IsingState | PottsState
    final_time: float
    n_events: int
    n_samples: int
    best_index: int
    best_energy: float
    latch_invalid: float | None
    stop_reason: str

    def best_state(self, model):
        if isinstance(model, IsingModel):
            return IsingState(ising_state_from_index(self.best_index, model.n))
        return PottsState(potts_state_from_index(self.best_index, model.sizes), model.sizes)


def _values_of_state(state):
    return state.spins if isinstance(state, IsingState) else state.labels


def step(network: Network, state, rng) -> tuple[float, EventRecord]:
    """One full-recompute step; mutates ``state`` and returns (dt, record).

    Uses the same two-uniform draw and the same accumulation order as the
    compiled run loop, so chaining steps from a fresh generator replays a
    run's event stream bit for bit (schedule- and blackout-free configs).
    """
    cn = network.compiled
    values = _values_of_state(state)
    hot = cn.hot_from_values(values)
    n, K = cn.n, cn.K
    rates = np.empty(K)
    evec = np.empty(K)
    for k in range(K):
        s = cn.b[k]
        for j in range(n):
            s += cn.U[k, hot[j]]
        E = -s
        evec[k] = E
        rates[k] = clock_rate_scalar(cn.kind[k], cn.r0[k], cn.T[k], cn.offset[k],
                                     E, cn.tab_u, cn.tab_logr,
                                     cn.tab_ptr[k], cn.tab_ptr[k + 1])
    rtot = 0.0
    for k in range(K):
        rtot += rates[k]
    if rtot <= 0.0:
        raise ValueError("all clock rates are zero: degenerate rate functions")
    u1 = rng.random()
    u2 = rng.random()
    dt = -math.log1p(-u1) / rtot
    target = u2 * rtot
    acc = 0.0
    sel = -1
    for k in range(K):
        acc += rates[k]
        if target < acc:
            sel = k
            break
    if sel < 0:
        for k in range(K - 1, -1, -1):
            if rates[k] > 0.0:
                sel = k
                break
    node = int(cn.node_of[sel])
    values[node] = cn.value_of[sel]
    return dt, EventRecord(time=dt, node=node, value=int(cn.value_of[sel]),
                           rates_total=rtot)


def run(network: Network, config: SimConfig) -> RunResult:
    """Simulate until the stop condition; see SimConfig for the knobs."""
    cn = network.compiled
    model = network.model
    rng = np.random.default_rng(config.seed)
    values = draw_initial_values(model, rng)
    hot = cn.hot_from_values(values)
    idx0 = state_index_of_values(cn, values)
    e0 = ising_energy(model, values) if cn.is_ising else potts_energy(model, values)

    S = cn.state_count
    acc_on = config.accumulate if config.accumulate is not None else S <= _ACCUMULATE_CAP
    if acc_on and S > _MAX_CLOCKED:
        raise ValueError("state space too large for per-state accumulators")
    dwell_mass = np.zeros(S if acc_on else 0)
    visit_mass = np.zeros(S if acc_on else 0)
    clock_counts = np.zeros(S if acc_on and config.sample_mode == "clocked" else 0,
                            dtype=np.int64)

    clocked = config.sample_mode == "clocked"
    period = config.sample_period if clocked else 0.0
    if clocked and config.record_samples:
        cap = int(round(config.max_time / period)) + 2
        samp_idx = np.empty(cap, dtype=np.int64)
    else:
        samp_idx = np.empty(0, dtype=np.int64)
    rec_dwell = (not clocked) and config.record_samples
    dwell_idx = np.empty(_CHUNK if rec_dwell else 0, dtype=np.int64)
    dwell_w = np.empty(_CHUNK if rec_dwell else 0)
    ev_t = np.empty(_CHUNK if config.record_events else 0)
    ev_node = np.empty(_CHUNK if config.record_events else 0, dtype=np.int64)
    ev_val = np.empty(_CHUNK if config.record_events else 0, dtype=np.int64)
    ev_rtot = np.empty(_CHUNK if config.record_events else 0)

    if config.schedule is not None:
        sched_t = np.array([t for t, _ in config.schedule])
        sched_T = np.array([T for _, T in config.schedule])
    else:
        sched_t = np.empty(0)
        sched_T = np.empty(0)

    rates = np.zeros(cn.K)
    evec = np.zeros(cn.K)
    carry_f = np.array([0.0, e0, e0, 0.0])
    carry_i = np.zeros(11, dtype=np.int64)
    carry_i[CI_CUR_IDX] = idx0
    carry_i[CI_BEST_IDX] = idx0
    carry_i[CI_PENDING] = PENDING_ALL

    max_events = -1 if config.max_events is None else config.max_events
    max_time = -1.0 if config.max_time is None else config.max_time

    ev_parts, dw_parts = [], []
    uniforms = np.empty(0)
    while carry_i[CI_STOP] == RUNNING:
        if carry_i[CI_UPOS] + 2 > uniforms.shape[0]:
            uniforms = rng.random(2 * _CHUNK)
            carry_i[CI_UPOS] = 0
        _engine.ctmc_kernel(cn.U, cn.b, cn.node_of, cn.clock_lo, cn.idx_weight,
                            cn.value_of, cn.kind, cn.r0, cn.T, cn.offset,
                            cn.tab_ptr, cn.tab_u, cn.tab_logr,
                            cn.nbr_ptr, cn.nbr_idx, sched_t, sched_T,
                            config.blackout, period, max_events, max_time,
                            1 if config.use_cache else 0,
                            hot, uniforms, rates, evec,
                            dwell_mass, visit_mass, clock_counts,
                            ev_t, ev_node, ev_val, ev_rtot,
                            samp_idx, dwell_idx, dwell_w, carry_f, carry_i)
        if config.record_events and carry_i[CI_EVBUF] > 0:
            c = carry_i[CI_EVBUF]
            ev_parts.append((ev_t[:c].copy(), ev_node[:c].copy(),
                             ev_val[:c].copy(), ev_rtot[:c].copy()))
            carry_i[CI_EVBUF] = 0
        if rec_dwell and carry_i[CI_DWBUF] > 0:
            c = carry_i[CI_DWBUF]
            dw_parts.append((dwell_idx[:c].copy(), dwell_w[:c].copy()))
            carry_i[CI_DWBUF] = 0

    if carry_i[CI_STOP] == STOP_ZERO_RATE:
        raise ValueError("all clock rates are zero: degenerate rate functions")

    events = None
    if config.record_events:
        if ev_parts:
            events = EventStream(*(np.concatenate([p[i] for p in ev_parts]) for i in range(4)))
        else:
            events = EventStream(np.empty(0), np.empty(0, np.int64),
                                 np.empty(0, np.int64), np.empty(0))
    open_visit = float(carry_f[CF_PEND]) > 0.0
    n_dwell_samples = int(carry_i[CI_NFLIPS]) + (1 if open_visit else 0)
    samples = None
    if clocked and config.record_samples:
        samples = SampleStream("clocked", samp_idx[:carry_i[CI_NSAMPLES]].copy(),
                               None, period)
    elif rec_dwell:
        if open_visit:  # flush the visit still open at the stop point
            dw_parts.append((np.array([carry_i[CI_CUR_IDX]]),
                             np.array([carry_f[CF_PEND]])))
        if dw_parts:
            samples = SampleStream("dwell", np.concatenate([p[0] for p in dw_parts]),
                                   np.concatenate([p[1] for p in dw_parts]), None)
        else:
            samples = SampleStream("dwell", np.empty(0, np.int64), np.empty(0), None)

    final_values = cn.values_from_hot(hot)
    final_state = (IsingState(final_values) if cn.is_ising
                   else PottsState(final_values, model.sizes))
    final_time = float(carry_f[CF_T])
    n_events = int(carry_i[CI_NEVENTS])
    latch_invalid = None
    if config.latch is not None and final_time > 0:
        latch_invalid = latch_invalid_fraction(n_events / final_time,
                                               config.latch.q, config.latch.stage_delay)
    reason = {1: "max_events", 2: "max_time"}.get(int(carry_i[CI_STOP]), "unknown")
    return RunResult(events=events, samples=samples,
                     dwell_mass=dwell_mass if acc_on else None,
                     visit_mass=visit_mass if acc_on else None,
                     clocked_counts=clock_counts if clock_counts.shape[0] else None,
                     final_state=final_state, final_time=final_time,
                     n_events=n_events,
                     n_samples=int(carry_i[CI_NSAMPLES]) if clocked else n_dwell_samples,
                     best_index=int(carry_i[CI_BEST_IDX]),
                     best_energy=float(carry_f[CF_BEST]),
                     latch_invalid=latch_invalid, stop_reason=reason)


# ---------------------------------------------------------------------------
# protocol helpers built on run()

@dataclass
class SweepResult:
    biases: np.ndarray
    p_plus: np.ndarray          # fraction of samples with the swept spin at +1
    samples_per_point: int
    periods: np.ndarray


def ising_transfer_sweep(network: Network, neuron: int, bias_values,
                         samples_per_point: int, seed: int = 0,
                         period_factor: float = 4.0, jobs: int = 1) -> SweepResult:
    """Measure the swept neuron's +1 occupancy against its applied bias.

    The neuron must be decoupled (its weight row zero); every bias point is
    an independent clocked run whose period is period_factor mean waiting
    times, estimated from the anchor rates, so points decorrelate equally.
    Child seeds are spawned per point, making the result independent of
    ``jobs``.
    """
    model = network.model
    if not isinstance(model, IsingModel):
        raise TypeError("transfer sweep needs an Ising network")
    if np.any(model.weights[neuron] != 0):
        raise ValueError("swept neuron must have zero couplings")
    biases = np.asarray(bias_values, dtype=np.float64)
    seeds = np.random.SeedSequence(seed).spawn(len(biases))
    from .ratefn import rate as _rate  # local import keeps module deps one-way

    def anchor_total(bias):
        cn = network.compiled
        tot = 0.0
        for k in range(cn.K):
            f = network.rate_functions[k]
            if cn.node_of[k] == neuron:
                tot += _rate(f, -float(cn.value_of[k]) * bias)
            else:
                tot += _rate(f, 0.0)
        return tot

    periods = np.array([period_factor / anchor_total(b) for b in biases])

    def one_point(i):
        m = IsingModel(model.weights.copy(), model.biases.copy())
        m.biases[neuron] = biases[i]
        net = Network(model=m, rate_functions=network.rate_functions,
                      ising_split=network.ising_split)
        cfg = SimConfig(seed=seeds[i], max_time=samples_per_point * periods[i],
                        sample_mode="clocked", sample_period=periods[i],
                        record_events=False, record_samples=True, accumulate=False)
        res = run(net, cfg)
        bits = (res.samples.indices >> neuron) & 1
        return bits[:samples_per_point].mean()

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            p = np.array(list(ex.map(one_point, range(len(biases)))))
    else:
        p = np.array([one_point(i) for i in range(len(biases))])
    return SweepResult(biases=biases, p_plus=p,
                       samples_per_point=samples_per_point, periods=periods)


@dataclass
class AnnealResult:
    times: np.ndarray            # sample times (wall clock when available)
    energies: np.ndarray         # sampled-state energies
    running_avg: np.ndarray      # time-averaged energy up to each sample
    best_state: IsingState | PottsState
    best_energy: float
    run: RunResult


def anneal(network: Network, config: SimConfig) -> AnnealResult:
    """Run under a cooling schedule and track the energy trajectory."""
    if config.schedule is None:
        raise ValueError("anneal needs a temperature schedule")
    Ts = [T for _, T in config.schedule]
    if any(b > a for a, b in zip(Ts, Ts[1:])):
        raise ValueError("anneal schedule must not raise the temperature")
    if not config.record_samples:
        config = replace(config, record_samples=True)
    res = run(network, config)
    from .reference import all_energies
    etab = all_energies(network.model)
    idx = res.samples.indices
    energies = etab[idx]
    if res.samples.mode == "dwell":
        # live-time axis: one point per state visit.  Blackout dead time is
        # not included, so with blackout > 0 these lag the wall-clock times
        # the kernel feeds to the schedule.
        w = res.samples.weights
        times = np.cumsum(w)
        avg = np.cumsum(energies * w) / np.cumsum(w)
    else:
        times = res.samples.period * np.arange(1, len(idx) + 1)
        avg = np.cumsum(energies) / np.arange(1, len(idx) + 1)
    return AnnealResult(times=times, energies=energies, running_avg=avg,
                        best_state=res.best_state(network.model),
                        best_energy=res.best_energy, run=res)
