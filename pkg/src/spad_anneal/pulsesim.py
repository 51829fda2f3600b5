"""Shot-noise model of the photon-driven clock front end.

A clock's analog output is a superposition of exponentially decaying
impulses at Poisson arrival times.  Raising the detection threshold thins
the upward crossings of that signal, which is what turns a threshold
(energy) into an event rate.  This module builds the signal on a uniform
grid, counts threshold crossings, and measures the resulting transfer
function and interval statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as spsignal
from scipy import stats as spstats

# photons drawn per batch; keeps arrival buffers bounded for long traces
_PHOTON_BATCH = 1 << 22


@dataclass(frozen=True)
class PulseConfig:
    """Trace parameters.

    The grid step must resolve the filter (dt <= filter_tau / 20) so no
    crossing can be stepped over.  refilter_tau, when set, low-passes the
    signal before crossings are counted.
    """

    photon_rate: float
    filter_tau: float
    dt: float
    duration: float
    amplitude: float = 1.0
    refilter_tau: float | None = None

    def __post_init__(self):
        for name in ("photon_rate", "filter_tau", "dt", "duration",
                     "amplitude"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative")
        for name in ("filter_tau", "dt", "duration", "amplitude"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.dt > self.filter_tau / 20.0:
            raise ValueError("dt must be <= filter_tau / 20")
        if self.duration < 2 * self.dt:
            raise ValueError("duration too short for the grid step")
        if self.refilter_tau is not None and not (self.refilter_tau > 0):
            raise ValueError("refilter_tau must be positive when set")


@dataclass
class Trace:
    """Uniformly sampled signal; sample j sits at time j * dt."""

    dt: float
    samples: np.ndarray

    @property
    def duration(self) -> float:
        return (self.samples.shape[0] - 1) * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.samples.shape[0]) * self.dt


def generate_trace(config: PulseConfig, seed) -> Trace:
    """Simulate the filtered photon signal on the dt grid.

    Arrivals are a homogeneous Poisson process.  Each photon deposits
    amplitude * exp(-(t_grid - t_photon) / tau) at the first grid point at
    or after it; the IIR recursion y[j] = x[j] + exp(-dt/tau) * y[j-1]
    then decays every deposit exactly, so grid values equal the analytic
    superposition at grid times.  Deterministic for a fixed (config, seed).
    """
    lam = config.photon_rate
    dt = config.dt
    tau = config.filter_tau
    n = int(math.ceil(config.duration / dt)) + 1
    impulses = np.zeros(n, dtype=np.float64)
    rng = np.random.default_rng(seed)
    if lam > 0:
        n_win = max(1, int(math.ceil(lam * config.duration / _PHOTON_BATCH)))
        edges = np.linspace(0.0, config.duration, n_win + 1)
        for w in range(n_win):
            t0, t1 = edges[w], edges[w + 1]
            k = int(rng.poisson(lam * (t1 - t0)))
            if k == 0:
                continue
            t = t0 + rng.random(k) * (t1 - t0)
            j = np.ceil(t / dt).astype(np.int64)
            np.minimum(j, n - 1, out=j)     # photons at t = duration exactly
            deposit = config.amplitude * np.exp(-(j * dt - t) / tau)
            impulses += np.bincount(j, weights=deposit, minlength=n)
    a = math.exp(-dt / tau)
    samples = spsignal.lfilter([1.0], [1.0, -a], impulses)
    return Trace(dt=dt, samples=samples)


def lowpass(trace: Trace, tau: float) -> Trace:
    """First-order low-pass with unit DC gain: y[j] = a y[j-1] + (1-a) x[j]."""
    if not (tau > 0):
        raise ValueError("tau must be positive")
    a = math.exp(-trace.dt / tau)
    samples = spsignal.lfilter([1.0 - a], [1.0, -a], trace.samples)
    return Trace(dt=trace.dt, samples=samples)


def count_crossings(trace: Trace, threshold: float,
                    refilter_tau: float | None = None):
    """Upward threshold crossings of the trace.

    A crossing happens at sample j when s[j-1] < threshold <= s[j]; the
    signal is taken as 0 before the first sample.  Returns (event_times,
    rate) with rate = count / trace duration.
    """
    if not math.isfinite(threshold):
        raise ValueError("threshold must be finite")
    s = trace.samples if refilter_tau is None else lowpass(trace, refilter_tau).samples
    above = s >= threshold
    prev_below = np.empty_like(above)
    prev_below[0] = 0.0 < threshold
    np.less(s[:-1], threshold, out=prev_below[1:])
    idx = np.flatnonzero(above & prev_below)
    times = idx * trace.dt
    return times, times.shape[0] / trace.duration


@dataclass
class TransferCurve:
    """Threshold-to-rate measurement from a single trace."""

    thresholds: np.ndarray
    counts: np.ndarray
    rates: np.ndarray
    relative_error: np.ndarray   # 1/sqrt(count) Poisson model, inf at 0
    duration: float              # live (post burn-in) trace length
    trace_mean: float
    trace_var: float


def transfer_function(config: PulseConfig, thresholds, seed,
                      burn_in: float | None = None) -> TransferCurve:
    """Crossing rate at every threshold, all from one trace.

    The first burn_in seconds (default 10 filter time constants) are
    dropped so the signal is stationary before counting starts.
    """
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if thresholds.ndim != 1 or thresholds.shape[0] == 0:
        raise ValueError("thresholds must be a non-empty 1-d array")
    if np.any(np.diff(thresholds) <= 0):
        raise ValueError("thresholds must be sorted strictly ascending")
    if burn_in is None:
        burn_in = 10.0 * config.filter_tau
    if burn_in >= config.duration:
        raise ValueError("burn_in swallows the whole trace")

    trace = generate_trace(config, seed)
    if config.refilter_tau is not None:
        trace = lowpass(trace, config.refilter_tau)
    skip = int(math.ceil(burn_in / config.dt))
    live = Trace(dt=config.dt, samples=trace.samples[skip:])

    counts = np.empty(thresholds.shape[0], dtype=np.int64)
    for i, th in enumerate(thresholds):
        t, _ = count_crossings(live, th)
        counts[i] = t.shape[0]
    rates = counts / live.duration
    with np.errstate(divide="ignore"):
        rel = np.where(counts > 0, 1.0 / np.sqrt(np.maximum(counts, 1)),
                       np.inf)
    return TransferCurve(thresholds=thresholds, counts=counts, rates=rates,
                         relative_error=rel, duration=live.duration,
                         trace_mean=float(live.samples.mean()),
                         trace_var=float(live.samples.var()))


@dataclass
class IntervalStats:
    """Inter-event interval summary with an exponential fit."""

    n_events: int
    mean_interval: float
    rate: float                  # 1 / mean, the ML exponential rate
    ks_statistic: float          # KS distance to the fitted exponential
    ks_pvalue: float
    hist_counts: np.ndarray
    hist_edges: np.ndarray


def interval_statistics(event_times, bins: int = 50) -> IntervalStats:
    """Fit the gaps between events with an exponential law.

    Needs at least 100 events.  The KS statistic compares the empirical
    interval law against Exponential(1/mean); a memoryless event stream
    keeps the statistic below the usual critical values.
    """
    event_times = np.asarray(event_times, dtype=np.float64)
    if event_times.ndim != 1 or event_times.shape[0] < 100:
        raise ValueError("need at least 100 events")
    intervals = np.diff(event_times)
    if np.any(intervals <= 0):
        raise ValueError("event times must be strictly increasing")
    mean = float(intervals.mean())
    ks = spstats.kstest(intervals, "expon", args=(0.0, mean))
    hist_counts, hist_edges = np.histogram(intervals, bins=bins)
    return IntervalStats(n_events=int(event_times.shape[0]),
                         mean_interval=mean, rate=1.0 / mean,
                         ks_statistic=float(ks.statistic),
                         ks_pvalue=float(ks.pvalue),
                         hist_counts=hist_counts, hist_edges=hist_edges)


def as_rate_table(curve: TransferCurve, min_count: int = 10) -> tuple:
    """Monotone (threshold, rate) rows usable as a tabulated rate function.

    Keeps thresholds with at least min_count events and enforces the
    non-increasing-rate envelope a rate table requires (ties from noisy
    neighboring counts are collapsed toward the lower rate).
    """
    rows = []
    last = math.inf
    for th, c, r in zip(curve.thresholds, curve.counts, curve.rates):
        if c < min_count or r <= 0:
            continue
        if r <= last:
            rows.append((float(th), float(r)))
            last = r
    if len(rows) < 2:
        raise ValueError("not enough well-measured thresholds for a table")
    return tuple(rows)
