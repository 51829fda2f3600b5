"""Estimators and fits used to judge sampler output.

Everything here consumes plain arrays so it works on dwell-weighted
histograms, clocked-sample index streams, and pulse-counter data alike.
KL divergences are in nats.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats as sps


def _curve_fit(*args, **kw):
    # the covariance output is discarded everywhere, so a singular one
    # (exactly reproduced data) is not worth a warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", optimize.OptimizeWarning)
        return optimize.curve_fit(*args, **kw)


@dataclass
class EmpiricalDistribution:
    """Histogram over canonical state indices.

    mass may be event counts or dwell-time totals; probs normalizes it.
    """

    mass: np.ndarray

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=np.float64)
        if self.mass.ndim != 1:
            raise ValueError("mass must be 1-d")
        if not np.all(np.isfinite(self.mass)) or np.any(self.mass < 0):
            raise ValueError("mass must be finite and nonnegative")
        if self.mass.sum() <= 0:
            raise ValueError("mass must have positive total")

    @property
    def probs(self) -> np.ndarray:
        return self.mass / self.mass.sum()

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    @classmethod
    def from_samples(cls, indices, n_states: int,
                     weights=None) -> "EmpiricalDistribution":
        indices = np.asarray(indices, dtype=np.int64)
        if weights is None:
            mass = np.bincount(indices, minlength=n_states).astype(np.float64)
        else:
            weights = np.asarray(weights, dtype=np.float64)
            mass = np.bincount(indices, weights=weights, minlength=n_states)
        return cls(mass=mass)


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats.

    Inputs are normalized first.  Raises if p puts mass where q has none;
    terms with p == 0 contribute zero.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("p and q must have the same shape")
    p = p / p.sum()
    q = q / q.sum()
    bad = (p > 0) & (q == 0)
    if np.any(bad):
        raise ValueError("p has mass on states where q is zero")
    return float(special.rel_entr(p, q).sum())


def statistical_floor(n_states: int, n_samples) -> np.ndarray | float:
    """Expected plug-in KL bias for N iid samples from a K-state law.

    (K - 1) / (2 N): the chi-square mean of the KL estimator.  This is the
    yardstick for "converged": an empirical KL near the floor is pure
    finite-sample noise, not model error.
    """
    n_samples = np.asarray(n_samples, dtype=np.float64)
    out = (n_states - 1) / (2.0 * n_samples)
    return float(out) if out.ndim == 0 else out


def kl_convergence(indices, exact_probs, n_batches: int = 50,
                   weights=None):
    """KL of the running empirical law against exact_probs.

    Splits the sample stream into n_batches cumulative checkpoints and
    returns (sample_counts, kl_values).  States never
    visited are fine (0 log 0 = 0); an exact prob of zero on a visited
    state raises.
    """
    indices = np.asarray(indices, dtype=np.int64)
    exact_probs = np.asarray(exact_probs, dtype=np.float64)
    n = indices.shape[0]
    if n < n_batches:
        raise ValueError("need at least n_batches samples")
    k = exact_probs.shape[0]
    edges = np.linspace(0, n, n_batches + 1).astype(np.int64)[1:]
    mass = np.zeros(k, dtype=np.float64)
    ns = np.empty(n_batches, dtype=np.int64)
    kls = np.empty(n_batches, dtype=np.float64)
    lo = 0
    for b, hi in enumerate(edges):
        chunk = indices[lo:hi]
        if weights is None:
            mass += np.bincount(chunk, minlength=k)
        else:
            mass += np.bincount(chunk, weights=np.asarray(weights)[lo:hi],
                                minlength=k)
        ns[b] = hi
        kls[b] = kl_divergence(mass, exact_probs)
        lo = hi
    return ns, kls


@dataclass
class TanhFit:
    """Parameters of p(b) = (1 + tanh((b - offset) / T)) / 2."""

    temperature: float
    offset: float
    residual: float        # RMS of (data - fit) in probability units

    def predict(self, bias) -> np.ndarray:
        bias = np.asarray(bias, dtype=np.float64)
        return 0.5 * (1.0 + np.tanh((bias - self.offset) / self.temperature))


def fit_tanh(bias, p_plus, t0: float = 1.0) -> TanhFit:
    """Fit the single-neuron activation curve p+(b).

    For an isolated two-state unit at temperature T the exact law is
    p+ = 1/(1 + exp(-2(b - off)/T)) = (1 + tanh((b - off)/T)) / 2,
    so the fitted T is directly comparable with the model temperature.
    """
    bias = np.asarray(bias, dtype=np.float64)
    p_plus = np.asarray(p_plus, dtype=np.float64)
    if bias.shape != p_plus.shape or bias.ndim != 1:
        raise ValueError("bias and p_plus must be equal-length 1-d arrays")
    if bias.shape[0] < 3:
        raise ValueError("need at least 3 points")

    def f(b, temp, off):
        return 0.5 * (1.0 + np.tanh((b - off) / temp))

    t0 = abs(t0) if t0 else 1.0   # the temperature axis is positive
    popt, _ = _curve_fit(f, bias, p_plus, p0=[t0, 0.0],
                                 maxfev=20000)
    temp, off = float(popt[0]), float(popt[1])
    if temp < 0:       # tanh((b-off)/T)/2 has a sign symmetry; canonicalize
        temp = -temp
        p_fit = f(bias, temp, off)
        # refit from the flipped start if the mirror is no better
        if np.sqrt(np.mean((p_plus - p_fit) ** 2)) > 0.5:
            popt, _ = _curve_fit(f, bias, p_plus, p0=[abs(t0), 0.0],
                                         maxfev=20000)
            temp, off = abs(float(popt[0])), float(popt[1])
    resid = float(np.sqrt(np.mean((p_plus - f(bias, temp, off)) ** 2)))
    return TanhFit(temperature=temp, offset=off, residual=resid)


def _log_erfc(x: np.ndarray) -> np.ndarray:
    # log erfc(x) without underflow: erfc(x) = 2 ndtr(-x sqrt(2))
    return np.log(2.0) + special.log_ndtr(-x * np.sqrt(2.0))


@dataclass
class RateFit:
    """Fitted clock-rate curve r(E) in log-rate space.

    residual is the RMS of ln(observed) - ln(fit), so exponential and
    erfc fits to the same data are directly comparable.
    """

    kind: str
    r0: float
    temperature: float
    offset: float
    residual: float
    r_squared: float

    def predict(self, energy) -> np.ndarray:
        energy = np.asarray(energy, dtype=np.float64)
        u = (energy - self.offset) / self.temperature
        if self.kind == "exponential":
            return self.r0 * np.exp(-u)
        if self.kind == "erfc":
            return self.r0 * np.exp(_log_erfc(u))
        raise ValueError(f"unknown kind {self.kind!r}")


def fit_rate(energy, rate, kind: str, t0: float = 1.0) -> RateFit:
    """Fit r(E) as exponential r0 exp(-(E)/T) or erfc r0 erfc((E-off)/T).

    Fitting happens on ln r.  The exponential form is offset-degenerate
    (r0 absorbs any offset) so it is reported with offset = 0.
    """
    energy = np.asarray(energy, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    keep = rate > 0
    if keep.sum() < 3:
        raise ValueError("need at least 3 positive-rate points")
    e = energy[keep]
    lr = np.log(rate[keep])

    if kind == "exponential":
        res = sps.linregress(e, lr)
        temp = -1.0 / res.slope
        r0 = float(np.exp(res.intercept))
        pred = res.intercept + res.slope * e
        off = 0.0
    elif kind == "erfc":
        def f(x, lr0, temp, off):
            return lr0 + _log_erfc((x - off) / temp)

        scale = max(e.max() - e.min(), 1.0)
        popt, _ = _curve_fit(
            f, e, lr, p0=[lr.max(), max(t0, scale / 4.0), np.median(e)],
            maxfev=50000)
        r0 = float(np.exp(popt[0]))
        temp, off = float(popt[1]), float(popt[2])
        pred = f(e, *popt)
    else:
        raise ValueError(f"unknown kind {kind!r}")

    resid = float(np.sqrt(np.mean((lr - pred) ** 2)))
    ss_res = float(np.sum((lr - pred) ** 2))
    ss_tot = float(np.sum((lr - lr.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(kind=kind, r0=r0, temperature=float(temp),
                   offset=float(off), residual=resid, r_squared=r2)


def poisson_relative_error(count) -> np.ndarray | float:
    """1/sqrt(N): relative sigma of a Poisson count."""
    count = np.asarray(count, dtype=np.float64)
    out = 1.0 / np.sqrt(count)
    return float(out) if out.ndim == 0 else out


def energy_trace(energies, weights=None):
    """Per-sample energies plus their running average.

    weights (dwell times) make the running average time-weighted; without
    them samples count equally.  Returns (energies, running_average).
    """
    energies = np.asarray(energies, dtype=np.float64)
    if weights is None:
        avg = np.cumsum(energies) / np.arange(1, energies.shape[0] + 1)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != energies.shape:
            raise ValueError("weights must match energies")
        tot = np.cumsum(weights)
        if tot[-1] <= 0:
            raise ValueError("total weight must be positive")
        avg = np.cumsum(weights * energies) / np.maximum(tot, 1e-300)
    return energies, avg
