"""Ground truth to judge samplers against: exact enumeration and Gibbs.

Exact probabilities are computed in the log domain with a max shift, so
integer-weight models with energies in the hundreds enumerate cleanly at any
temperature.  The Gibbs sampler is a conventional sequential-scan heat-bath
chain over the same models, sharing nothing with the event-driven engine
beyond the model definition; agreement between the two is evidence, not
construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from ._engine import clock_matrix, draw_initial_values, gibbs_kernel
from .model import (IsingModel, PottsModel, potts_radices)

DIST_SCHEMA = 1

_ENUM_CAP = 1 << 24
_CHUNK = 1 << 16


@dataclass
class Distribution:
    """Probability vector over canonically indexed joint states."""

    probs: np.ndarray
    T: float
    energies: np.ndarray | None = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 1 or self.probs.shape[0] < 1:
            raise ValueError("probs must be a non-empty vector")
        if not np.all(np.isfinite(self.probs)) or np.any(self.probs < 0):
            raise ValueError("probs must be finite and non-negative")
        s = self.probs.sum()
        if not np.isclose(s, 1.0, rtol=1e-6, atol=1e-9):
            raise ValueError(f"probs sum to {s}, not 1")
        self.probs = self.probs / s
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ValueError("T must be positive and finite")
        if self.energies is not None:
            self.energies = np.asarray(self.energies, dtype=np.float64)
            if self.energies.shape != self.probs.shape:
                raise ValueError("energies must match probs in length")


def all_energies(model) -> np.ndarray:
    """Energy of every joint state, in canonical index order."""
    S = model.state_count
    if S > _ENUM_CAP:
        raise ValueError(f"state space {S} exceeds enumeration cap {_ENUM_CAP}")
    out = np.empty(S)
    if isinstance(model, IsingModel):
        n = model.n
        shifts = np.arange(n, dtype=np.int64)
        for lo in range(0, S, _CHUNK):
            idx = np.arange(lo, min(lo + _CHUNK, S), dtype=np.int64)
            spins = (((idx[:, None] >> shifts) & 1) * 2 - 1).astype(np.float64)
            out[lo:lo + idx.shape[0]] = -(0.5 * ((spins @ model.weights) * spins).sum(axis=1)
                                          + spins @ model.biases)
        return out
    radix = potts_radices(model.sizes)
    for lo in range(0, S, _CHUNK):
        idx = np.arange(lo, min(lo + _CHUNK, S), dtype=np.int64)
        labels = (idx[:, None] // radix) % model.sizes
        e = np.zeros(idx.shape[0])
        for (i, j), w in model.weights.items():
            e += w[labels[:, i], labels[:, j]]
        for i, bvec in enumerate(model.biases):
            e += bvec[labels[:, i]]
        out[lo:lo + idx.shape[0]] = -e
    return out


def exact_boltzmann(model, T: float) -> Distribution:
    """Exact stationary distribution at temperature T by full enumeration."""
    if not (T > 0 and np.isfinite(T)):
        raise ValueError("T must be positive and finite")
    e = all_energies(model)
    logw = -e / T
    probs = np.exp(logw - logsumexp(logw))
    return Distribution(probs=probs, T=float(T), energies=e)


def conditional_distribution(model, values, i: int, T: float) -> np.ndarray:
    """Boltzmann distribution of node i's value given the rest."""
    from .model import ising_conditional_energies, potts_conditional_energies
    if isinstance(model, IsingModel):
        e = ising_conditional_energies(model, values, i)
    else:
        e = potts_conditional_energies(model, values, i)
    logw = -e / T
    return np.exp(logw - logsumexp(logw))


def gibbs_run(model, T: float, sweeps: int, seed: int = 0) -> np.ndarray:
    """Heat-bath sampling: sequential full scans, one state index per sweep."""
    if not (T > 0 and np.isfinite(T)):
        raise ValueError("T must be positive and finite")
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    clock_lo, node_of, value_of, idx_weight, U, b = clock_matrix(model)
    rng = np.random.default_rng(seed)
    values = draw_initial_values(model, rng)
    local = (values + 1) >> 1 if isinstance(model, IsingModel) else values
    hot = (clock_lo[:-1] + local).astype(np.int64)
    qmax = int((clock_lo[1:] - clock_lo[:-1]).max())
    scratch = np.empty(qmax)
    out = np.empty(sweeps, dtype=np.int64)
    n = model.n
    done = 0
    batch = max(1, (1 << 20) // n)
    while done < sweeps:
        cnt = min(batch, sweeps - done)
        u = rng.random(cnt * n)
        gibbs_kernel(U, b, clock_lo, idx_weight, float(T), hot, u, scratch,
                     out, done, cnt)
        done += cnt
    return out


# ---------------------------------------------------------------------------
# wire formats

def distribution_to_dict(d: Distribution) -> dict:
    return {"schema": DIST_SCHEMA, "T": d.T, "probs": d.probs.tolist()}


def distribution_from_dict(obj: dict) -> Distribution:
    if obj.get("schema", DIST_SCHEMA) != DIST_SCHEMA:
        raise ValueError(f"unsupported distribution schema {obj.get('schema')!r}")
    return Distribution(probs=np.array(obj["probs"], dtype=np.float64),
                        T=float(obj["T"]))


def save_distribution(d: Distribution, path) -> None:
    Path(path).write_text(json.dumps(distribution_to_dict(d)) + "\n")


def load_distribution(path) -> Distribution:
    return distribution_from_dict(json.loads(Path(path).read_text()))


def write_distribution_csv(d: Distribution, path, model=None) -> None:
    """index,energy,prob rows at full float precision."""
    e = d.energies
    if e is None and model is not None:
        e = all_energies(model)
    with open(path, "w") as fh:
        fh.write("index,energy,prob\n")
        for i, p in enumerate(d.probs):
            ei = "" if e is None else format(e[i], ".17g")
            fh.write(f"{i},{ei},{format(p, '.17g')}\n")
