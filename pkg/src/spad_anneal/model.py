"""Ising and Potts energy models on dense integer-or-float couplings.

Energy convention (shared by every sampler in this package):

    Ising:  E(s) = -(1/2 sum_ij w_ij s_i s_j + sum_i h_i s_i),   s_i in {-1,+1}
    Potts:  E(l) = -(1/2 sum_ij W_ij(l_i,l_j) + sum_i h_i(l_i)), l_i in {0..q_i-1}

Weights are symmetric with no self-coupling, so the 1/2 exactly cancels the
double count and the energy is a plain sum over unordered pairs.  Conditional
energies keep only the terms that involve the queried node; the constant rest
of the energy is dropped, so they are defined up to that shared offset and
their differences equal full-energy differences exactly.

States are indexed canonically for wire formats and histogram vectors:
Ising maps spin i to bit (s_i+1)/2 of a little-endian integer; Potts uses
little-endian mixed radix over the node sizes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MODEL_SCHEMA = 1


@dataclass
class IsingModel:
    """Symmetric pairwise model over n two-state (+/-1) nodes."""

    weights: np.ndarray  # (n, n) symmetric, zero diagonal
    biases: np.ndarray   # (n,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        n = self.biases.shape[0]
        if self.weights.shape != (n, n):
            raise ValueError(f"weights shape {self.weights.shape} does not match {n} biases")
        if not np.array_equal(self.weights, self.weights.T):
            raise ValueError("weights must be symmetric")
        if np.any(np.diag(self.weights) != 0.0):
            raise ValueError("self-couplings are not allowed (nonzero diagonal)")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("weights and biases must be finite")

    @property
    def n(self) -> int:
        return self.biases.shape[0]

    @property
    def state_count(self) -> int:
        return 1 << self.n


@dataclass
class PottsModel:
    """Symmetric pairwise model over n nodes with q_i labels each.

    ``weights`` holds one (q_i, q_j) block per unordered pair, keyed (i, j)
    with i < j; the mirrored block is implied by W_ji(b, a) = W_ij(a, b).
    """

    sizes: np.ndarray                              # (n,) ints, each >= 2
    weights: dict = field(default_factory=dict)    # {(i, j): (q_i, q_j) array}, i < j
    biases: list = field(default_factory=list)     # biases[i]: (q_i,) array

    def __post_init__(self):
        self.sizes = np.asarray(self.sizes, dtype=np.int64)
        n = self.sizes.shape[0]
        if np.any(self.sizes < 2):
            raise ValueError("every node needs at least 2 labels")
        if not self.biases:
            self.biases = [np.zeros(q) for q in self.sizes]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.biases) != n:
            raise ValueError(f"expected {n} bias vectors, got {len(self.biases)}")
        for i, b in enumerate(self.biases):
            if b.shape != (self.sizes[i],):
                raise ValueError(f"bias vector {i} has shape {b.shape}, expected ({self.sizes[i]},)")
            if not np.all(np.isfinite(b)):
                raise ValueError(f"bias vector {i} must be finite")
        clean = {}
        for (i, j), w in self.weights.items():
            if not (0 <= i < j < n):
                raise ValueError(f"weight key ({i},{j}) must satisfy 0 <= i < j < n")
            w = np.asarray(w, dtype=np.float64)
            if w.shape != (self.sizes[i], self.sizes[j]):
                raise ValueError(f"weight block ({i},{j}) has shape {w.shape}")
            if not np.all(np.isfinite(w)):
                raise ValueError(f"weight block ({i},{j}) must be finite")
            clean[(i, j)] = w
        self.weights = clean

    @property
    def n(self) -> int:
        return self.sizes.shape[0]

    @property
    def state_count(self) -> int:
        return int(np.prod(self.sizes, dtype=object))

    def pair_weight(self, i: int, j: int) -> np.ndarray:
        """Weight block oriented as (label_i, label_j), for any i != j."""
        if i < j:
            w = self.weights.get((i, j))
            return w if w is not None else np.zeros((self.sizes[i], self.sizes[j]))
        w = self.weights.get((j, i))
        return w.T if w is not None else np.zeros((self.sizes[i], self.sizes[j]))


@dataclass
class IsingState:
    spins: np.ndarray  # (n,) of -1/+1

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int64)
        if not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be -1 or +1")

    def index(self) -> int:
        return ising_state_index(self.spins)


@dataclass
class PottsState:
    labels: np.ndarray  # (n,) of label indices
    sizes: np.ndarray   # (n,) node sizes, for validation and indexing

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.sizes = np.asarray(self.sizes, dtype=np.int64)
        if np.any(self.labels < 0) or np.any(self.labels >= self.sizes):
            raise ValueError("labels out of range for node sizes")

    def index(self) -> int:
        return potts_state_index(self.labels, self.sizes)


# ---------------------------------------------------------------------------
# canonical state indexing

def ising_state_index(spins) -> int:
    """Little-endian bit index of a spin vector, with -1 -> 0 and +1 -> 1."""
    spins = np.asarray(spins)
    bits = (spins + 1) >> 1
    return int(bits @ (1 << np.arange(len(spins), dtype=np.int64)))

def ising_state_from_index(index: int, n: int) -> np.ndarray:
    bits = (index >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int64)

def potts_radices(sizes) -> np.ndarray:
    """Place value of each node in the little-endian mixed-radix index."""
    sizes = np.asarray(sizes, dtype=np.int64)
    return np.concatenate(([1], np.cumprod(sizes[:-1])))

def potts_state_index(labels, sizes) -> int:
    return int(np.asarray(labels, dtype=np.int64) @ potts_radices(sizes))

def potts_state_from_index(index: int, sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.int64)
    out = np.empty(len(sizes), dtype=np.int64)
    for i, q in enumerate(sizes):
        out[i] = index % q
        index //= q
    return out


# ---------------------------------------------------------------------------
# energies

def ising_energy(model: IsingModel, spins) -> float:
    spins = np.asarray(spins, dtype=np.float64)
    return float(-(0.5 * spins @ model.weights @ spins + model.biases @ spins))

def potts_energy(model: PottsModel, labels) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    e = 0.0
    for (i, j), w in model.weights.items():
        e += w[labels[i], labels[j]]
    for i, b in enumerate(model.biases):
        e += b[labels[i]]
    return float(-e)

def ising_conditional_energies(model: IsingModel, spins, i: int) -> np.ndarray:
    """Energies of node i's two settings given the rest; index 0 is -1, 1 is +1.

    Only terms containing node i are kept, so the pair sums to zero.
    """
    spins = np.asarray(spins, dtype=np.float64)
    h = model.weights[i] @ spins + model.biases[i]  # w_ii = 0 drops the self term
    return np.array([h, -h])

def potts_conditional_energies(model: PottsModel, labels, i: int) -> np.ndarray:
    """Energies of node i's q_i settings given the rest, as a length-q_i vector."""
    labels = np.asarray(labels, dtype=np.int64)
    h = model.biases[i].copy()
    for j in range(model.n):
        if j == i:
            continue
        key = (i, j) if i < j else (j, i)
        if key not in model.weights:
            continue
        w = model.weights[key]
        h += w[:, labels[j]] if i < j else w[labels[j], :]
    return -h


# ---------------------------------------------------------------------------
# model generation

def random_model(n: int, weight_range: tuple[int, int], seed: int) -> IsingModel:
    """Random Ising model with integer weights and biases in weight_range.

    Upper-triangle weights are drawn row-major and mirrored, then biases;
    the draw order is fixed so a seed pins the model exactly.
    """
    lo, hi = weight_range
    if lo > hi:
        raise ValueError("weight_range must be (lo, hi) with lo <= hi")
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    w[iu] = rng.integers(lo, hi, size=len(iu[0]), endpoint=True)
    w = w + w.T
    h = rng.integers(lo, hi, size=n, endpoint=True).astype(np.float64)
    return IsingModel(weights=w, biases=h)


# ---------------------------------------------------------------------------
# JSON wire format

def model_to_dict(model) -> dict:
    if isinstance(model, IsingModel):
        return {
            "schema": MODEL_SCHEMA,
            "type": "ising",
            "n": model.n,
            "weights": model.weights.tolist(),
            "biases": model.biases.tolist(),
        }
    if isinstance(model, PottsModel):
        return {
            "schema": MODEL_SCHEMA,
            "type": "potts",
            "sizes": model.sizes.tolist(),
            "weights": {f"{i},{j}": w.tolist() for (i, j), w in sorted(model.weights.items())},
            "biases": [b.tolist() for b in model.biases],
        }
    raise TypeError(f"not a model: {type(model)!r}")

def model_from_dict(d: dict):
    schema = d.get("schema", MODEL_SCHEMA)
    if schema != MODEL_SCHEMA:
        raise ValueError(f"unsupported model schema {schema!r}")
    kind = d.get("type")
    if kind == "ising":
        m = IsingModel(weights=np.array(d["weights"]), biases=np.array(d["biases"]))
        if "n" in d and d["n"] != m.n:
            raise ValueError(f"declared n={d['n']} does not match {m.n} biases")
        return m
    if kind == "potts":
        weights = {}
        for key, w in d.get("weights", {}).items():
            i, j = (int(p) for p in key.split(","))
            weights[(i, j)] = np.array(w)
        return PottsModel(sizes=np.array(d["sizes"]),
                          weights=weights,
                          biases=[np.array(b) for b in d["biases"]])
    raise ValueError(f"unknown model type {kind!r}")

def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")

def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
