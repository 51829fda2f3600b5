"""Exact reduction of an Ising model to a Potts model over spin pairs.

Consecutive spins (2I, 2I+1) collapse into one q=4 node whose label counts
the pair in binary with -1 as the 0 bit and the first spin as the high bit:

    label 0 <-> (-1, -1)    label 1 <-> (-1, +1)
    label 2 <-> (+1, -1)    label 3 <-> (+1, +1)

The intra-pair coupling and the two spin biases are absorbed into the node
bias; inter-pair couplings become (4, 4) weight blocks.  Every joint state
keeps its energy exactly, so both models share one Boltzmann distribution.
"""

from __future__ import annotations

import numpy as np

from .model import IsingModel, PottsModel

# label -> (first spin, second spin), in canonical label order
PAIR_SPINS = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], dtype=np.int64)


def pair_label(s1: int, s2: int) -> int:
    return ((s1 + 1) & 2) | ((s2 + 1) >> 1)


def pair_spins(label: int) -> tuple[int, int]:
    s1, s2 = PAIR_SPINS[label]
    return int(s1), int(s2)


def ising_to_potts(model: IsingModel) -> PottsModel:
    """Map an even-size Ising model to the equivalent q=4 Potts model."""
    n = model.n
    if n % 2:
        raise ValueError("pair mapping needs an even number of spins")
    m = n // 2
    w, h = model.weights, model.biases

    biases = []
    for i in range(m):
        a, b = 2 * i, 2 * i + 1
        biases.append(PAIR_SPINS @ h[[a, b]] + PAIR_SPINS[:, 0] * PAIR_SPINS[:, 1] * w[a, b])

    weights = {}
    for i in range(m):
        for j in range(i + 1, m):
            block = w[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            pw = np.einsum("au,bv,uv->ab", PAIR_SPINS, PAIR_SPINS, block)
            if np.any(pw != 0.0):
                weights[(i, j)] = pw

    return PottsModel(sizes=np.full(m, 4), weights=weights, biases=biases)


def ising_state_to_potts(spins) -> np.ndarray:
    """Spin vector -> label vector under the pair encoding."""
    spins = np.asarray(spins, dtype=np.int64)
    if spins.shape[-1] % 2:
        raise ValueError("spin count must be even")
    bits = (spins + 1) >> 1
    return 2 * bits[..., 0::2] + bits[..., 1::2]


def potts_state_to_ising(labels) -> np.ndarray:
    """Label vector -> spin vector; inverse of ising_state_to_potts."""
    labels = np.asarray(labels, dtype=np.int64)
    spins = np.empty(labels.shape[:-1] + (2 * labels.shape[-1],), dtype=np.int64)
    spins[..., 0::2] = 2 * ((labels >> 1) & 1) - 1
    spins[..., 1::2] = 2 * (labels & 1) - 1
    return spins


def index_permutation(n_spins: int) -> np.ndarray:
    """Canonical Potts index of every canonical Ising index's image.

    The pair label reads its first spin as the high bit while the Ising
    index is little-endian, so the two canonical indexings differ by an
    intra-pair bit swap.  With p = index_permutation(n), arrays over Potts
    indices align to Ising order as potts_array[p], e.g. exact equivalence
    is ising_energies == potts_energies[p] elementwise.
    """
    if n_spins % 2:
        raise ValueError("spin count must be even")
    idx = np.arange(1 << n_spins, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n_spins, dtype=np.int64)) & 1
    labels = 2 * bits[:, 0::2] + bits[:, 1::2]
    radix = 4 ** np.arange(n_spins // 2, dtype=np.int64)
    return labels @ radix
