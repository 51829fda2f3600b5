"""Compiled clock representation and the compiled sampling kernels.

Both model families reduce to one flat picture: every node owns one clock
per attainable value, and clock k fires at a rate set by the energy the
network would land in if k's value were imposed.  With ``hot[j]`` the global
clock index of node j's current value, that energy is

    E_k = -(b[k] + sum_j U[k, hot[j]])

where U folds the pairwise couplings (zero inside a node) and b the biases.
A fired clock simply overwrites its node's value; firing the value already
held is a valid self-event and is kept in the event stream.

Determinism contract: a run consumes exactly two uniforms per event (one for
the waiting time, one for clock selection), drawn from numpy's Generator in
bulk chunks.  Bulk draws match scalar draws bitwise, so the pure-Python
single-step path in ctmc.step reproduces kernel event streams exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import (IsingModel, PottsModel, ising_state_index,
                    potts_radices, potts_state_index)

# rate evaluation guards, shared by kernel and python step
EXP_ARG_MAX = 700.0
RATE_MAX = 1e300

KIND_CODE = {"exponential": 0, "erfc": 1, "tabulated": 2}

# stop flags reported by the kernel
RUNNING, STOP_EVENTS, STOP_TIME, STOP_ZERO_RATE = 0, 1, 2, 4

# carry_i slots
CI_NEVENTS, CI_NSAMPLES, CI_CUR_IDX, CI_BEST_IDX, CI_VALID, CI_STOP, \
    CI_UPOS, CI_EVBUF, CI_DWBUF, CI_PENDING, CI_NFLIPS = range(11)
# carry_f slots; CF_PEND holds the live dwell of the still-open state visit
CF_T, CF_ENERGY, CF_BEST, CF_PEND = range(4)

# CI_PENDING values: node index whose value changed last event, or
PENDING_ALL, PENDING_NONE = -1, -2


@dataclass
class CompiledNetwork:
    """Flat arrays driving the kernels; built once per Network."""

    n: int
    K: int
    clock_lo: np.ndarray     # (n+1,) int64, clocks of node i are [lo[i], lo[i+1])
    node_of: np.ndarray      # (K,) int64
    value_of: np.ndarray     # (K,) int64: spin (-1/+1) or label
    idx_weight: np.ndarray   # (K,) int64: clock's contribution to the state index
    U: np.ndarray            # (K, K) float64
    b: np.ndarray            # (K,) float64
    kind: np.ndarray         # (K,) int64 rate-kind codes
    r0: np.ndarray           # (K,) float64
    T: np.ndarray            # (K,) float64
    offset: np.ndarray       # (K,) float64
    tab_ptr: np.ndarray      # (K+1,) int64 into the table arrays
    tab_u: np.ndarray        # concatenated table abscissae
    tab_logr: np.ndarray     # concatenated table log-rates
    nbr_ptr: np.ndarray      # (n+1,) int64 CSR: nodes whose rates see node j
    nbr_idx: np.ndarray
    state_count: int
    is_ising: bool

    def hot_from_values(self, values) -> np.ndarray:
        """Clock indices for a spin or label vector."""
        values = np.asarray(values, dtype=np.int64)
        local = (values + 1) >> 1 if self.is_ising else values
        return self.clock_lo[:-1] + local

    def values_from_hot(self, hot) -> np.ndarray:
        return self.value_of[np.asarray(hot, dtype=np.int64)]


def _clock_matrix_ising(model: IsingModel):
    n = model.n
    K = 2 * n
    clock_lo = np.arange(0, K + 1, 2, dtype=np.int64)
    node_of = np.repeat(np.arange(n, dtype=np.int64), 2)
    value_of = np.tile(np.array([-1, 1], dtype=np.int64), n)
    idx_weight = np.where(value_of > 0, 1 << node_of, 0).astype(np.int64)
    spins = value_of.astype(np.float64)
    U = np.outer(spins, spins) * model.weights[np.ix_(node_of, node_of)]
    U[node_of[:, None] == node_of[None, :]] = 0.0
    b = spins * model.biases[node_of]
    return clock_lo, node_of, value_of, idx_weight, U, b


def _clock_matrix_potts(model: PottsModel):
    sizes = model.sizes
    clock_lo = np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)
    K = int(clock_lo[-1])
    node_of = np.repeat(np.arange(model.n, dtype=np.int64), sizes)
    value_of = np.concatenate([np.arange(q, dtype=np.int64) for q in sizes])
    radix = potts_radices(sizes)
    idx_weight = value_of * radix[node_of]
    U = np.zeros((K, K))
    for (i, j), w in model.weights.items():
        bi, bj = clock_lo[i], clock_lo[j]
        U[bi:bi + sizes[i], bj:bj + sizes[j]] = w
        U[bj:bj + sizes[j], bi:bi + sizes[i]] = w.T
    b = np.concatenate(model.biases)
    return clock_lo, node_of, value_of, idx_weight, U, b


def clock_matrix(model):
    """(clock_lo, node_of, value_of, idx_weight, U, b) for either model family."""
    if isinstance(model, IsingModel):
        return _clock_matrix_ising(model)
    return _clock_matrix_potts(model)


def compile_network(model, rate_functions) -> CompiledNetwork:
    """Flatten a model plus per-clock rate functions into kernel arrays."""
    is_ising = isinstance(model, IsingModel)
    clock_lo, node_of, value_of, idx_weight, U, b = clock_matrix(model)
    K = b.shape[0]
    if len(rate_functions) != K:
        raise ValueError(f"need {K} rate functions (one per clock), got {len(rate_functions)}")
    if model.state_count > (1 << 62):
        raise ValueError("state space too large for canonical indexing")

    kind = np.array([KIND_CODE[f.kind] for f in rate_functions], dtype=np.int64)
    r0 = np.array([f.r0 for f in rate_functions])
    T = np.array([f.T for f in rate_functions])
    offset = np.array([f.offset for f in rate_functions])
    tab_ptr = np.zeros(K + 1, dtype=np.int64)
    tus, tlrs = [], []
    for k, f in enumerate(rate_functions):
        if f.kind == "tabulated":
            tu, tr = f.table_arrays()
            tus.append(tu)
            tlrs.append(np.log(tr))
        tab_ptr[k + 1] = tab_ptr[k] + (len(f.table) if f.kind == "tabulated" else 0)
    tab_u = np.concatenate(tus) if tus else np.empty(0)
    tab_logr = np.concatenate(tlrs) if tlrs else np.empty(0)

    # CSR over the node coupling graph: when node j changes value, the rates
    # of exactly these nodes must be refreshed (couplings are symmetric)
    n = model.n
    coupled = np.zeros((n, n), dtype=bool)
    for i in range(n):
        rows = slice(clock_lo[i], clock_lo[i + 1])
        for j in range(n):
            if i != j:
                cols = slice(clock_lo[j], clock_lo[j + 1])
                coupled[i, j] = bool(np.any(U[rows, cols] != 0.0))
    nbr_ptr = np.zeros(n + 1, dtype=np.int64)
    nbr_list = []
    for j in range(n):
        who = np.flatnonzero(coupled[:, j])
        nbr_list.append(who.astype(np.int64))
        nbr_ptr[j + 1] = nbr_ptr[j] + who.shape[0]
    nbr_idx = np.concatenate(nbr_list) if nbr_list else np.empty(0, dtype=np.int64)

    return CompiledNetwork(n=model.n, K=K, clock_lo=clock_lo, node_of=node_of,
                           value_of=value_of, idx_weight=idx_weight, U=U, b=b,
                           kind=kind, r0=r0, T=T, offset=offset, tab_ptr=tab_ptr,
                           tab_u=tab_u, tab_logr=tab_logr,
                           nbr_ptr=nbr_ptr, nbr_idx=nbr_idx,
                           state_count=int(model.state_count), is_ising=is_ising)


def draw_initial_values(model, rng) -> np.ndarray:
    """Uniform random spin/label vector; the first thing a run draws."""
    if isinstance(model, IsingModel):
        return (2 * rng.integers(0, 2, size=model.n) - 1).astype(np.int64)
    return rng.integers(0, model.sizes).astype(np.int64)


def state_index_of_values(cn: CompiledNetwork, values) -> int:
    # a state's index is the sum of its hot clocks' index weights
    return int(cn.idx_weight[cn.hot_from_values(values)].sum())


# ---------------------------------------------------------------------------
# scalar rate evaluation (python mirror of the kernel's; keep in sync)

def clock_rate_scalar(kc, r0k, Tk, offk, E, tab_u, tab_logr, lo, hi):
    u = (E - offk) / Tk
    if kc == 0:
        a = -u
        if a > EXP_ARG_MAX:
            a = EXP_ARG_MAX
        r = r0k * math.exp(a)
    elif kc == 1:
        r = r0k * math.erfc(u)
    else:
        r = math.exp(_interp_scalar(u, tab_u, tab_logr, lo, hi))
    if r > RATE_MAX:
        r = RATE_MAX
    return r


def _interp_scalar(x, xs, ys, lo, hi):
    if x <= xs[lo]:
        return ys[lo]
    if x >= xs[hi - 1]:
        return ys[hi - 1]
    a, c = lo, hi - 1
    while c - a > 1:
        m = (a + c) >> 1
        if xs[m] <= x:
            a = m
        else:
            c = m
    t = (x - xs[a]) / (xs[a + 1] - xs[a])
    return ys[a] + t * (ys[a + 1] - ys[a])


# numba versions, textually identical math so streams match the python path

@njit(cache=True, nogil=True, inline="always")
def _interp_nb(x, xs, ys, lo, hi):
    if x <= xs[lo]:
        return ys[lo]
    if x >= xs[hi - 1]:
        return ys[hi - 1]
    a, c = lo, hi - 1
    while c - a > 1:
        m = (a + c) >> 1
        if xs[m] <= x:
            a = m
        else:
            c = m
    t = (x - xs[a]) / (xs[a + 1] - xs[a])
    return ys[a] + t * (ys[a + 1] - ys[a])


@njit(cache=True, nogil=True, inline="always")
def _rate_nb(kc, r0k, Tk, offk, E, tab_u, tab_logr, lo, hi):
    u = (E - offk) / Tk
    if kc == 0:
        a = -u
        if a > 700.0:
            a = 700.0
        r = r0k * math.exp(a)
    elif kc == 1:
        r = r0k * math.erfc(u)
    else:
        r = math.exp(_interp_nb(u, tab_u, tab_logr, lo, hi))
    if r > 1e300:
        r = 1e300
    return r


@njit(cache=True, nogil=True, inline="always")
def _recompute_clock(k, n, U, b, hot, kind, r0, T, offset, Tsched,
                     tab_ptr, tab_u, tab_logr, evec, rates):
    s = b[k]
    for j in range(n):
        s += U[k, hot[j]]
    E = -s
    evec[k] = E
    Tk = T[k] if Tsched <= 0.0 else Tsched
    rates[k] = _rate_nb(kind[k], r0[k], Tk, offset[k], E,
                        tab_u, tab_logr, tab_ptr[k], tab_ptr[k + 1])


@njit(cache=True, nogil=True)
def ctmc_kernel(U, b, node_of, clock_lo, idx_weight, value_of,
                kind, r0, T, offset, tab_ptr, tab_u, tab_logr,
                nbr_ptr, nbr_idx,
                sched_t, sched_T,
                blackout, period, max_events, max_time,
                use_cache,
                hot, uniforms,
                rates, evec,
                dwell_mass, visit_mass, clock_counts,
                ev_t, ev_node, ev_val, ev_rtot,
                samp_idx, dwell_idx, dwell_w,
                carry_f, carry_i):
    """Advance the chain until a stop condition, buffer exhaustion, or the
    uniform chunk runs out.  All cross-call state lives in carry_f/carry_i."""
    n = hot.shape[0]
    K = b.shape[0]
    nu = uniforms.shape[0]
    have_sched = sched_t.shape[0] > 0
    rec_ev = ev_t.shape[0] > 0
    rec_dw = dwell_idx.shape[0] > 0
    acc_dwell = dwell_mass.shape[0] > 0
    acc_visit = visit_mass.shape[0] > 0
    acc_clk = clock_counts.shape[0] > 0
    emit_clk = samp_idx.shape[0] > 0

    while True:
        if max_events >= 0 and carry_i[CI_NEVENTS] >= max_events:
            carry_i[CI_STOP] = STOP_EVENTS
            return
        if carry_i[CI_UPOS] + 2 > nu:
            return
        if rec_ev and carry_i[CI_EVBUF] >= ev_t.shape[0]:
            return
        if rec_dw and carry_i[CI_DWBUF] >= dwell_idx.shape[0]:
            return

        t = carry_f[CF_T]
        Tsched = 0.0
        if have_sched:
            Tsched = _interp_nb(t, sched_t, sched_T, 0, sched_t.shape[0])

        pending = carry_i[CI_PENDING]
        if have_sched or carry_i[CI_VALID] == 0 or pending == PENDING_ALL:
            for k in range(K):
                _recompute_clock(k, n, U, b, hot, kind, r0, T, offset, Tsched,
                                 tab_ptr, tab_u, tab_logr, evec, rates)
        elif pending >= 0:
            if use_cache != 0:
                for p in range(nbr_ptr[pending], nbr_ptr[pending + 1]):
                    i = nbr_idx[p]
                    for k in range(clock_lo[i], clock_lo[i + 1]):
                        _recompute_clock(k, n, U, b, hot, kind, r0, T, offset,
                                         Tsched, tab_ptr, tab_u, tab_logr, evec, rates)
            else:
                for k in range(K):
                    _recompute_clock(k, n, U, b, hot, kind, r0, T, offset, Tsched,
                                     tab_ptr, tab_u, tab_logr, evec, rates)
        carry_i[CI_VALID] = 1
        carry_i[CI_PENDING] = PENDING_NONE

        rtot = 0.0
        for k in range(K):
            rtot += rates[k]
        if rtot <= 0.0:
            carry_i[CI_STOP] = STOP_ZERO_RATE
            return

        u1 = uniforms[carry_i[CI_UPOS]]
        u2 = uniforms[carry_i[CI_UPOS] + 1]
        carry_i[CI_UPOS] += 2

        dwell = -math.log1p(-u1) / rtot
        t_new = t + blackout + dwell
        cur = carry_i[CI_CUR_IDX]

        if max_time >= 0.0 and t_new > max_time:
            # state holds to the horizon: live tail into the mass, samples out
            tail = max_time - t - blackout
            if tail < 0.0:
                tail = 0.0
            if acc_dwell:
                dwell_mass[cur] += tail
            carry_f[CF_PEND] += tail
            if period > 0.0 and (emit_clk or acc_clk):
                next_t = period * (carry_i[CI_NSAMPLES] + 1)
                while next_t <= max_time:
                    if emit_clk:
                        samp_idx[carry_i[CI_NSAMPLES]] = cur
                    if acc_clk:
                        clock_counts[cur] += 1
                    carry_i[CI_NSAMPLES] += 1
                    next_t = period * (carry_i[CI_NSAMPLES] + 1)
            carry_f[CF_T] = max_time
            carry_i[CI_STOP] = STOP_TIME
            return

        if acc_dwell:
            dwell_mass[cur] += dwell
        if acc_visit:
            visit_mass[cur] += 1.0 / rtot
        carry_f[CF_PEND] += dwell
        if period > 0.0 and (emit_clk or acc_clk):
            next_t = period * (carry_i[CI_NSAMPLES] + 1)
            while next_t < t_new:
                if emit_clk:
                    samp_idx[carry_i[CI_NSAMPLES]] = cur
                if acc_clk:
                    clock_counts[cur] += 1
                carry_i[CI_NSAMPLES] += 1
                next_t = period * (carry_i[CI_NSAMPLES] + 1)

        # select the firing clock
        target = u2 * rtot
        acc = 0.0
        sel = -1
        for k in range(K):
            acc += rates[k]
            if target < acc:
                sel = k
                break
        if sel < 0:  # fp fall-through: take the last live clock
            for k in range(K - 1, -1, -1):
                if rates[k] > 0.0:
                    sel = k
                    break

        node = node_of[sel]
        old = hot[node]
        if old != sel:
            # the visit that just ended owns everything accumulated so far;
            # self-transitions extend a visit instead of closing one
            if rec_dw:
                p = carry_i[CI_DWBUF]
                dwell_idx[p] = cur
                dwell_w[p] = carry_f[CF_PEND]
                carry_i[CI_DWBUF] += 1
            carry_f[CF_PEND] = 0.0
            carry_i[CI_NFLIPS] += 1
            hot[node] = sel
            carry_i[CI_CUR_IDX] += idx_weight[sel] - idx_weight[old]
            carry_f[CF_ENERGY] += evec[sel] - evec[old]
            carry_i[CI_PENDING] = node
            if carry_f[CF_ENERGY] < carry_f[CF_BEST]:
                carry_f[CF_BEST] = carry_f[CF_ENERGY]
                carry_i[CI_BEST_IDX] = carry_i[CI_CUR_IDX]
        if rec_ev:
            p = carry_i[CI_EVBUF]
            ev_t[p] = t_new
            ev_node[p] = node
            ev_val[p] = value_of[sel]
            ev_rtot[p] = rtot
            carry_i[CI_EVBUF] += 1
        carry_f[CF_T] = t_new
        carry_i[CI_NEVENTS] += 1


@njit(cache=True, nogil=True)
def gibbs_kernel(U, b, clock_lo, idx_weight, T, hot, uniforms, scratch,
                 out_idx, start, count):
    """Sequential-scan heat-bath sweeps; one uniform per node update.

    Records the canonical state index after each full sweep.  Two-value
    nodes use the tanh form of the flip probability, an algebraically
    equivalent shortcut for the two-term conditional Boltzmann draw.
    """
    n = hot.shape[0]
    up = 0
    for s in range(count):
        for i in range(n):
            lo, hi = clock_lo[i], clock_lo[i + 1]
            u = uniforms[up]
            up += 1
            if hi - lo == 2:
                e0 = b[lo]
                e1 = b[lo + 1]
                for j in range(n):
                    e0 += U[lo, hot[j]]
                    e1 += U[lo + 1, hot[j]]
                # conditional energies are -e0 and -e1
                p0 = 0.5 * (1.0 + math.tanh((e0 - e1) / (2.0 * T)))
                sel = lo if u < p0 else lo + 1
            else:
                m = -1e308
                for k in range(lo, hi):
                    s_k = b[k]
                    for j in range(n):
                        s_k += U[k, hot[j]]
                    scratch[k - lo] = s_k / T  # log-weight -E/T, since E = -s_k
                    if scratch[k - lo] > m:
                        m = scratch[k - lo]
                tot = 0.0
                for k in range(lo, hi):
                    tot += math.exp(scratch[k - lo] - m)
                target = u * tot
                acc = 0.0
                sel = hi - 1
                for k in range(lo, hi):
                    acc += math.exp(scratch[k - lo] - m)
                    if target < acc:
                        sel = k
                        break
            hot[i] = sel
        idx = 0
        for i in range(n):
            idx += idx_weight[hot[i]]
        out_idx[start + s] = idx
