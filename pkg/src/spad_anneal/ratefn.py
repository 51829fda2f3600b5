"""Clock rate as a function of the energy a state change would land in.

Every clock maps an energy E to an event rate through a monotone
non-increasing curve evaluated at the scaled argument u = (E - offset) / T:

    exponential   r0 * exp(-u)
    erfc          r0 * erfc(u)            (erfc(0) = 1, so r0 is the rate at E = offset)
    tabulated     interpolated from measured (energy, rate) samples, clamped
                  at the table ends; the table is recorded on the u axis

offset is the per-circuit calibration bias; T sets the slope of log-rate
against energy and doubles as the sampling temperature.  For the erfc kind T
is the transition width rather than a thermodynamic temperature, but it
scales the curve the same way.  Tabulated curves take their absolute rate
from the table itself, so r0 is ignored there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfc as _erfc

RATE_KINDS = ("exponential", "erfc", "tabulated")

# exp() argument clamp; rates beyond this range are unobservable and the
# clamp keeps extreme schedules from overflowing the total-rate accumulator
EXP_ARG_MAX = 700.0
# absolute rate ceiling, mirrored by the sampler kernel so both paths
# evaluate the identical curve even at degenerate arguments
RATE_MAX = 1e300


@dataclass(frozen=True)
class RateFunction:
    kind: str = "exponential"
    r0: float = 1.0
    T: float = 1.0
    offset: float = 0.0
    table: tuple = ()  # ((energy, rate), ...) for the tabulated kind

    def __post_init__(self):
        if self.kind not in RATE_KINDS:
            raise ValueError(f"unknown rate kind {self.kind!r}")
        if not (self.r0 > 0 and math.isfinite(self.r0)):
            raise ValueError("r0 must be positive and finite")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError("T must be positive and finite")
        if not math.isfinite(self.offset):
            raise ValueError("offset must be finite")
        if self.kind == "tabulated":
            tab = np.asarray(self.table, dtype=np.float64)
            if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 2:
                raise ValueError("tabulated kind needs >= 2 (energy, rate) rows")
            if np.any(np.diff(tab[:, 0]) <= 0):
                raise ValueError("table energies must be strictly increasing")
            if np.any(tab[:, 1] <= 0):
                raise ValueError("table rates must be strictly positive")
            if np.any(np.diff(tab[:, 1]) > 0):
                raise ValueError("table rates must be non-increasing in energy")
            object.__setattr__(self, "table", tuple(map(tuple, tab)))
        elif self.table:
            raise ValueError(f"{self.kind} kind takes no table")

    def table_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        tab = np.asarray(self.table, dtype=np.float64)
        return tab[:, 0], tab[:, 1]


def rate(f: RateFunction, energy):
    """Event rate at the given energy; vectorizes over ``energy``."""
    e = np.asarray(energy, dtype=np.float64)
    u = (e - f.offset) / f.T
    if f.kind == "exponential":
        with np.errstate(over="ignore"):
            out = f.r0 * np.exp(np.minimum(-u, EXP_ARG_MAX))
    elif f.kind == "erfc":
        out = f.r0 * _erfc(u)
    else:
        tu, tr = f.table_arrays()
        # interpolate log-rate: positive by construction, monotone between knots
        out = np.exp(np.interp(u, tu, np.log(tr)))
    out = np.minimum(out, RATE_MAX)
    return out if out.ndim else float(out)


def with_temperature(f: RateFunction, T_new: float) -> RateFunction:
    """Copy with the temperature (or erfc width) replaced; r0 and offset kept."""
    return replace(f, T=float(T_new))


def calibrate(fs, target_rate: float, rel_tol: float = 1e-9) -> list[RateFunction]:
    """Set each circuit's offset so its rate at zero energy equals target_rate.

    Exponential circuits solve in closed form; the other kinds bisect on the
    offset until the achieved rate is within rel_tol of the target.  Raises
    if a circuit cannot reach the target at all.
    """
    if not (target_rate > 0 and math.isfinite(target_rate)):
        raise ValueError("target_rate must be positive and finite")
    out = []
    for f in fs:
        if f.kind == "exponential":
            out.append(replace(f, offset=f.T * math.log(target_rate / f.r0)))
            continue
        if f.kind == "erfc":
            if target_rate >= 2.0 * f.r0:
                raise ValueError(f"target {target_rate} unreachable: erfc rate < {2 * f.r0}")
            lo, hi = -f.T, f.T
            while rate(replace(f, offset=lo), 0.0) > target_rate:
                lo *= 2.0
            while rate(replace(f, offset=hi), 0.0) < target_rate:
                hi *= 2.0
        else:
            tu, tr = f.table_arrays()
            if not (tr[-1] <= target_rate <= tr[0]):
                raise ValueError(f"target {target_rate} outside table range [{tr[-1]}, {tr[0]}]")
            # rate(0) = table(-offset / T), so offset spans the mirrored table
            lo, hi = -f.T * tu[-1], -f.T * tu[0]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            r = rate(replace(f, offset=mid), 0.0)
            if abs(r - target_rate) <= rel_tol * target_rate:
                break
            if r < target_rate:
                lo = mid
            else:
                hi = mid
        else:
            raise RuntimeError("calibration bisection failed to converge")
        out.append(replace(f, offset=mid))
    return out


# ---------------------------------------------------------------------------
# JSON wire format

def ratefn_to_dict(f: RateFunction) -> dict:
    d = {"kind": f.kind, "r0": f.r0, "T": f.T, "offset": f.offset}
    if f.kind == "tabulated":
        d["table"] = [list(row) for row in f.table]
    return d


def ratefn_from_dict(d: dict) -> RateFunction:
    return RateFunction(kind=d.get("kind", "exponential"),
                        r0=float(d.get("r0", 1.0)),
                        T=float(d.get("T", 1.0)),
                        offset=float(d.get("offset", 0.0)),
                        table=tuple(map(tuple, d.get("table", ()))))
