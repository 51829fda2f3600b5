"""Command-line front end: model generation, sampling, validation, reports.

Every command writes its outputs into --out (created if missing) together
with a manifest.json recording the exact argv, the resolved seed, and the
tool version; re-running the manifest's command reproduces the outputs byte
for byte.  Exit codes: 0 success, 2 bad flags or configuration, 3 failures
while running (degenerate models, corrupt data files, I/O).

Floats in CSV output carry 17 significant digits so values round-trip.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ctmc import (LatchSpec, SimConfig, anneal, ising_network,
                   ising_transfer_sweep, potts_network, run,
                   sample_mode_from_string)
from .mapping import index_permutation, ising_to_potts
from .model import IsingModel, model_from_dict, random_model, save_model
from .pulsesim import (PulseConfig, count_crossings, generate_trace,
                       interval_statistics, transfer_function)
from .ratefn import RateFunction, ratefn_from_dict, with_temperature
from .reference import (Distribution, all_energies, exact_boltzmann,
                        gibbs_run, save_distribution)
from .stats import (EmpiricalDistribution, fit_rate, fit_tanh, kl_convergence,
                    kl_divergence, statistical_floor)

MANIFEST_SCHEMA = 1
SEED_ENV = "SPAD_ANNEAL_SEED"


class ConfigError(Exception):
    """Bad flags or configuration files; maps to exit code 2."""


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}")
    return 0


def _load_json(path, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"{what} file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{what} file {path} is not valid JSON: {e}")


def _load_model_cfg(path):
    try:
        return model_from_dict(_load_json(path, "model"))
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"bad model file {path}: {e}")


def _load_schedule(path) -> tuple:
    obj = _load_json(path, "schedule")
    try:
        pts = tuple((float(t), float(T)) for t, T in obj["points"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f'schedule file {path} needs {{"points": [[t, T], ...]}}')
    if not pts:
        raise ConfigError("schedule needs at least one point")
    return pts


def _rate_function(args) -> RateFunction:
    if getattr(args, "rate_function", None):
        try:
            f = ratefn_from_dict(_load_json(args.rate_function, "rate function"))
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigError(f"bad rate function file: {e}")
        if args.temperature is not None:
            f = with_temperature(f, args.temperature)
        return f
    if args.temperature is None:
        raise ConfigError("need --temperature (or --rate-function)")
    return RateFunction(kind="exponential", r0=1.0, T=args.temperature)


def _build_network(model, f: RateFunction):
    if isinstance(model, IsingModel):
        return ising_network(model, f)
    return potts_network(model, f)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, argv: list[str], seed, outputs: list[str]) -> None:
    command = ["spad-anneal"] + list(argv)
    if seed is not None and "--seed" not in argv:
        command += ["--seed", str(seed)]
    doc = {"schema": MANIFEST_SCHEMA, "tool": "spad-anneal",
           "version": __version__, "command": command,
           "seed": seed, "outputs": sorted(outputs)}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")


def _emit(args, summary: dict) -> None:
    if args.json:
        sys.stdout.write(json.dumps(summary) + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_gen_model(args, argv) -> int:
    seed = _resolve_seed(args)
    lo, hi = args.range
    if lo > hi:
        raise ConfigError("--range LO HI needs LO <= HI")
    model = random_model(args.n, (lo, hi), seed)
    out = _out_dir(args)
    save_model(model, out / "model.json")
    _write_manifest(out, argv, seed, ["model.json"])
    _emit(args, {"model": str(out / "model.json"), "n": model.n, "seed": seed})
    return 0


def cmd_map(args, argv) -> int:
    model = _load_model_cfg(args.model)
    if not isinstance(model, IsingModel):
        raise ConfigError("map needs an Ising model file")
    try:
        potts = ising_to_potts(model)
    except ValueError as e:
        raise ConfigError(str(e))
    checked = False
    if args.check:
        if model.state_count > (1 << 20):
            raise ConfigError("--check needs <= 2^20 states")
        ei = all_energies(model)
        ep = all_energies(potts)[index_permutation(model.n)]
        if not np.array_equal(ei, ep):
            sys.stderr.write("energy equivalence check FAILED\n")
            return 3
        checked = True
    out = _out_dir(args)
    save_model(potts, out / "potts_model.json")
    _write_manifest(out, argv, None, ["potts_model.json"])
    _emit(args, {"model": str(out / "potts_model.json"), "nodes": potts.n,
                 "checked": checked})
    return 0


def _stop_config(args, period) -> dict:
    if (args.samples is None) == (args.duration is None):
        raise ConfigError("set exactly one of --samples / --duration")
    if args.duration is not None:
        return {"max_time": args.duration}
    if period is not None:
        return {"max_time": args.samples * period}
    return {"max_events": args.samples}


def cmd_sample(args, argv) -> int:
    seed = _resolve_seed(args)
    model = _load_model_cfg(args.model)
    out = _out_dir(args)
    outputs = ["samples.csv", "run.json"]

    if args.engine == "gibbs":
        if args.temperature is None:
            raise ConfigError("gibbs sampling needs --temperature")
        if args.samples is None:
            raise ConfigError("gibbs sampling needs --samples (sweeps)")
        idx = gibbs_run(model, args.temperature, args.samples, seed)
        with open(out / "samples.csv", "w") as fh:
            fh.write("sweep,index\n")
            for s, i in enumerate(idx):
                fh.write(f"{s},{i}\n")
        mass = np.bincount(idx, minlength=model.state_count).astype(np.float64)
        info = {"engine": "gibbs", "n_samples": int(idx.shape[0]), "seed": seed}
    else:
        try:
            mode, period = sample_mode_from_string(args.sample_mode)
        except ValueError as e:
            raise ConfigError(str(e))
        f = _rate_function(args)
        net = _build_network(model, f)
        latch = None
        if args.latch_delay is not None:
            latch = LatchSpec(stage_delay=args.latch_delay, q=args.latch_q)
        sched = _load_schedule(args.schedule) if args.schedule else None
        try:
            cfg = SimConfig(seed=seed, blackout=args.blackout,
                            sample_mode=mode, sample_period=period,
                            schedule=sched, latch=latch,
                            record_events=args.events,
                            **_stop_config(args, period))
        except ValueError as e:
            raise ConfigError(str(e))
        res = run(net, cfg)
        samples = res.samples
        with open(out / "samples.csv", "w") as fh:
            if samples.mode == "dwell":
                fh.write("index,dwell\n")
                for i, w in zip(samples.indices, samples.weights):
                    fh.write(f"{i},{_fmt(w)}\n")
            else:
                fh.write("time,index\n")
                for k, i in enumerate(samples.indices):
                    fh.write(f"{_fmt((k + 1) * samples.period)},{i}\n")
        if args.events:
            outputs.append("events.csv")
            with open(out / "events.csv", "w") as fh:
                fh.write("time,node,value\n")
                ev = res.events
                for t, nd, v in zip(ev.time, ev.node, ev.value):
                    fh.write(f"{_fmt(t)},{nd},{v}\n")
        mass = res.dwell_mass if samples.mode == "dwell" else res.clocked_counts
        info = {"engine": "ctmc", "seed": seed,
                "n_events": res.n_events, "n_samples": res.n_samples,
                "final_time": res.final_time, "stop_reason": res.stop_reason,
                "best_index": res.best_index, "best_energy": res.best_energy}
        if res.latch_invalid is not None:
            info["latch_invalid"] = res.latch_invalid

    if mass is not None and mass.sum() > 0 and args.temperature is not None:
        outputs.append("empirical.json")
        emp = Distribution(probs=mass / mass.sum(), T=args.temperature)
        save_distribution(emp, out / "empirical.json")
    (out / "run.json").write_text(json.dumps(info, indent=2) + "\n")
    _write_manifest(out, argv, seed, outputs)
    _emit(args, info)
    return 0


def _read_samples_csv(path, n_states: int):
    """Samples CSV -> (EmpiricalDistribution, indices, weights or None).

    Raises RuntimeError on corrupt data, which main() maps to exit code 3.
    """
    try:
        with open(path) as fh:
            header = fh.readline().strip()
            cols = header.split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as e:
        raise RuntimeError(f"cannot read samples file {path}: {e}")
    except ValueError as e:
        raise RuntimeError(f"corrupt samples file {path}: {e}")
    if data.shape[0] == 0 or data.shape[1] != 2:
        raise RuntimeError(f"samples file {path} has no usable rows")
    if cols == ["index", "dwell"]:
        idx, w = data[:, 0], data[:, 1]
    elif cols == ["time", "index"] or cols == ["sweep", "index"]:
        idx, w = data[:, 1], None
    else:
        raise RuntimeError(f"unrecognized samples header {header!r}")
    ii = idx.astype(np.int64)
    if np.any(ii != idx) or ii.min() < 0 or ii.max() >= n_states:
        raise RuntimeError("sample indices out of range for the model")
    try:
        return EmpiricalDistribution.from_samples(ii, n_states, weights=w), ii, w
    except ValueError as e:
        raise RuntimeError(f"unusable samples: {e}")


def cmd_validate(args, argv) -> int:
    model = _load_model_cfg(args.model)
    if args.temperature is None:
        raise ConfigError("validate needs --temperature")
    if model.state_count > (1 << 20):
        raise ConfigError("validate needs <= 2^20 states for enumeration")
    emp, idx, w = _read_samples_csv(args.samples, model.state_count)
    exact = exact_boltzmann(model, args.temperature)
    kl = kl_divergence(emp.mass, exact.probs)
    floor = statistical_floor(model.state_count, len(idx))
    ns, kls = kl_convergence(idx, exact.probs,
                             n_batches=min(args.batches, len(idx)), weights=w)
    out = _out_dir(args)
    with open(out / "states.csv", "w") as fh:
        fh.write("index,energy,exact_prob,empirical_prob\n")
        p_emp = emp.probs
        for i in range(model.state_count):
            fh.write(f"{i},{_fmt(exact.energies[i])},{_fmt(exact.probs[i])},"
                     f"{_fmt(p_emp[i])}\n")
    with open(out / "kl_curve.csv", "w") as fh:
        fh.write("samples,kl\n")
        for n, k in zip(ns, kls):
            fh.write(f"{n},{_fmt(k)}\n")
    report = {"kl": kl, "floor": floor, "n_samples": int(len(idx)),
              "n_states": int(model.state_count), "T": args.temperature}
    (out / "validation.json").write_text(json.dumps(report, indent=2) + "\n")
    _write_manifest(out, argv, None,
                    ["states.csv", "kl_curve.csv", "validation.json"])
    _emit(args, report)
    return 0


def cmd_transfer(args, argv) -> int:
    seed = _resolve_seed(args)
    out = _out_dir(args)
    if args.mode == "pulse":
        try:
            cfg = PulseConfig(photon_rate=args.photon_rate,
                              filter_tau=args.filter_tau,
                              dt=args.dt if args.dt else args.filter_tau / 20.0,
                              duration=args.duration or 0.0,
                              amplitude=args.amplitude,
                              refilter_tau=args.refilter_tau)
        except ValueError as e:
            raise ConfigError(str(e))
        lo, hi, cnt = args.thresholds
        thresholds = np.linspace(lo, hi, int(cnt))
        curve = transfer_function(cfg, thresholds, seed)
        with open(out / "transfer.csv", "w") as fh:
            fh.write("threshold,count,rate,relative_error\n")
            for th, c, r, e in zip(curve.thresholds, curve.counts,
                                   curve.rates, curve.relative_error):
                fh.write(f"{_fmt(th)},{c},{_fmt(r)},{_fmt(e)}\n")
        keep = curve.counts >= args.min_count
        fits = {"trace_mean": curve.trace_mean, "trace_var": curve.trace_var,
                "duration": curve.duration, "n_thresholds": int(len(thresholds))}
        if keep.sum() >= 3:
            fe = fit_rate(curve.thresholds[keep], curve.rates[keep], "exponential")
            fc = fit_rate(curve.thresholds[keep], curve.rates[keep], "erfc")
            fits["exponential"] = {"r0": fe.r0, "T": fe.temperature,
                                   "residual": fe.residual,
                                   "r_squared": fe.r_squared}
            fits["erfc"] = {"r0": fc.r0, "T": fc.temperature,
                            "offset": fc.offset, "residual": fc.residual,
                            "r_squared": fc.r_squared}
            fits["better"] = ("erfc" if fc.residual < fe.residual
                              else "exponential")
        mid = thresholds[len(thresholds) // 2]
        trace = generate_trace(cfg, seed)
        times, _ = count_crossings(trace, mid, refilter_tau=cfg.refilter_tau)
        if times.shape[0] >= 100:
            st = interval_statistics(times)
            fits["intervals"] = {"threshold": float(mid), "rate": st.rate,
                                 "ks_statistic": st.ks_statistic,
                                 "ks_pvalue": st.ks_pvalue,
                                 "n_events": st.n_events}
        (out / "transfer_fits.json").write_text(json.dumps(fits, indent=2) + "\n")
        _write_manifest(out, argv, seed, ["transfer.csv", "transfer_fits.json"])
        _emit(args, fits)
        return 0

    # neuron mode: bias sweep of a decoupled spin
    model = _load_model_cfg(args.model)
    if not isinstance(model, IsingModel):
        raise ConfigError("neuron transfer needs an Ising model")
    f = _rate_function(args)
    net = _build_network(model, f)
    lo, hi = args.bias_range
    biases = np.arange(lo, hi + 1, args.bias_step, dtype=np.float64)
    try:
        sweep = ising_transfer_sweep(net, args.neuron, biases,
                                     args.samples or 100000, seed=seed,
                                     jobs=args.jobs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e))
    fit = fit_tanh(sweep.biases, sweep.p_plus, t0=f.T)
    with open(out / "transfer.csv", "w") as fh:
        fh.write("bias,p_plus\n")
        for b, p in zip(sweep.biases, sweep.p_plus):
            fh.write(f"{_fmt(b)},{_fmt(p)}\n")
    report = {"T_fit": fit.temperature, "offset": fit.offset,
              "residual": fit.residual, "T_configured": f.T,
              "samples_per_point": sweep.samples_per_point}
    (out / "transfer_fits.json").write_text(json.dumps(report, indent=2) + "\n")
    _write_manifest(out, argv, seed, ["transfer.csv", "transfer_fits.json"])
    _emit(args, report)
    return 0


def cmd_anneal(args, argv) -> int:
    seed = _resolve_seed(args)
    model = _load_model_cfg(args.model)
    sched = _load_schedule(args.schedule)
    f = _rate_function(args) if (args.rate_function or args.temperature) else \
        RateFunction(kind="exponential", r0=1.0, T=sched[0][1])
    net = _build_network(model, f)
    try:
        mode, period = sample_mode_from_string(args.sample_mode)
        cfg = SimConfig(seed=seed, blackout=args.blackout, schedule=sched,
                        sample_mode=mode, sample_period=period,
                        record_events=False,
                        **_stop_config(args, period))
    except ValueError as e:
        raise ConfigError(str(e))
    res = anneal(net, cfg)
    out = _out_dir(args)
    stride = max(1, len(res.times) // max(args.trace_points, 1))
    with open(out / "anneal.csv", "w") as fh:
        fh.write("time,energy,running_avg\n")
        for k in range(0, len(res.times), stride):
            fh.write(f"{_fmt(res.times[k])},{_fmt(res.energies[k])},"
                     f"{_fmt(res.running_avg[k])}\n")
    best_values = (res.best_state.spins if isinstance(model, IsingModel)
                   else res.best_state.labels)
    report = {"best_index": res.run.best_index,
              "best_energy": res.run.best_energy,
              "best_state": [int(v) for v in best_values],
              "final_avg_energy": float(res.running_avg[-1]),
              "n_events": res.run.n_events, "seed": seed}
    (out / "anneal.json").write_text(json.dumps(report, indent=2) + "\n")
    _write_manifest(out, argv, seed, ["anneal.csv", "anneal.json"])
    _emit(args, report)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing

def _add_common(p, seeded=True):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--json", action="store_true",
                   help="print the summary as JSON on stdout")
    if seeded:
        p.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed (falls back to ${SEED_ENV}, then 0)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="spad-anneal",
        description="Event-driven Ising/Potts sampler with exact oracles")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-model", help="draw a random integer Ising model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--range", type=int, nargs=2, default=(-8, 8),
                   metavar=("LO", "HI"))
    _add_common(p)
    p.set_defaults(func=cmd_gen_model)

    p = sub.add_parser("map", help="convert an Ising model to a q=4 Potts model")
    p.add_argument("--model", required=True)
    p.add_argument("--check", action="store_true",
                   help="verify energy equivalence over all states")
    _add_common(p, seeded=False)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("sample", help="draw samples with the event-driven or Gibbs engine")
    p.add_argument("--model", required=True)
    p.add_argument("--engine", choices=("ctmc", "gibbs"), default="ctmc")
    p.add_argument("--samples", type=int, default=None,
                   help="events (dwell), ticks (clocked), or sweeps (gibbs)")
    p.add_argument("--duration", type=float, default=None,
                   help="simulated seconds (alternative to --samples)")
    p.add_argument("--sample-mode", default="dwell",
                   help="dwell | clocked:<period>")
    p.add_argument("--blackout", type=float, default=0.0)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--rate-function", default=None,
                   help="JSON rate-function file (default: exponential r0=1)")
    p.add_argument("--schedule", default=None, help="temperature schedule file")
    p.add_argument("--latch-delay", type=float, default=None)
    p.add_argument("--latch-q", type=int, default=2)
    p.add_argument("--events", action="store_true", help="also write events.csv")
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("validate", help="compare samples against exact enumeration")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True, help="samples.csv from `sample`")
    p.add_argument("--temperature", type=float, required=True)
    p.add_argument("--batches", type=int, default=50)
    _add_common(p, seeded=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("transfer", help="threshold-rate or bias-probability curves")
    p.add_argument("--mode", choices=("pulse", "neuron"), required=True)
    p.add_argument("--photon-rate", type=float, default=1e6)
    p.add_argument("--filter-tau", type=float, default=1e-6)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--refilter-tau", type=float, default=None)
    p.add_argument("--thresholds", type=float, nargs=3, default=(0.5, 4.0, 29),
                   metavar=("LO", "HI", "COUNT"))
    p.add_argument("--min-count", type=int, default=10,
                   help="events needed to use a threshold in fits")
    p.add_argument("--model", default=None)
    p.add_argument("--neuron", type=int, default=0)
    p.add_argument("--bias-range", type=int, nargs=2, default=(-75, 75),
                   metavar=("LO", "HI"))
    p.add_argument("--bias-step", type=int, default=1)
    p.add_argument("--samples", type=int, default=None, help="samples per point")
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--rate-function", default=None)
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("anneal", help="run a cooling schedule, track energies")
    p.add_argument("--model", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--sample-mode", default="dwell")
    p.add_argument("--blackout", type=float, default=0.0)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--rate-function", default=None)
    p.add_argument("--trace-points", type=int, default=10000,
                   help="max rows in anneal.csv")
    _add_common(p)
    p.set_defaults(func=cmd_anneal)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args, argv)
    except ConfigError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except (RuntimeError, ValueError, OSError) as e:
        sys.stderr.write(f"runtime error: {e}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
