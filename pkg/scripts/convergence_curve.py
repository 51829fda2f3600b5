#!/usr/bin/env python3
"""Convergence of sampled distributions toward exact Boltzmann weights.

Builds a random spin network, enumerates its exact equilibrium law, then
tracks the KL divergence of three estimators as samples accumulate:

  * dwell      -- event-driven run, visits weighted by live dwell time
  * clocked    -- event-driven run, strobed at a fixed period
  * heat-bath  -- discrete-time single-site Gibbs oracle

Each curve is written to a CSV alongside the per-checkpoint statistical
floor (K-1)/2N, and optionally plotted on log-log axes.

Usage:
    scripts/convergence_curve.py --nodes 8 --samples 1000000 --plot
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

import spad_anneal as sa


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=8, help="spins in the random model")
    p.add_argument("--weight-range", type=int, nargs=2, default=(-8, 8),
                   metavar=("LO", "HI"), help="integer coupling/bias range")
    p.add_argument("--temperature-divisor", type=float, default=6.0,
                   help="T = max|E| / divisor")
    p.add_argument("--samples", type=int, default=1_000_000,
                   help="target sample count per estimator")
    p.add_argument("--checkpoints", type=int, default=50,
                   help="cumulative KL checkpoints per curve")
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--run-seed", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("results"),
                   help="output directory for CSV / PNG")
    p.add_argument("--plot", action="store_true", help="also write a PNG")
    return p.parse_args()


def dwell_budget(net: sa.Network, samples: int, seed: int) -> int:
    """Events needed for `samples` dwell visits, with a 10%% cushion."""
    probe = sa.run(net, sa.SimConfig(seed=seed, max_events=200_000,
                                     record_events=False, record_samples=False))
    return int(samples / (probe.n_samples / probe.n_events) * 1.1)


def main() -> None:
    args = parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    model = sa.random_model(args.nodes, tuple(args.weight_range), seed=args.model_seed)
    energies = sa.all_energies(model)
    T = float(np.abs(energies).max()) / args.temperature_divisor
    exact = sa.exact_boltzmann(model, T)
    net = sa.ising_network(model, sa.RateFunction(kind="exponential", r0=1.0, T=T))
    n_states = 1 << args.nodes

    print(f"model: {args.nodes} spins, weights in {tuple(args.weight_range)}, "
          f"seed {args.model_seed}")
    print(f"T = {T:.4f} (max|E| = {np.abs(energies).max():.1f}), "
          f"{n_states} states, target {args.samples:,} samples/estimator")

    curves: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    # dwell-weighted event-driven estimator
    budget = dwell_budget(net, args.samples, args.run_seed + 999)
    res = sa.run(net, sa.SimConfig(seed=args.run_seed, max_events=budget,
                                   record_events=False))
    if res.n_samples < args.samples:
        raise SystemExit(f"dwell run produced only {res.n_samples:,} visits; "
                         f"raise --samples headroom")
    idx = res.samples.indices[:args.samples]
    w = res.samples.weights[:args.samples]
    curves["dwell"] = sa.kl_convergence(idx, exact.probs,
                                        n_batches=args.checkpoints, weights=w)

    # clocked estimator: strobe at ~3 mean event intervals
    period = 3.0 * res.final_time / res.n_events
    clk = sa.run(net, sa.SimConfig(seed=args.run_seed,
                                   max_time=args.samples * period,
                                   sample_mode="clocked", sample_period=period,
                                   record_events=False))
    curves["clocked"] = sa.kl_convergence(clk.samples.indices[:args.samples],
                                          exact.probs, n_batches=args.checkpoints)

    # discrete-time heat-bath oracle
    gidx = sa.gibbs_run(model, T, args.samples, seed=args.run_seed)
    curves["heat_bath"] = sa.kl_convergence(gidx, exact.probs,
                                            n_batches=args.checkpoints)

    csv_path = args.out / "convergence_curve.csv"
    with csv_path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["estimator", "n_samples", "kl", "floor"])
        for name, (counts, kls) in curves.items():
            floors = sa.statistical_floor(n_states, counts)
            for n, k, f in zip(counts, kls, floors):
                wr.writerow([name, int(n), f"{k:.8e}", f"{f:.8e}"])
    print(f"wrote {csv_path}")

    print(f"\n{'estimator':<12} {'final KL':>12} {'floor':>12} {'KL/floor':>9}")
    for name, (counts, kls) in curves.items():
        floor = sa.statistical_floor(n_states, counts[-1])
        print(f"{name:<12} {kls[-1]:>12.3e} {floor:>12.3e} {kls[-1] / floor:>9.2f}")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        for name, (counts, kls) in curves.items():
            ax.loglog(counts, kls, marker=".", label=name)
        counts = curves["dwell"][0]
        ax.loglog(counts, sa.statistical_floor(n_states, counts),
                  "k--", label="(K-1)/2N floor")
        ax.set_xlabel("samples")
        ax.set_ylabel("KL(empirical || exact)")
        ax.set_title(f"{args.nodes}-spin model, T = {T:.3g}")
        ax.legend()
        fig.tight_layout()
        png = args.out / "convergence_curve.png"
        fig.savefig(png, dpi=150)
        print(f"wrote {png}")


if __name__ == "__main__":
    main()
