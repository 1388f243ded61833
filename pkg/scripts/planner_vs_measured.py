#!/usr/bin/env python3
"""Planner shard count next to measured consensus energy for forced shard counts."""
import argparse

import numpy as np

from sbn.sharding import energy_model, optimal_shards, planner_params
from sbn.sim import ScenarioConfig, SimConfig, build_topology, measure_consensus_energy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = SimConfig(scenario=ScenarioConfig(epochs=args.epochs, runs=args.runs, seed=args.seed))
    nodes, _ = build_topology(cfg.scenario, np.random.default_rng(args.seed))
    p = planner_params(nodes, cfg.channel)
    opt = optimal_shards(p)
    print(f"# planner: n_c={opt.n_c:.3f} n*={opt.n_star}")
    print("n,model_J,measured_J")
    for n in range(1, p.n_max + 1):
        print(f"{n},{energy_model(n, p):.4f},{measure_consensus_energy(cfg, n):.4f}")


if __name__ == "__main__":
    main()
