#!/usr/bin/env python3
"""Paired PBFT vs S-PBFT rounds on desk-scale topologies, one line per seed."""
import argparse
import math
from dataclasses import replace

from sbn.sim import SimConfig, compare_protocols, desk_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--rounds", type=int, default=1000)
    ap.add_argument("--retries", type=int, default=3, help="retransmissions per phase")
    args = ap.parse_args()
    cfg = SimConfig(scenario=desk_scenario())
    cfg = replace(cfg, consensus=replace(cfg.consensus, max_retries=args.retries))
    print("seed,success_pbft,success_spbft,energy_pbft_J,energy_spbft_J,saving")
    for seed in range(args.seeds):
        r = compare_protocols(cfg, seed, args.rounds)
        ep, es = math.fsum(r.energy_pbft), math.fsum(r.energy_spbft)
        print(f"{seed},{r.success_pbft.mean():.4f},{r.success_spbft.mean():.4f},{ep:.3f},{es:.3f},{1 - es / ep:.3f}")


if __name__ == "__main__":
    main()
