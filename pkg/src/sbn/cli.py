"""Command line: ``run``, ``ablate``, ``optimize-shards`` and ``plot``."""
from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

from . import report
from .config import load_config, override, parse_config
from .sharding import DomainError, EnergyModelParams, energy_model, optimal_shards
from .sim import ConfigError, Scenario, Variant, run_scenario
from .svg import MalformedInput, grouped_bars_svg, read_matrix


class UnknownVariant(ConfigError):
    pass


class UnknownScenario(ConfigError):
    pass


def _load(path):
    if path is None:
        return parse_config("")
    return load_config(path)


def _split(raw: str, enum_cls, err):
    names = [x.strip().lower() for x in raw.split(",") if x.strip()]
    if not names:
        raise err(f"empty list: {raw!r}")
    out = []
    for n in names:
        try:
            out.append(enum_cls(n))
        except ValueError:
            raise err(f"unknown {enum_cls.__name__.lower()} {n!r}; choose from "
                      + ", ".join(e.value for e in enum_cls)) from None
        if out.count(out[-1]) > 1:
            raise err(f"{n!r} listed twice")
    return out


def _run_cells(cfg, variants, scenarios, workers=None) -> dict:
    cells = {}
    for v in variants:
        for s in scenarios:
            c = cfg.with_scenario(variant=v, scenario=s)
            cells[(v.value, s.value)] = run_scenario(c, workers).rows
    return cells


def _write(out_dir, files: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        report.write_text(os.path.join(out_dir, name), text)


def cmd_run(args) -> int:
    cfg = override(_load(args.config), seed=args.seed, runs=args.runs)
    sc = cfg.scenario
    cells = _run_cells(cfg, [sc.variant], [sc.scenario])
    rows = cells[(sc.variant.value, sc.scenario.value)]
    _write(args.out, {"runs.csv": report.runs_csv(rows), "summary.json": report.summary_json(cells)})
    print(f"wrote {len(rows)} runs to {args.out}")
    return 0


def cmd_ablate(args) -> int:
    cfg = override(_load(args.config), seed=args.seed, runs=args.runs)
    variants = _split(args.variants, Variant, UnknownVariant)
    scenarios = _split(args.scenarios, Scenario, UnknownScenario)
    cells = _run_cells(cfg, variants, scenarios)
    rows = [r for v in variants for s in scenarios for r in cells[(v.value, s.value)]]
    vnames, snames = [v.value for v in variants], [s.value for s in scenarios]
    _write(args.out, {
        "runs.csv": report.runs_csv(rows),
        "summary.json": report.summary_json(cells),
        "fig6_energy.csv": report.matrix_csv(cells, report.MATRIX_METRICS["energy"], vnames, snames),
        "fig6_latency.csv": report.matrix_csv(cells, report.MATRIX_METRICS["latency"], vnames, snames),
    })
    print(f"wrote {len(cells)} cells ({len(rows)} runs) to {args.out}")
    return 0


def cmd_optimize_shards(args) -> int:
    p = EnergyModelParams(args.z, args.e_intra, args.e_global, args.min_shard_size)
    opt = optimal_shards(p)
    print(f"n_c    = {opt.n_c:.6f}")
    print(f"n*     = {opt.n_star}")
    print(f"m      = {' '.join(str(m) for m in opt.m_sizes)}")
    print(f"E(n*)  = {opt.e_star!r}")
    if args.sweep:
        os.makedirs(os.path.dirname(os.path.abspath(args.sweep)), exist_ok=True)
        with open(args.sweep, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "energy"])
            for n in range(1, p.n_max + 1):
                w.writerow([n, repr(energy_model(n, p))])
        print(f"sweep of {p.n_max} rows written to {args.sweep}")
    return 0


def cmd_plot(args) -> int:
    energy, latency = read_matrix(args.energy), read_matrix(args.latency)
    svg = grouped_bars_svg([(energy, "Energy consumption", "energy (J)"),
                            (latency, "Service latency", "latency (ms)")])
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    report.write_text(args.out, svg)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbn", description="Symbiotic blockchain network simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one variant/scenario for the configured number of runs")
    p.add_argument("--config", help="key = value config file (defaults if omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="cross product of variants and scenarios")
    p.add_argument("--config")
    p.add_argument("--variants", default="sbn,no-sbc,no-shard,no-sc")
    p.add_argument("--scenarios", default="na,fa,ba")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("optimize-shards", help="closed-form shard count for the energy model")
    p.add_argument("--z", type=int, required=True, help="number of base stations")
    p.add_argument("--e-intra", type=float, required=True)
    p.add_argument("--e-global", type=float, required=True)
    p.add_argument("--min-shard-size", type=int, default=4)
    p.add_argument("--sweep", help="write E(n) for every feasible n to this CSV")
    p.set_defaults(func=cmd_optimize_shards)

    p = sub.add_parser("plot", help="grouped bar chart SVG from the fig6 matrices")
    p.add_argument("--energy", required=True)
    p.add_argument("--latency", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, MalformedInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
