"""Command-line entry point: ``edgeoffload <verb> [options]``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .baselines import EnumerationLimit, exhaustive_oracle, full_offload_policy, full_offload_rates, local_policy
from .config import ConfigError, resolve_config
from .netmodel import TopologyError, rate_matrices
from .runner import (SWEEP_AXES, bandwidth_switch_experiment, build_problem, comparison_table,
                     compare_baselines, run_experiment, sweep)

log = logging.getLogger("edgeoffload")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="desk",
                   help="YAML config path or a bundled profile name (desk, full); default: desk")
    p.add_argument("--seed", type=int, help="override experiment.seed")
    p.add_argument("--out", help="output directory (default: experiment.out_dir)")
    p.add_argument("--episodes", type=int, help="override train.episodes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgeoffload", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    verbs = parser.add_subparsers(dest="verb", required=True)

    _common(verbs.add_parser("run", help="train one seeded run and compare against baselines"))

    p = verbs.add_parser("sweep", help="one run per value of a hyperparameter axis")
    _common(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", type=float, nargs="*", help="axis values (default: the config grid)")

    p = verbs.add_parser("compare", help="trained policy vs baselines per device count and task type")
    _common(p)
    p.add_argument("--devices", type=int, nargs="*", help="device counts (default: experiment.device_grid)")
    p.add_argument("--kinds", nargs="*", default=["mixed", "1", "2", "3"], help="task kinds")

    p = verbs.add_parser("bandwidth-switch", help="two-phase run with widened bandwidth mid-run")
    _common(p)
    p.add_argument("--switch-episode", type=int)
    p.add_argument("--factor", type=float)

    p = verbs.add_parser("oracle", help="exhaustive optimum vs baselines on small random instances")
    _common(p)
    p.add_argument("--instances", type=int, default=10)
    return parser


def _load(args):
    cfg = resolve_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, episodes=args.episodes, out_dir=args.out)
    return cfg, Path(cfg.experiment.out_dir)


def cmd_run(args) -> int:
    cfg, out = _load(args)
    res = run_experiment(cfg, out)
    if res.diverged:
        print(f"run diverged: {res.diverged}")
    print(comparison_table(res))
    print(f"convergence gap {res.gap:.3f}; artifacts in {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg, out = _load(args)
    runs = sweep(cfg, args.axis, args.values, out)
    for v, r in runs:
        status = "diverged" if r.diverged else ("converged" if r.converged(cfg.experiment.convergence_gap)
                                                else "not converged")
        print(f"{args.axis}={v:g}  gap={r.gap:.3f}  {status}")
    return 0


def cmd_compare(args) -> int:
    cfg, out = _load(args)
    kinds = [int(k) if k.isdigit() else k for k in args.kinds]
    rows = compare_baselines(cfg, args.devices, kinds)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["devices", "task_kind", "policy", "mean_energy_J", "violation_rate"])
        w.writerows(rows)
    for row in rows:
        print(f"N={row[0]:<4} kind={row[1]!s:<6} {row[2]:<13} {row[3]:10.3f} J  {row[4]:.3f}")
    return 0


def cmd_switch(args) -> int:
    cfg, out = _load(args)
    res = bandwidth_switch_experiment(cfg, args.switch_episode, args.factor, out)
    (out / "switch.yaml").write_text(yaml.safe_dump({
        "switch_episode": res.switch_episode,
        "phase1_plateau": res.phase1_plateau,
        "phase2_plateau": float(res.phase2_plateau),
        "improved": res.improved}, sort_keys=False))
    p1 = "n/a" if res.phase1_plateau is None else f"{res.phase1_plateau:.3f}"
    print(f"phase-1 plateau {p1}, phase-2 plateau {res.phase2_plateau:.3f}")
    return 0


def cmd_oracle(args) -> int:
    cfg, out = _load(args)
    problem = build_problem(cfg)
    rng = np.random.default_rng(cfg.seed)
    chan = problem.env.chan
    rows = []
    for k in range(args.instances):
        problem.reset(rng)
        topo, tasks = problem.env.topology, problem.env.tasks
        rs, rm = rate_matrices(topo, dataclasses.replace(chan, mbs_sharing="full"))
        try:
            orc = exhaustive_oracle(tasks, topo, rs, rm, cap=cfg.experiment.oracle_cap)
        except EnumerationLimit as exc:
            print(f"refusing: {exc}")
            return 2
        loc = local_policy(tasks, topo)
        full = full_offload_policy(tasks, topo, full_offload_rates(topo, chan))
        rows.append((k, orc.energy if orc.feasible else float("inf"),
                     loc.energy, loc.feasible, full.energy, full.feasible))
        print(f"instance {k}: oracle {rows[-1][1]:.3f} J, local {loc.energy:.3f} J"
              f"{'' if loc.feasible else ' (infeasible)'}, full-offload {full.energy:.3f} J"
              f"{'' if full.feasible else ' (infeasible)'}")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "oracle.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "oracle_J", "local_J", "local_feasible", "full_offload_J", "full_offload_feasible"])
        w.writerows(rows)
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "compare": cmd_compare,
            "bandwidth-switch": cmd_switch, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, TopologyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
