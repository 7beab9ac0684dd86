"""Seeded experiment runs, evaluation against baselines, sweeps and metrics files."""
from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .baselines import (exhaustive_oracle, full_offload_policy, full_offload_rates,
                        local_policy, random_policy)
from .compmodel import check_feasible, system_energy
from .config import ExperimentConfig, save_config
from .ddpg import AgentBundle, NonFiniteGradient, policy, save_checkpoint, train
from .netmodel import build_topology, rate_matrices
from .problem import OffloadProblem

METRICS_HEADER = ["episode", "return", "norm_return", "mean_energy_J", "violations", "wall_s"]


def normalize_rewards(trace) -> np.ndarray:
    """Min-max scale a trace into [0, 1]; a constant trace maps to 0.5."""
    r = np.asarray(trace, dtype=float)
    if r.size == 0:
        raise ValueError("empty trace")
    lo, hi = r.min(), r.max()
    if hi == lo:
        return np.full(r.shape, 0.5)
    return (r - lo) / (hi - lo)


def window_means(norm, frac: float = 0.1) -> tuple[float, float]:
    """Mean of the first and last ``frac`` of a trace (at least one element each)."""
    norm = np.asarray(norm, dtype=float)
    k = max(1, int(round(len(norm) * frac)))
    return float(norm[:k].mean()), float(norm[-k:].mean())


def convergence_gap(trace, frac: float = 0.1) -> float:
    first, last = window_means(normalize_rewards(trace), frac)
    return last - first


def build_problem(cfg: ExperimentConfig) -> OffloadProblem:
    topo = build_topology(cfg.topology, cfg.seed)
    return OffloadProblem(topo, cfg.channel, cfg.episode, cfg.tasks)


# ---------------------------------------------------------------- evaluation

@dataclass
class PolicyStats:
    energies: list = field(default_factory=list)
    violations: list = field(default_factory=list)   # fraction of devices missing the deadline

    @property
    def mean_energy(self) -> float:
        return float(np.mean(self.energies)) if self.energies else math.nan

    @property
    def violation_rate(self) -> float:
        return float(np.mean(self.violations)) if self.violations else math.nan


def _deadline_rate(assignment, topo, tasks) -> float:
    return len(check_feasible(assignment, topo, tasks).deadline) / max(len(tasks), 1)


def evaluate(agent: AgentBundle | None, problem: OffloadProblem, episodes: int, seed,
             policies=("proposed", "local", "full-offload", "random", "oracle"),
             oracle_cap: int = 1_000_000) -> dict[str, PolicyStats]:
    """Greedy (noise-free) evaluation on fresh instances shared by every policy."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng, rand_rng = (np.random.default_rng(c) for c in ss.spawn(2))
    stats = {p: PolicyStats() for p in policies}
    n, m = problem.n, problem.m
    use_oracle = "oracle" in policies and (m + 2) ** n <= oracle_cap
    if "oracle" in stats and not use_oracle:
        del stats["oracle"]
    for _ in range(episodes):
        s = problem.reset(rng)
        topo, tasks = problem.env.topology, problem.env.tasks
        raws = {}
        if "proposed" in stats:
            if agent is None:
                raise ValueError("proposed policy needs an agent")
            raws["proposed"] = policy(agent, s)
        if "random" in stats:
            raws["random"] = random_policy(problem.action_dim, rand_rng)
        for name, raw in raws.items():
            a = problem.first_slot(raw).assignment
            stats[name].energies.append(system_energy(a, topo, tasks))
            stats[name].violations.append(_deadline_rate(a, topo, tasks))
        if "local" in stats:
            res = local_policy(tasks, topo)
            stats["local"].energies.append(res.energy)
            stats["local"].violations.append(len(res.report.deadline) / n)
        if "full-offload" in stats:
            res = full_offload_policy(tasks, topo, full_offload_rates(topo, problem.env.chan))
            stats["full-offload"].energies.append(res.energy)
            stats["full-offload"].violations.append(len(res.report.deadline) / n)
        if use_oracle:
            rs, rm = rate_matrices(topo, dataclasses.replace(problem.env.chan, mbs_sharing="full"))
            res = exhaustive_oracle(tasks, topo, rs, rm, cap=oracle_cap)
            if res.feasible:
                stats["oracle"].energies.append(res.energy)
                stats["oracle"].violations.append(0.0)
    return stats



# ---------------------------------------------------------------- runs

@dataclass
class RunResult:
    cfg: ExperimentConfig
    returns: list
    norm_returns: np.ndarray
    energies: list
    violations: list
    wall: list
    agent: AgentBundle | None
    evaluation: dict = field(default_factory=dict)
    diverged: str | None = None

    def rows(self):
        for k, ret in enumerate(self.returns):
            yield [k, ret, float(self.norm_returns[k]), self.energies[k], self.violations[k], self.wall[k]]

    @property
    def gap(self) -> float:
        return convergence_gap(self.returns) if self.returns else math.nan

    def converged(self, threshold: float = 0.2) -> bool:
        return self.diverged is None and self.gap >= threshold


def eval_seed(cfg: ExperimentConfig) -> np.random.SeedSequence:
    # disjoint from the training streams, which spawn from SeedSequence(seed)
    return np.random.SeedSequence([cfg.seed, 0xE7A1])


def run_experiment(cfg: ExperimentConfig, out_dir=None, evaluate_after: bool = True,
                   problem: OffloadProblem | None = None, on_episode_start=None) -> RunResult:
    """Train on ``cfg``, evaluate greedily and optionally write the run artifacts."""
    problem = problem or build_problem(cfg)
    wall = []
    t0 = time.perf_counter()

    def tick(ep, _res):
        wall.append(time.perf_counter() - t0 if cfg.experiment.record_wall_clock else 0.0)

    diverged = None
    try:
        res = train(problem, cfg.train, seed=cfg.seed, on_episode_start=on_episode_start,
                    on_episode_end=tick)
        tr = (res.returns, res.energies, res.violations, res.agent)
    except NonFiniteGradient as exc:
        diverged = str(exc)
        tr = ([], [], [], None)
    returns, energies, violations, agent = tr
    norm = normalize_rewards(returns) if returns else np.zeros(0)
    result = RunResult(cfg, list(returns), norm, list(energies), list(violations), wall[:len(returns)],
                       agent, diverged=diverged)
    if evaluate_after and agent is not None and cfg.experiment.eval_episodes > 0:
        result.evaluation = evaluate(agent, problem, cfg.experiment.eval_episodes, eval_seed(cfg),
                                     cfg.experiment.policies, cfg.experiment.oracle_cap)
    if out_dir is not None:
        write_run(result, out_dir)
    return result


def write_metrics(result: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for row in result.rows():
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:4]] + [int(row[4]), repr(float(row[5]))])


def summary_dict(result: RunResult) -> dict:
    out = {
        "seed": result.cfg.seed,
        "episodes": len(result.returns),
        "diverged": result.diverged,
        "convergence_gap": None if not result.returns else float(result.gap),
        "converged": bool(result.converged(result.cfg.experiment.convergence_gap)),
        "comparison": [],
    }
    for name, st in result.evaluation.items():
        out["comparison"].append({"policy": name, "mean_energy_J": st.mean_energy,
                                  "violation_rate": st.violation_rate, "episodes": len(st.energies)})
    return out


def write_run(result: RunResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(result, out / "metrics.csv")
    save_config(result.cfg, out / "config.yaml")
    (out / "summary.yaml").write_text(yaml.safe_dump(summary_dict(result), sort_keys=False))
    if result.agent is not None:
        save_checkpoint(out / "checkpoint.npz", result.agent, result.cfg.train)
    return out


def comparison_table(result: RunResult) -> str:
    lines = [f"{'policy':<14}{'energy_J':>12}{'violations':>12}"]
    for name, st in result.evaluation.items():
        lines.append(f"{name:<14}{st.mean_energy:>12.3f}{st.violation_rate:>12.3f}")
    return "\n".join(lines)


# ---------------------------------------------------------------- sweeps

SWEEP_AXES = {
    "learning-rate": ("train", ("actor_lr", "critic_lr"), "lr_grid"),
    "discount": ("train", ("discount",), "discount_grid"),
    "devices": ("topology", ("n_devices",), "device_grid"),
}


def sweep(cfg: ExperimentConfig, axis: str, values=None, out_dir=None, evaluate_after=False):
    """One seeded run per axis value; returns [(value, RunResult)]."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    section, keys, grid = SWEEP_AXES[axis]
    values = getattr(cfg.experiment, grid) if values is None else values
    runs = []
    for v in values:
        v = int(v) if axis == "devices" else float(v)
        member = cfg.replace(section, **{k: v for k in keys})
        sub = None if out_dir is None else Path(out_dir) / f"{axis}={v}"
        runs.append((v, run_experiment(member, sub, evaluate_after=evaluate_after)))
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "manifest.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([axis, "convergence_gap", "converged", "diverged"])
            for v, r in runs:
                w.writerow([v, r.gap, r.converged(cfg.experiment.convergence_gap), r.diverged or ""])
    return runs


# ---------------------------------------------------------------- bandwidth switch

@dataclass
class SwitchResult:
    run: RunResult
    switch_episode: int
    phase1_plateau: float | None
    phase2_plateau: float

    @property
    def improved(self) -> bool:
        return self.phase1_plateau is not None and self.phase2_plateau > self.phase1_plateau


def switch_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Small-network, narrow-band setup used for the two-phase experiment."""
    cfg = cfg.replace("topology", n_devices=10, n_sbs=5)
    return cfg.replace("channel", mbs_bandwidth=2e6, sbs_bandwidth=1e6)


def bandwidth_switch_experiment(cfg: ExperimentConfig, switch_episode: int | None = None,
                                factor: float | None = None, out_dir=None,
                                adjust: bool = True) -> SwitchResult:
    if adjust:
        cfg = switch_config(cfg)
    switch = cfg.experiment.switch_episode if switch_episode is None else int(switch_episode)
    factor = cfg.experiment.bandwidth_factor if factor is None else factor
    wide = cfg.channel.scaled_bandwidth(factor)
    topo = build_topology(cfg.topology, cfg.seed)
    if cfg.episode.rate_max is None:
        # scale observed rates by the wide-band peak so both phases stay inside [0, 1]
        rs, rm = rate_matrices(topo, dataclasses.replace(wide, mbs_sharing="full"))
        cfg = cfg.replace("episode", rate_max=float(max(rs.max(initial=0.0), rm.max())))
    problem = OffloadProblem(topo, cfg.channel, cfg.episode, cfg.tasks)

    def on_start(ep):
        if ep == switch:
            problem.set_channel(wide)

    run = run_experiment(cfg, out_dir, evaluate_after=False, problem=problem, on_episode_start=on_start)
    norm = run.norm_returns
    p1 = norm[:switch] if switch > 0 else np.zeros(0)
    p2 = norm[switch:]
    plateau1 = window_means(p1)[1] if len(p1) else None
    plateau2 = window_means(p2)[1] if len(p2) else math.nan
    return SwitchResult(run, switch, plateau1, plateau2)


# ---------------------------------------------------------------- baseline comparison

def compare_baselines(cfg: ExperimentConfig, n_grid=None, task_kinds=("mixed", 1, 2, 3)):
    """Train per (N, task kind) and evaluate every configured policy.

    Returns rows (N, task_kind, policy, mean_energy_J, violation_rate).
    """
    n_grid = cfg.experiment.device_grid if n_grid is None else n_grid
    rows = []
    for n in n_grid:
        for kind in task_kinds:
            member = cfg.replace("topology", n_devices=int(n)).replace("tasks", kind=kind)
            res = run_experiment(member)
            for name, st in res.evaluation.items():
                rows.append((int(n), kind, name, st.mean_energy, st.violation_rate))
    return rows
