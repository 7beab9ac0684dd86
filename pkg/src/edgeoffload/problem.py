"""Glue between the raw-vector learner and the offloading environment."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import full_offload_policy, full_offload_rates, local_policy
from .compmodel import system_energy
from .ddpg.heads import SimplexHead
from .env import EpisodeConfig, OffloadEnv, StepInfo, episode_return, flatten_state, interpret_action
from .netmodel import GCYCLES, MB, TASK_TYPES, ChannelParams, TaskDistConfig, Topology, sample_tasks
from .refine import RefinedAction, refine


def task_bounds(dist: TaskDistConfig) -> tuple[float, float]:
    """Largest possible (bits, cycles) of a task drawn from ``dist``."""
    if dist.kind == "uniform":
        return dist.bits_mb[1] * MB, dist.gcycles[1] * GCYCLES
    types = dist.types if dist.kind == "mixed" else (int(dist.kind),)
    return max(TASK_TYPES[t][0] for t in types), max(TASK_TYPES[t][1] for t in types)


class OffloadProblem:
    """Samples tasks, refines raw actions and tracks per-episode metrics."""

    def __init__(self, topology: Topology, chan: ChannelParams, episode: EpisodeConfig,
                 tasks: TaskDistConfig):
        self.env = OffloadEnv(topology, chan, episode)
        self.task_dist = tasks
        bits, cycles = task_bounds(tasks)
        self.scales = self.env.scales(bits, cycles, tasks.deadline)
        self.first: StepInfo | None = None
        self.last_action: RefinedAction | None = None

    @property
    def state_dim(self) -> int:
        return self.env.state_dim

    @property
    def action_dim(self) -> int:
        return self.env.action_dim

    @property
    def n(self) -> int:
        return self.env.n

    @property
    def m(self) -> int:
        return self.env.m

    def set_channel(self, chan: ChannelParams) -> None:
        self.env.set_channel(chan)

    def action_head(self) -> SimplexHead:
        """Simplex head over each device's x, y, z entries; unreachable SBSs are masked."""
        n, m = self.n, self.m
        i = np.arange(n)[:, None]
        index = np.hstack([i, n + i * m + np.arange(m)[None, :], n + n * m + i])
        valid = np.hstack([np.ones((n, 1), bool), self.env.topology.coverage_mask, np.ones((n, 1), bool)])
        return SimplexHead(self.action_dim, index, valid)

    def reset(self, rng: np.random.Generator, tasks=None) -> np.ndarray:
        if tasks is None:
            tasks = sample_tasks(self.n, self.task_dist, rng)
        state = self.env.reset(tasks, rng)
        self.first = None
        return flatten_state(state, self.scales)

    def refine_raw(self, raw: np.ndarray) -> RefinedAction:
        env = self.env
        caps = env.allocation_capacity()
        act = interpret_action(raw, self.n, self.m, caps)
        return refine(act.w, act.fs, act.fm, env.state, caps, env.topology.coverage_mask)

    def observe(self) -> np.ndarray:
        return flatten_state(self.env.state, self.scales)

    def first_slot(self, raw: np.ndarray) -> StepInfo:
        """Slot outcome of a raw action from the current state, without stepping."""
        return self.env.preview(self.env.state, self.refine_raw(raw))[3]

    def step(self, raw: np.ndarray):
        action = self.refine_raw(raw)
        state, reward, done, info = self.env.step(action)
        if self.first is None:
            self.first = info
        self.last_action = action
        return flatten_state(state, self.scales), reward, done, info

    def episode_energy(self) -> float:
        """Energy of the first-slot assignment applied to the episode's tasks."""
        if self.first is None:
            raise RuntimeError("no step taken this episode")
        return system_energy(self.first.assignment, self.env.topology, self.env.tasks)

    def episode_metrics(self) -> tuple[float, int]:
        return self.episode_energy(), int(self.env.state.breached.sum())

    def baseline_energies(self) -> dict[str, float]:
        """Local and full-offload energies on the current episode's instance."""
        topo, tasks = self.env.topology, self.env.tasks
        rm = full_offload_rates(topo, self.env.chan)
        return {"local": local_policy(tasks, topo).energy,
                "full-offload": full_offload_policy(tasks, topo, rm).energy}


@dataclass
class EvalRecord:
    energy: float
    violations: int
    ret: float
    baselines: dict


def run_episode(problem: OffloadProblem, policy, rng: np.random.Generator, discount: float):
    """Roll out ``policy(state_vec) -> raw`` for one episode; returns an EvalRecord."""
    s = problem.reset(rng)
    base = problem.baseline_energies()
    rewards = []
    for _ in range(problem.env.cfg.max_steps):
        s, r, done, _ = problem.step(policy(s))
        rewards.append(r)
        if done:
            break
    energy, viol = problem.episode_metrics()
    return EvalRecord(energy, viol, episode_return(rewards, discount), base)
