"""The episode/step training loop.

``problem`` is any object exposing ``state_dim``, ``action_dim``,
``reset(rng) -> state`` and ``step(raw_action) -> (state, reward, done, info)``.
A problem offering ``action_head()`` supplies the head used when
``cfg.action_head == "simplex"``.
If it also has ``episode_metrics() -> (energy, violations)`` those values are
recorded per episode.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..env import episode_return
from .agent import (AgentBundle, TrainConfig, actor_update, critic_update, make_agent,
                    select_action, soft_update, target_values)
from .memory import ReplayMemory
from .noise import OuProcess

STREAMS = ("init", "noise", "sampling", "env")


def make_streams(seed) -> dict[str, np.random.Generator]:
    """Independent generators derived from one run seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, ss.spawn(len(STREAMS)))}


@dataclass
class TrainResult:
    returns: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    violations: list[int] = field(default_factory=list)
    critic_losses: list[float] = field(default_factory=list)
    agent: AgentBundle | None = None
    memory: ReplayMemory | None = None


def train(problem, cfg: TrainConfig, seed=0, agent: AgentBundle | None = None,
          on_episode_start=None, on_episode_end=None) -> TrainResult:
    streams = make_streams(seed)
    if agent is None:
        head = problem.action_head() if cfg.action_head == "simplex" else None
        agent = make_agent(problem.state_dim, problem.action_dim, cfg, streams["init"], head)
    if agent.state_dim != problem.state_dim or agent.action_dim != problem.action_dim:
        raise ValueError("agent dimensions do not match the problem")
    memory = ReplayMemory(cfg.replay_capacity, problem.state_dim, problem.action_dim)
    noise = OuProcess(problem.action_dim, cfg.ou_theta, cfg.ou_mu, cfg.ou_sigma, rng=streams["noise"])
    sampler = streams["sampling"]
    env_rng = streams["env"]
    result = TrainResult(agent=agent, memory=memory)

    for ep in range(cfg.episodes):
        if on_episode_start is not None:
            on_episode_start(ep)
        noise.reset()
        noise.sigma = cfg.sigma_at(ep)
        s = problem.reset(env_rng)
        rewards = []
        losses = []
        for _ in range(cfg.steps_per_episode):
            a = select_action(agent, s, noise.step())
            s2, r, done, _ = problem.step(a)
            memory.push(s, a, r * cfg.reward_scale, s2, done)
            batch = memory.sample(cfg.batch_size, sampler)
            if batch is not None:
                y = target_values(batch, agent, cfg.discount)
                losses.append(critic_update(agent, batch, cfg.critic_lr, y))
                actor_update(agent, batch, cfg.actor_lr)
                soft_update(agent, cfg.soft_update)
            rewards.append(r)
            s = s2
            if done:
                break
        result.returns.append(episode_return(rewards, cfg.discount))
        result.critic_losses.append(float(np.mean(losses)) if losses else float("nan"))
        if hasattr(problem, "episode_metrics"):
            energy, viol = problem.episode_metrics()
            result.energies.append(energy)
            result.violations.append(viol)
        if on_episode_end is not None:
            on_episode_end(ep, result)
    return result
