"""Actor-critic bundle, gradient computations and parameter updates."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .heads import SimplexHead
from .memory import Batch
from .nets import DenseNet

CHECKPOINT_VERSION = 1


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    discount: float = 0.6
    soft_update: float = 0.01
    batch_size: int = 32
    episodes: int = 6000
    steps_per_episode: int = 20
    replay_capacity: int = 100_000
    hidden: tuple = (128, 128)
    hidden_activation: str = "relu"
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ou_sigma_final: float = 0.02
    ou_mu: float = 0.0
    reward_scale: float = 1.0
    action_head: str = "none"      # "simplex": normalise decision rows inside the actor

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if not 0.0 <= self.soft_update <= 1.0:
            raise ValueError("soft_update must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.episodes < 0 or self.steps_per_episode < 1:
            raise ValueError("episodes must be >= 0 and steps_per_episode >= 1")
        if self.replay_capacity < 1:
            raise ValueError("replay_capacity must be >= 1")
        if self.actor_lr < 0 or self.critic_lr < 0:
            raise ValueError("learning rates must be >= 0")
        if self.ou_theta <= 0 or self.ou_sigma < 0 or self.ou_sigma_final < 0:
            raise ValueError("need ou_theta > 0 and non-negative OU volatilities")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be > 0")
        if self.action_head not in ("none", "simplex"):
            raise ValueError(f"unknown action_head {self.action_head!r}")

    def sigma_at(self, episode: int) -> float:
        """Linearly decayed OU volatility for a given episode."""
        if self.episodes <= 1:
            return self.ou_sigma
        frac = min(max(episode / (self.episodes - 1), 0.0), 1.0)
        return self.ou_sigma + frac * (self.ou_sigma_final - self.ou_sigma)


@dataclass
class AgentBundle:
    actor: DenseNet
    critic: DenseNet
    target_actor: DenseNet = field(default=None)
    target_critic: DenseNet = field(default=None)
    head: SimplexHead | None = None

    def __post_init__(self):
        if self.target_actor is None:
            self.target_actor = self.actor.copy()
        if self.target_critic is None:
            self.target_critic = self.critic.copy()
        for a, b in ((self.actor, self.target_actor), (self.critic, self.target_critic)):
            if [p.shape for p in a.params()] != [p.shape for p in b.params()]:
                raise ValueError("target network shapes differ from primary")

    @property
    def state_dim(self) -> int:
        return self.actor.in_dim

    @property
    def action_dim(self) -> int:
        return self.actor.out_dim

    def copy(self) -> "AgentBundle":
        return AgentBundle(self.actor.copy(), self.critic.copy(),
                           self.target_actor.copy(), self.target_critic.copy(), self.head)


def make_agent(state_dim: int, action_dim: int, cfg: TrainConfig | None = None,
               rng: np.random.Generator | None = None, head: SimplexHead | None = None) -> AgentBundle:
    cfg = cfg or TrainConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    actor = DenseNet([state_dim, *cfg.hidden, action_dim], cfg.hidden_activation, "tanh01", rng)
    critic = DenseNet([state_dim + action_dim, *cfg.hidden, 1], cfg.hidden_activation, "linear", rng)
    if head is not None and head.dim != action_dim:
        raise ValueError("head width does not match the action dimension")
    return AgentBundle(actor, critic, head=head)


# ---------------------------------------------------------------- forward

def actor_forward(net: DenseNet, state: np.ndarray) -> np.ndarray:
    return net.forward(state)


def apply_head(head: SimplexHead | None, raw: np.ndarray) -> np.ndarray:
    return raw if head is None else head.forward(raw)


def policy(agent: AgentBundle, state: np.ndarray, target: bool = False) -> np.ndarray:
    """Deterministic action: actor network followed by the agent's head."""
    net = agent.target_actor if target else agent.actor
    return apply_head(agent.head, net.forward(state))


def critic_forward(net: DenseNet, state: np.ndarray, action: np.ndarray):
    """Q(s, a); a scalar for single inputs, shape (B,) for batches."""
    state = np.asarray(state, dtype=float)
    action = np.asarray(action, dtype=float)
    out = net.forward(np.concatenate([state, action], axis=-1))
    return float(out[0]) if out.ndim == 1 else out[:, 0]


def select_action(agent: AgentBundle, state: np.ndarray, noise: np.ndarray) -> np.ndarray:
    a = actor_forward(agent.actor, state)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != a.shape:
        raise ValueError(f"noise shape {noise.shape} != action shape {a.shape}")
    return apply_head(agent.head, np.clip(a + noise, 0.0, 1.0))


# ---------------------------------------------------------------- gradients

def _finite(grads, what: str):
    if math.isfinite(sum(float(g.sum()) for g in grads)):
        return
    for k, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite {what} gradient in parameter tensor {k}")
    raise NonFiniteGradient(f"{what} gradients overflow when summed")


def critic_loss_grads(critic: DenseNet, states, actions, targets):
    """Mean squared error (y - Q)^2 over the batch and its parameter gradients."""
    x = np.concatenate([np.atleast_2d(states), np.atleast_2d(actions)], axis=1)
    q, cache = critic.forward_cache(x)
    resid = q[:, 0] - np.asarray(targets, dtype=float)
    loss = float(np.mean(resid ** 2))
    g_out = (2.0 / len(resid)) * resid[:, None]
    grads, _ = critic.backward(cache, g_out)
    return loss, grads


def critic_action_grad(critic: DenseNet, states, actions) -> np.ndarray:
    """dQ/da for each row of the batch, shape (B, A)."""
    states = np.atleast_2d(states)
    x = np.concatenate([states, np.atleast_2d(actions)], axis=1)
    q, cache = critic.forward_cache(x)
    _, g_in = critic.backward(cache, np.ones_like(q))
    return g_in[:, states.shape[1]:]


def actor_objective_grads(actor: DenseNet, critic: DenseNet, states, head: SimplexHead | None = None):
    """Mean of Q(s, pi(s)) over the batch and its gradient w.r.t. actor parameters."""
    states = np.atleast_2d(states)
    raw, a_cache = actor.forward_cache(states)
    a = apply_head(head, raw)
    q, q_cache = critic.forward_cache(np.concatenate([states, a], axis=1))
    _, g_in = critic.backward(q_cache, np.ones_like(q))
    dq_da = g_in[:, states.shape[1]:]
    if head is not None:
        dq_da = head.vjp(raw, dq_da)
    grads, _ = actor.backward(a_cache, dq_da / len(states))
    return float(np.mean(q)), grads


# ---------------------------------------------------------------- updates

def target_values(batch: Batch, agent: AgentBundle, discount: float) -> np.ndarray:
    if len(batch) == 0:
        raise ValueError("empty batch")
    y = np.array(batch.rewards, dtype=float)
    if discount == 0.0:
        return y
    live = ~np.asarray(batch.dones, dtype=bool)
    if live.any():
        s2 = batch.next_states[live]
        a2 = policy(agent, s2, target=True)
        y[live] += discount * critic_forward(agent.target_critic, s2, a2)
    return y


def critic_update(agent: AgentBundle, batch: Batch, lr: float, targets: np.ndarray) -> float:
    loss, grads = critic_loss_grads(agent.critic, batch.states, batch.actions, targets)
    _finite(grads, "critic")
    if lr:
        for p, g in zip(agent.critic.params(), grads):
            p -= lr * g
    return loss


def actor_update(agent: AgentBundle, batch: Batch, lr: float) -> float:
    """One ascent step on mean Q(s, pi(s)); returns the objective before the step."""
    obj, grads = actor_objective_grads(agent.actor, agent.critic, batch.states, agent.head)
    _finite(grads, "actor")
    if lr:
        for p, g in zip(agent.actor.params(), grads):
            p += lr * g
    return obj


def soft_update(agent: AgentBundle, omega: float) -> None:
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    pairs = ((agent.actor, agent.target_actor), (agent.critic, agent.target_critic))
    for src, dst in pairs:
        for p, t in zip(src.params(), dst.params()):
            if omega == 1.0:
                t[...] = p
            elif omega != 0.0:
                t[...] = omega * p + (1.0 - omega) * t


# ---------------------------------------------------------------- checkpoints

_NETS = ("actor", "critic", "target_actor", "target_critic")


def save_checkpoint(path, agent: AgentBundle, cfg: TrainConfig) -> None:
    arrays = {}
    meta = {"version": CHECKPOINT_VERSION, "config": asdict(cfg), "nets": {},
            "head": None if agent.head is None else agent.head.to_dict()}
    for name in _NETS:
        net = getattr(agent, name)
        meta["nets"][name] = {"sizes": net.sizes, "acts": net.acts}
        for k, p in enumerate(net.params()):
            arrays[f"{name}_{k}"] = p
    arrays["meta"] = np.array(json.dumps(meta))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        nets = {}
        for name in _NETS:
            spec = meta["nets"][name]
            net = DenseNet(spec["sizes"], zero=True)
            net.acts = list(spec["acts"])
            net.set_params([data[f"{name}_{k}"] for k in range(2 * (len(spec["sizes"]) - 1))])
            nets[name] = net
    cfg = TrainConfig(**meta["config"])
    head = meta.get("head")
    return AgentBundle(**nets, head=None if head is None else SimplexHead.from_dict(head)), cfg
