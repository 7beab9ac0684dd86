"""Slotted offloading MDP: state/action encodings, reward and transitions."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .compmodel import LOCAL, Assignment, mode_station
from .netmodel import ChannelParams, TaskSpec, Topology, draw_gains, rate_matrices
from .refine import RefinedAction

EPS = 1e-12


@dataclass(frozen=True)
class EpisodeConfig:
    slot_length: float = 0.05
    max_steps: int = 20
    penalty: float | None = None           # None -> 100 * N
    penalty_mode: str = "first_breach"     # or "episode_end"
    reward_mode: str = "slot"              # or "residual", "savings"
    capacity_mode: str = "fresh"           # or "cumulative"
    local_clears_input: bool = False       # True: any local slot drops the input bits
    rate_max: float | None = None          # None -> peak unit-gain rate of the topology

    def __post_init__(self):
        if self.slot_length <= 0:
            raise ValueError("slot_length must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.penalty_mode not in ("first_breach", "episode_end"):
            raise ValueError(f"unknown penalty_mode {self.penalty_mode!r}")
        if self.reward_mode not in ("slot", "residual", "savings"):
            raise ValueError(f"unknown reward_mode {self.reward_mode!r}")
        if self.capacity_mode not in ("fresh", "cumulative"):
            raise ValueError(f"unknown capacity_mode {self.capacity_mode!r}")


@dataclass
class EnvState:
    d: np.ndarray     # residual input bits (N,)
    c: np.ndarray     # residual cycles (N,)
    tau: np.ndarray   # remaining time (N,)
    rs: np.ndarray    # rates to SBSs (N, M)
    rm: np.ndarray    # rates to the MBS (N,)
    F: np.ndarray     # available capacity [MBS, SBS_1..SBS_M]
    t: int = 0
    breached: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.breached is None:
            self.breached = np.zeros(len(self.d), dtype=bool)

    @property
    def done_mask(self) -> np.ndarray:
        return (self.c <= 0) & (self.d <= 0)

    def copy(self) -> "EnvState":
        return EnvState(self.d.copy(), self.c.copy(), self.tau.copy(), self.rs.copy(),
                        self.rm.copy(), self.F.copy(), self.t, self.breached.copy())


@dataclass
class EnvAction:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    fs: np.ndarray
    fm: np.ndarray

    @property
    def w(self) -> np.ndarray:
        return np.column_stack([self.x, self.y, self.z])


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


def state_dim(n: int, m: int) -> int:
    return 4 * n + n * m + m + 1


def action_dim(n: int, m: int) -> int:
    return 3 * n + 2 * n * m


@dataclass(frozen=True)
class StateScales:
    bits: float
    cycles: float
    time: float
    rate: float
    capacity: np.ndarray


def flatten_state(state: EnvState, scales: StateScales | None = None) -> np.ndarray:
    """Vector layout: d, c, tau, R^s (row-major), R^m, F; each scaled to [0, 1]."""
    if scales is None:
        parts = [state.d, state.c, state.tau, state.rs.ravel(), state.rm, state.F]
        return np.concatenate(parts).astype(float)
    parts = [state.d / scales.bits, state.c / scales.cycles, state.tau / scales.time,
             state.rs.ravel() / scales.rate, state.rm / scales.rate, state.F / scales.capacity]
    return np.clip(np.concatenate(parts), 0.0, 1.0)


def interpret_action(raw: np.ndarray, n: int, m: int, capacities: np.ndarray) -> EnvAction:
    """Slice a raw [0,1] vector into x, y, z, f^s, f^m (allocations in cycles/s)."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (action_dim(n, m),):
        raise ValueError(f"raw action has length {raw.size}, expected {action_dim(n, m)}")
    k = 0
    x = raw[k:k + n]; k += n
    y = raw[k:k + n * m].reshape(n, m); k += n * m
    z = raw[k:k + n]; k += n
    fs = raw[k:k + n * m].reshape(n, m) * capacities[None, 1:]; k += n * m
    fm = raw[k:k + n] * capacities[0]
    return EnvAction(x, y, z, fs, fm)


def episode_return(rewards, discount: float) -> float:
    if not 0.0 <= discount <= 1.0:
        raise ValueError("discount must lie in [0, 1]")
    total = 0.0
    factor = 1.0
    for r in rewards:
        total += factor * r
        factor *= discount
    return total


@dataclass
class StepInfo:
    energy: float                 # joules spent in the slot
    assignment: Assignment        # modes, allocations and rates used this slot
    breaches: list[int]
    penalty: float


class OffloadEnv:
    """One MBS, M SBSs and N devices, each with a single task per episode."""

    def __init__(self, topology: Topology, chan: ChannelParams, cfg: EpisodeConfig | None = None):
        self.base_topology = topology
        self.topology = topology
        self.chan = chan
        self.cfg = cfg or EpisodeConfig()
        self.n = topology.n_devices
        self.m = topology.n_sbs
        self.capacities = topology.capacities
        self.tasks: list[TaskSpec] = []
        self.state: EnvState | None = None
        rs, rm = rate_matrices(topology, replace(chan, mbs_sharing="full"))
        self.rate_max = self.cfg.rate_max or float(max(rs.max(initial=0.0), rm.max()))
        self._power_w = np.array([d.power_mw for d in topology.devices]) / 1000.0
        self._f_local = np.array([d.local_capacity for d in topology.devices])
        self._kappa = np.array([d.switched_capacitance for d in topology.devices])
        self._e = np.array([s.energy_per_cycle for s in topology.stations])

    @property
    def penalty(self) -> float:
        return 100.0 * self.n if self.cfg.penalty is None else self.cfg.penalty

    @property
    def state_dim(self) -> int:
        return state_dim(self.n, self.m)

    @property
    def action_dim(self) -> int:
        return action_dim(self.n, self.m)

    def scales(self, task_bits_max: float, task_cycles_max: float, deadline_max: float) -> StateScales:
        return StateScales(task_bits_max, task_cycles_max, deadline_max, self.rate_max, self.capacities)

    def set_channel(self, chan: ChannelParams) -> None:
        self.chan = chan

    def reset(self, tasks, seed=None) -> EnvState:
        if len(tasks) != self.n:
            raise ValueError(f"{len(tasks)} tasks for {self.n} devices")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        gains = draw_gains(self.base_topology, self.chan, rng)
        self.topology = self.base_topology.with_gains(gains)
        self.tasks = list(tasks)
        rs, rm = rate_matrices(self.topology, self.chan)
        self.state = EnvState(
            d=np.array([t.bits for t in tasks], dtype=float),
            c=np.array([t.cycles for t in tasks], dtype=float),
            tau=np.array([t.deadline for t in tasks], dtype=float),
            rs=rs, rm=rm, F=self.capacities.astype(float).copy())
        return self.state.copy()

    def allocation_capacity(self, state: EnvState | None = None) -> np.ndarray:
        state = state or self.state
        if self.cfg.capacity_mode == "cumulative":
            return state.F.copy()
        return self.capacities.astype(float)

    # ------------------------------------------------------------ dynamics

    def _slot_rates(self, state: EnvState, modes: np.ndarray):
        """Rates each device sees this slot given who is transmitting where."""
        serving = np.full(self.n, -1)
        mbs_tx = np.zeros(self.n, dtype=bool)
        for i, mode in enumerate(modes):
            st = mode_station(int(mode), self.m)
            if st is None or state.d[i] <= 0 or state.done_mask[i]:
                continue
            serving[i] = st
            mbs_tx[i] = st == 0
        k = max(int(mbs_tx.sum()), 1)
        rs, rm = rate_matrices(self.topology, self.chan, serving, k)
        rates = np.zeros(self.n)
        for i, mode in enumerate(modes):
            st = mode_station(int(mode), self.m)
            if st == 0:
                rates[i] = rm[i]
            elif st is not None:
                rates[i] = rs[i, st - 1]
        return rates, serving, mbs_tx

    def _advance(self, state: EnvState, action: RefinedAction):
        if not action.is_binary():
            raise ValueError("step() needs a refined (one-hot) action")
        modes = action.modes
        alloc = action.allocations()
        caps = self.allocation_capacity(state)
        stations = np.where(modes == self.m + 1, 0, modes)
        load = np.bincount(stations, weights=np.where(modes == LOCAL, 0.0, alloc), minlength=self.m + 1)
        over = np.flatnonzero(load[:self.m + 1] > caps * (1 + 1e-9))
        if len(over):
            raise ValueError(f"allocations exceed capacity of station {int(over[0])}")

        dt = self.cfg.slot_length
        rates, serving, mbs_tx = self._slot_rates(state, modes)
        live = ~state.done_mask
        nxt = state.copy()
        slot_energy = 0.0
        residual_energy = 0.0
        usage = np.zeros(self.m + 1)
        # what finishing every live task on-device would cost; independent of the action
        local_ref = float(np.sum((self._kappa * self._f_local ** 2 * state.c)[live]))
        for i in np.flatnonzero(live):
            mode = int(modes[i])
            if mode == LOCAL:
                f = self._f_local[i]
                per_cycle = self._kappa[i] * f * f
                residual_energy += per_cycle * state.c[i]
                cycles = min(state.c[i], f * dt)
                slot_energy += per_cycle * cycles
                nxt.c[i] = max(0.0, state.c[i] - cycles)
                # otherwise the input is only dropped once the task has finished on-device
                if self.cfg.local_clears_input or nxt.c[i] <= 0:
                    nxt.d[i] = 0.0
            else:
                st = mode_station(mode, self.m)
                r = rates[i]
                if r <= 0 and state.d[i] > 0:
                    raise ValueError(f"device {i} offloads over a zero-rate link")
                f = alloc[i]
                usage[st] += f
                e = self._e[st]
                if state.d[i] > 0:
                    residual_energy += self._power_w[i] * state.d[i] / r
                residual_energy += e * state.c[i]
                bits = min(state.d[i], r * dt)
                cycles = min(state.c[i], f * dt)
                if bits > 0:
                    slot_energy += self._power_w[i] * bits / r
                slot_energy += e * cycles
                nxt.d[i] = max(0.0, state.d[i] - bits)
                nxt.c[i] = max(0.0, state.c[i] - cycles)
            nxt.tau[i] = max(0.0, state.tau[i] - dt)

        nxt.t = state.t + 1
        unfinished = ~nxt.done_mask
        breaches = [int(i) for i in np.flatnonzero(live & unfinished & (nxt.tau <= EPS) & ~state.breached)]
        nxt.breached[breaches] = True
        done = bool(nxt.done_mask.all() or nxt.t >= self.cfg.max_steps)

        penalty = 0.0
        if self.cfg.penalty_mode == "first_breach":
            penalty = self.penalty * len(breaches)
        elif done and (nxt.breached.any() or unfinished.any()):
            penalty = self.penalty

        base = self.capacities if self.cfg.capacity_mode == "fresh" else state.F
        nxt.F = np.maximum(base - usage, 0.0)

        # observed rates for the next slot use this slot's surviving transmitters
        still = (serving >= 0) & (nxt.d > 0)
        serving_next = np.where(still, serving, -1)
        k_prev = int((still & mbs_tx).sum())
        sharers = k_prev + np.where(still & mbs_tx, 0, 1)
        nxt.rs, nxt.rm = rate_matrices(self.topology, self.chan, serving_next, sharers)

        if self.cfg.reward_mode == "slot":
            energy_term = slot_energy
        elif self.cfg.reward_mode == "residual":
            energy_term = residual_energy
        else:
            energy_term = residual_energy - local_ref
        reward = -energy_term - penalty
        info = StepInfo(slot_energy, Assignment(modes, alloc, rates), breaches, penalty)
        return nxt, float(reward), done, info

    def preview(self, state: EnvState, action: RefinedAction):
        """(next_state, reward, done, info) of an action without committing it."""
        return self._advance(state, action)

    def immediate_reward(self, state: EnvState, action: RefinedAction) -> float:
        return self._advance(state, action)[1]

    def step(self, action: RefinedAction):
        if self.state is None:
            raise RuntimeError("call reset() first")
        nxt, reward, done, info = self._advance(self.state, action)
        self.state = nxt
        return nxt.copy(), reward, done, info
