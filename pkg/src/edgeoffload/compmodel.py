"""Delay/energy formulas, the system objective and constraint checks.

A device's mode is an integer column index into the N x (M+2) decision
layout: 0 is local execution, 1..M an SBS, M+1 the MBS.  Functions that
can be infeasible return ``None`` instead of a number.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netmodel import TaskSpec, Topology

LOCAL = 0


def mbs_mode(n_sbs: int) -> int:
    return n_sbs + 1


def mode_station(mode: int, n_sbs: int) -> int | None:
    """Station index (0 = MBS, j = SBS j) serving a mode, None for local."""
    if mode == LOCAL:
        return None
    if mode == n_sbs + 1:
        return 0
    return mode


def local_delay(task: TaskSpec, f_local: float) -> float:
    return task.cycles / f_local


def local_energy(task: TaskSpec, f_local: float, capacitance: float) -> float:
    return capacitance * task.cycles * f_local ** 2


def offload_delay(task: TaskSpec, rate: float, f: float) -> float | None:
    if rate <= 0 or f <= 0:
        return None
    return task.bits / rate + task.cycles / f


def offload_energy(task: TaskSpec, rate: float, power_w: float, energy_per_cycle: float) -> float | None:
    if rate <= 0:
        return None
    return power_w * task.bits / rate + task.cycles * energy_per_cycle


def min_feasible_alloc(task: TaskSpec, rate: float, deadline: float | None = None) -> float | None:
    """Smallest allocation meeting the deadline: c / (deadline - d/rate)."""
    if deadline is None:
        deadline = task.deadline
    if rate <= 0:
        return None
    slack = deadline - task.bits / rate
    if slack <= 0:
        return None
    return task.cycles / slack


@dataclass
class Assignment:
    """Per-device mode, allocated cycles/s and the uplink rate it sees."""
    modes: np.ndarray
    alloc: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=int)
        self.alloc = np.asarray(self.alloc, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)

    def __len__(self):
        return len(self.modes)


def device_energy(i: int, mode: int, task: TaskSpec, rate: float, topology: Topology) -> float | None:
    dev = topology.devices[i]
    if mode == LOCAL:
        return local_energy(task, dev.local_capacity, dev.switched_capacitance)
    st = topology.stations[mode_station(mode, topology.n_sbs)]
    return offload_energy(task, rate, dev.power_mw / 1000.0, st.energy_per_cycle)


def system_energy(assignment: Assignment, topology: Topology, tasks) -> float:
    """Total energy of an assignment; None-valued terms raise."""
    if len(assignment) != len(tasks):
        raise ValueError(
            f"assignment covers {len(assignment)} devices, expected {len(tasks)}")
    total = 0.0
    for i, task in enumerate(tasks):
        e = device_energy(i, int(assignment.modes[i]), task, assignment.rates[i], topology)
        if e is None:
            raise ValueError(f"device {i} offloads over a zero-rate link")
        total += e
    return total


@dataclass
class FeasibilityReport:
    deadline: list[int] = field(default_factory=list)      # (8a)
    one_way: list[int] = field(default_factory=list)       # (8b)
    capacity: list[int] = field(default_factory=list)      # (8c) station ids
    bounds: list[int] = field(default_factory=list)        # (8d)
    binary: list[int] = field(default_factory=list)        # (8f)

    @property
    def ok(self) -> bool:
        return not (self.deadline or self.one_way or self.capacity or self.bounds or self.binary)

    def passes(self, *names: str) -> bool:
        return all(not getattr(self, n) for n in names)

    @property
    def structural_ok(self) -> bool:
        return self.passes("one_way", "capacity", "bounds", "binary")


def check_feasible(assignment: Assignment, topology: Topology, tasks,
                   decisions: np.ndarray | None = None,
                   capacities: np.ndarray | None = None, tol: float = 1e-9) -> FeasibilityReport:
    """Evaluate the problem constraints, reporting offending indices.

    ``decisions`` optionally gives the raw N x (M+2) decision matrix so that
    one-hot and integrality are checked on it rather than on ``modes``.
    """
    rep = FeasibilityReport()
    n = len(tasks)
    m = topology.n_sbs
    caps = topology.capacities if capacities is None else np.asarray(capacities)
    modes = assignment.modes

    if decisions is None:
        decisions = np.zeros((len(modes), m + 2))
        ok = (modes >= 0) & (modes <= m + 1)
        decisions[np.flatnonzero(ok), modes[ok]] = 1.0
    decisions = np.asarray(decisions, dtype=float)
    if decisions.shape != (n, m + 2) or len(modes) != n:
        raise ValueError("assignment does not match the number of devices")
    rep.binary = [i for i in range(n) if not np.all((decisions[i] == 0) | (decisions[i] == 1))]
    rep.one_way = [i for i in range(n) if decisions[i].sum() != 1
                   or not 0 <= modes[i] <= m + 1 or decisions[i, modes[i]] != 1]

    load = np.zeros(m + 1)
    for i in range(n):
        mode = int(modes[i])
        if i in rep.one_way or mode == LOCAL:
            continue
        st = mode_station(mode, m)
        f = assignment.alloc[i]
        if f < 0 or f > caps[st] * (1 + tol):
            rep.bounds.append(i)
        load[st] += f
    rep.capacity = [s for s in range(m + 1) if load[s] > caps[s] * (1 + tol)]

    for i, task in enumerate(tasks):
        if i in rep.one_way:
            continue
        mode = int(modes[i])
        if mode == LOCAL:
            delay = local_delay(task, topology.devices[i].local_capacity)
        else:
            delay = offload_delay(task, assignment.rates[i], assignment.alloc[i])
        if delay is None or delay > task.deadline * (1 + tol):
            rep.deadline.append(i)
    return rep
