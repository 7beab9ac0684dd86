"""Reference policies and an exhaustive solver for small instances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compmodel import (LOCAL, Assignment, FeasibilityReport, check_feasible, local_energy,
                        mbs_mode, min_feasible_alloc, offload_energy, system_energy)
from .netmodel import ChannelParams, Topology, rate_matrices

ORACLE_CAP = 1_000_000


class EnumerationLimit(ValueError):
    pass


@dataclass
class PolicyResult:
    assignment: Assignment
    energy: float
    report: FeasibilityReport

    @property
    def feasible(self) -> bool:
        return self.report.ok


def _result(assignment, topology, tasks) -> PolicyResult:
    energy = system_energy(assignment, topology, tasks) if len(tasks) else 0.0
    return PolicyResult(assignment, energy, check_feasible(assignment, topology, tasks))


def local_policy(tasks, topology: Topology) -> PolicyResult:
    n = len(tasks)
    a = Assignment(np.zeros(n, dtype=int), np.zeros(n), np.zeros(n))
    return _result(a, topology, tasks)


def full_offload_rates(topology: Topology, chan: ChannelParams) -> np.ndarray:
    """MBS rates when every device uploads at once."""
    n = topology.n_devices
    _, rm = rate_matrices(topology, chan, np.zeros(n, dtype=int), max(n, 1))
    return rm


def full_offload_policy(tasks, topology: Topology, rates: np.ndarray) -> PolicyResult:
    """Everything to the MBS; its capacity is split in proportion to task cycles."""
    n = len(tasks)
    cycles = np.array([t.cycles for t in tasks], dtype=float)
    f0 = topology.capacities[0]
    alloc = f0 * cycles / cycles.sum() if n else np.zeros(0)
    modes = np.full(n, mbs_mode(topology.n_sbs), dtype=int)
    return _result(Assignment(modes, alloc, np.asarray(rates, dtype=float)), topology, tasks)


def random_policy(action_dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 1.0, action_dim)


@dataclass
class OracleResult:
    assignment: Assignment | None
    energy: float
    feasible: bool
    count: int


def mode_tables(tasks, topology: Topology, rs: np.ndarray, rm: np.ndarray):
    """Per-device, per-mode energy, minimum allocation and serving station.

    Infeasible (device, mode) pairs get infinite energy.  Local pairs have
    zero allocation and station -1.
    """
    n = len(tasks)
    m = topology.n_sbs
    energy = np.full((n, m + 2), np.inf)
    alloc = np.zeros((n, m + 2))
    rate = np.zeros((n, m + 2))
    station = np.array([-1] + list(range(1, m + 1)) + [0])
    for i, task in enumerate(tasks):
        dev = topology.devices[i]
        if task.cycles / dev.local_capacity <= task.deadline:
            energy[i, LOCAL] = local_energy(task, dev.local_capacity, dev.switched_capacitance)
        for mode in range(1, m + 2):
            st = station[mode]
            r = rm[i] if st == 0 else rs[i, st - 1]
            f = min_feasible_alloc(task, r, task.deadline)
            if f is None or f > topology.capacities[st]:
                continue
            energy[i, mode] = offload_energy(task, r, dev.power_mw / 1000.0,
                                             topology.stations[st].energy_per_cycle)
            alloc[i, mode] = f
            rate[i, mode] = r
    return energy, alloc, rate, station


def exhaustive_oracle(tasks, topology: Topology, rs: np.ndarray, rm: np.ndarray,
                      cap: int = ORACLE_CAP, chunk: int = 1 << 15) -> OracleResult:
    """Minimum-energy feasible assignment by enumerating every mode vector.

    Allocations are the deadline-meeting minima, which is enough because
    energy does not depend on the allocation.  Ties go to the first vector
    in lexicographic order.
    """
    n = len(tasks)
    m = topology.n_sbs
    k = m + 2
    total = k ** n
    if total > cap:
        raise EnumerationLimit(f"{total} assignments exceed the cap of {cap}")
    if n == 0:
        return OracleResult(Assignment([], [], []), 0.0, True, 1)
    energy, alloc, rate, station = mode_tables(tasks, topology, rs, rm)
    caps = topology.capacities
    idx = np.arange(n)
    powers = k ** np.arange(n - 1, -1, -1)

    best_e, best_code = np.inf, -1
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        modes = (codes[:, None] // powers[None, :]) % k          # (B, N)
        e = energy[idx[None, :], modes].sum(axis=1)
        a = alloc[idx[None, :], modes]
        st = station[modes]
        ok = np.isfinite(e)
        for s in range(m + 1):
            ok &= (a * (st == s)).sum(axis=1) <= caps[s]
        if not ok.any():
            continue
        e = np.where(ok, e, np.inf)
        j = int(np.argmin(e))
        if e[j] < best_e:
            best_e, best_code = float(e[j]), int(codes[j])

    if best_code < 0:
        return OracleResult(None, np.inf, False, total)
    modes = (best_code // powers) % k
    assignment = Assignment(modes, alloc[idx, modes], rate[idx, modes])
    return OracleResult(assignment, system_energy(assignment, topology, tasks), True, total)
