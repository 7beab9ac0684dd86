"""Turn a continuous actor output into a feasible binary offloading action.

Pipeline: row normalisation -> bipartite rounding graph (one column of
virtual slots per strategy) -> maximum-weight device-covering matching ->
one-hot decisions -> capacity/deadline-aware allocation projection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compmodel import LOCAL, min_feasible_alloc, mode_station
from .netmodel import TaskSpec

TOL = 1e-12


class MatchingError(RuntimeError):
    pass


def normalize_rows(w: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Scale each row to unit sum; an all-zero row becomes uniform.

    ``mask`` (same shape, boolean) zeroes disallowed strategies first; an
    all-zero row then spreads uniformly over its allowed entries.
    """
    w = np.array(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("decision weights must be non-negative")
    if mask is None:
        mask = np.ones(w.shape, dtype=bool)
    w = np.where(mask, w, 0.0)
    sums = w.sum(axis=1, keepdims=True)
    uniform = mask / np.maximum(mask.sum(axis=1, keepdims=True), 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(sums > 0, w / sums, uniform)
    return out


@dataclass
class RoundingGraph:
    n_devices: int
    node_strategy: list[int]   # strategy column j of each virtual node
    node_slot: list[int]       # slot s (1-based) of each virtual node
    edges: list[tuple[int, int, float]]  # (device, node, weight)

    @property
    def n_nodes(self) -> int:
        return len(self.node_strategy)

    def weight_matrix(self) -> np.ndarray:
        """Dense (N, |V|) weights with NaN where there is no edge."""
        w = np.full((self.n_devices, self.n_nodes), np.nan)
        for i, v, e in self.edges:
            w[i, v] = e
        return w

    def device_load(self) -> np.ndarray:
        out = np.zeros(self.n_devices)
        for i, _, e in self.edges:
            out[i] += e
        return out

    def node_load(self) -> np.ndarray:
        out = np.zeros(self.n_nodes)
        for _, v, e in self.edges:
            out[v] += e
        return out


def _column_edges(col: np.ndarray):
    """Edges (device, slot, weight) for one strategy column."""
    total = col.sum()
    n_slots = int(math.ceil(total - TOL)) if total > TOL else 0
    if n_slots == 0:
        return 0, []
    if n_slots == 1:
        return 1, [(i, 1, float(col[i])) for i in np.flatnonzero(col > 0)]

    edges = []
    csum = np.cumsum(col)
    prev = -1  # i_{s-1}, 0-based
    for s in range(1, n_slots):
        i_s = int(np.argmax(csum >= s - TOL))
        for i in range(prev + 1, i_s):
            if col[i] > 0:
                edges.append((i, s, float(col[i])))
        before = csum[i_s - 1] if i_s > 0 else 0.0
        edges.append((i_s, s, float(min(col[i_s], s - before))))
        if csum[i_s] > s + TOL:
            edges.append((i_s, s + 1, float(csum[i_s] - s)))
        prev = i_s
    # devices after the last threshold feed the final slot
    for i in range(prev + 1, len(col)):
        if col[i] > 0:
            edges.append((i, n_slots, float(col[i])))
    return n_slots, edges


def build_rounding_graph(w: np.ndarray) -> RoundingGraph:
    w = np.asarray(w, dtype=float)
    n, k = w.shape
    node_strategy, node_slot, edges = [], [], []
    for j in range(k):
        n_slots, col_edges = _column_edges(w[:, j])
        base = len(node_strategy)
        node_strategy += [j] * n_slots
        node_slot += list(range(1, n_slots + 1))
        edges += [(i, base + s - 1, e) for i, s, e in col_edges]
    return RoundingGraph(n, node_strategy, node_slot, edges)


def hungarian_min_cost(cost: np.ndarray) -> np.ndarray:
    """Kuhn-Munkres with potentials for an n x m cost matrix, n <= m.

    Returns the column assigned to each row.  O(n^2 m).
    """
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if n > m:
        raise ValueError("more rows than columns")
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=int)    # p[j]: row (1-based) matched to column j
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            uj = used.copy()
            u[p[uj]] += delta
            v[uj] -= delta
            minv[~uj] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assign = np.full(n, -1, dtype=int)
    for j in range(1, m + 1):
        if p[j]:
            assign[p[j] - 1] = j - 1
    return assign


@dataclass
class Matching:
    pairs: list[tuple[int, int, float]]  # (device, node, weight)

    @property
    def total(self) -> float:
        return math.fsum(e for _, _, e in self.pairs)


def max_weight_complete_matching(graph: RoundingGraph) -> Matching:
    """Maximum-weight matching that covers every device, using graph edges only."""
    n = graph.n_devices
    if n == 0:
        return Matching([])
    if graph.n_nodes < n:
        raise MatchingError("fewer virtual nodes than devices")
    w = graph.weight_matrix()
    forbidden = np.isnan(w)
    # if every device's heaviest edge lands on a distinct node, that is optimal
    best = np.argmax(np.where(forbidden, -np.inf, w), axis=1)
    if not forbidden[np.arange(n), best].any() and len(set(best.tolist())) == n:
        return Matching([(i, int(v), float(w[i, v])) for i, v in enumerate(best)])
    big = 2.0 * n + 1.0
    cost = np.where(forbidden, big, -np.nan_to_num(w))
    assign = hungarian_min_cost(cost)
    pairs = []
    for i, v in enumerate(assign):
        if forbidden[i, v]:
            raise MatchingError(f"no device-covering matching (device {i} unmatched)")
        pairs.append((i, int(v), float(w[i, v])))
    return Matching(pairs)


def extract_decisions(matching: Matching, graph: RoundingGraph, n_sbs: int) -> np.ndarray:
    """One-hot N x (M+2) decision matrix [x | y | z] from a matching."""
    out = np.zeros((graph.n_devices, n_sbs + 2))
    seen = set()
    for i, v, _ in matching.pairs:
        out[i, graph.node_strategy[v]] = 1.0
        seen.add(i)
    missing = set(range(graph.n_devices)) - seen
    if missing:
        raise MatchingError(f"devices not covered by the matching: {sorted(missing)}")
    return out


def project_allocations(requests: np.ndarray, modes: np.ndarray, capacities: np.ndarray,
                        tasks, rates: np.ndarray, n_sbs: int) -> np.ndarray:
    """Capacity-feasible allocation (cycles/s) for each device's chosen station.

    ``requests`` holds the cycles/s each device asks of its chosen station
    (already extracted from f^s/f^m), ``rates`` the uplink rate to it.
    Requests are floored at the deadline-meeting minimum, then scaled down
    per station when they exceed its capacity.
    """
    n = len(modes)
    alloc = np.zeros(n)
    station_of = np.full(n, -1)
    for i in range(n):
        mode = int(modes[i])
        if mode == LOCAL:
            continue
        st = mode_station(mode, n_sbs)
        station_of[i] = st
        task = tasks[i]
        f = max(float(requests[i]), 0.0)
        if task.cycles > 0:
            floor = min_feasible_alloc(task, rates[i], task.deadline) if task.deadline > 0 else None
            if floor is not None:
                f = max(f, floor)
        else:
            f = 0.0
        alloc[i] = f
    for st in range(n_sbs + 1):
        members = station_of == st
        load = alloc[members].sum()
        if load > capacities[st]:
            alloc[members] *= capacities[st] / load
            # guard against round-up past capacity
            while alloc[members].sum() > capacities[st]:
                alloc[members] = np.nextafter(alloc[members], 0.0)
    return alloc


@dataclass
class RefinedAction:
    decisions: np.ndarray   # one-hot N x (M+2)
    fs: np.ndarray          # (N, M) cycles/s
    fm: np.ndarray          # (N,) cycles/s

    @property
    def modes(self) -> np.ndarray:
        return self.decisions.argmax(axis=1)

    @property
    def x(self):
        return self.decisions[:, 0]

    @property
    def y(self):
        return self.decisions[:, 1:-1]

    @property
    def z(self):
        return self.decisions[:, -1]

    def allocations(self) -> np.ndarray:
        """Per-device allocation at its chosen station (0 for local)."""
        n_sbs = self.fs.shape[1]
        modes = self.modes
        out = np.zeros(len(modes))
        for i, mode in enumerate(modes):
            st = mode_station(int(mode), n_sbs)
            if st is None:
                continue
            out[i] = self.fm[i] if st == 0 else self.fs[i, st - 1]
        return out

    def is_binary(self) -> bool:
        d = self.decisions
        return bool(np.all((d == 0) | (d == 1)) and np.all(d.sum(axis=1) == 1))


def residual_tasks(state) -> list[TaskSpec]:
    """TaskSpec view of a state's residual work (deadline = remaining time)."""
    return [_Residual(float(b), float(c), float(t)) for b, c, t in zip(state.d, state.c, state.tau)]


@dataclass(frozen=True)
class _Residual:
    bits: float
    cycles: float
    deadline: float


def refine(raw_w: np.ndarray, raw_fs: np.ndarray, raw_fm: np.ndarray, state,
           capacities: np.ndarray, coverage: np.ndarray | None = None) -> RefinedAction:
    """Full refinement of one raw action.

    ``raw_w`` is the N x (M+2) slice [x | y | z] in [0, 1]; ``raw_fs`` and
    ``raw_fm`` are requested cycles/s.  ``state`` supplies residual work,
    remaining time and the current rates (fields d, c, tau, rs, rm).
    ``coverage`` (N, M) masks SBS columns a device cannot reach.
    """
    raw_w = np.asarray(raw_w, dtype=float)
    n, k = raw_w.shape
    n_sbs = k - 2
    mask = np.ones((n, k), dtype=bool)
    if coverage is not None:
        mask[:, 1:-1] = coverage
    w = normalize_rows(raw_w, mask)
    graph = build_rounding_graph(w)
    matching = max_weight_complete_matching(graph)
    decisions = extract_decisions(matching, graph, n_sbs)
    modes = decisions.argmax(axis=1)

    rates = np.zeros(n)
    requests = np.zeros(n)
    for i, mode in enumerate(modes):
        st = mode_station(int(mode), n_sbs)
        if st is None:
            continue
        if st == 0:
            rates[i], requests[i] = state.rm[i], raw_fm[i]
        else:
            rates[i], requests[i] = state.rs[i, st - 1], raw_fs[i, st - 1]
    alloc = project_allocations(requests, modes, capacities, residual_tasks(state), rates, n_sbs)

    fs = np.zeros((n, n_sbs))
    fm = np.zeros(n)
    for i, mode in enumerate(modes):
        st = mode_station(int(mode), n_sbs)
        if st == 0:
            fm[i] = alloc[i]
        elif st is not None:
            fs[i, st - 1] = alloc[i]
    return RefinedAction(decisions, fs, fm)
