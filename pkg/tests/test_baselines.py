import itertools
import math

import numpy as np
import pytest

from edgeoffload.baselines import (EnumerationLimit, exhaustive_oracle, full_offload_policy,
                                   full_offload_rates, local_policy, random_policy)
from edgeoffload.compmodel import Assignment, check_feasible, min_feasible_alloc, mode_station, system_energy
from edgeoffload.netmodel import ChannelParams, TaskSpec, TopologyConfig, build_topology, rate_matrices


def topo(n, m, seed=0, kappa=1e-27, **kw):
    cfg = dict(n_sbs=m, n_devices=n, mbs_radius=200, sbs_radius=60, switched_capacitance=kappa, **kw)
    return build_topology(TopologyConfig(**cfg), seed)


class TestLocal:
    def test_feasible_single(self):
        res = local_policy([TaskSpec(0, 0.4e9, 1.0)], topo(1, 0))
        assert res.feasible
        assert math.isclose(res.energy, 1e-27 * 0.4e9 * 0.5e9 ** 2, rel_tol=1e-12)

    def test_deadline_infeasible(self):
        res = local_policy([TaskSpec(0, 1e9, 1.0)], topo(1, 0))
        assert not res.feasible and res.report.deadline == [0]

    def test_empty(self):
        res = local_policy([], topo(1, 0))
        assert res.energy == 0.0 and len(res.assignment) == 0


class TestFullOffload:
    def test_equal_split(self):
        t = topo(2, 1)
        res = full_offload_policy([TaskSpec(1e6, 1e9, 1.0)] * 2, t, np.full(2, 1e7))
        assert np.array_equal(res.assignment.alloc, [25e9, 25e9])
        assert np.all(res.assignment.modes == 2)

    def test_proportional(self):
        t = topo(2, 1)
        res = full_offload_policy([TaskSpec(1e6, 1e9, 1.0), TaskSpec(1e6, 3e9, 1.0)], t, np.full(2, 1e7))
        assert math.isclose(res.assignment.alloc[1] / res.assignment.alloc[0], 3.0)

    def test_single_gets_everything(self):
        res = full_offload_policy([TaskSpec(1e6, 1e9, 1.0)], topo(1, 1), np.array([1e7]))
        assert res.assignment.alloc[0] == 50e9

    def test_shared_rates(self):
        t = topo(4, 1)
        shared = full_offload_rates(t, ChannelParams())
        _, alone = rate_matrices(t, ChannelParams())
        assert np.allclose(shared, alone / 4)


def test_random_policy_range(rng):
    a = random_policy(50, rng)
    assert a.shape == (50,) and np.all((a >= 0) & (a <= 1))


class TestOracle:
    def test_local_when_cheapest(self):
        t = topo(1, 0)
        res = exhaustive_oracle([TaskSpec(0, 0.4e9, 1.0)], t, np.zeros((1, 0)), np.array([4e7]))
        assert res.assignment.modes[0] == 0

    def test_sbs_when_local_too_slow(self):
        t = topo(1, 1)
        res = exhaustive_oracle([TaskSpec(1e6, 1e9, 1.0)], t, np.array([[1e8]]), np.array([0.0]))
        assert res.feasible and res.assignment.modes[0] == 1

    def test_infeasible_flag(self):
        t = topo(1, 1)
        res = exhaustive_oracle([TaskSpec(1e9, 1e9, 1.0)], t, np.array([[1e7]]), np.array([1e7]))
        assert not res.feasible and res.assignment is None

    def test_cap_refusal_names_count(self):
        t = topo(10, 5)
        with pytest.raises(EnumerationLimit, match=str(7 ** 10)):
            exhaustive_oracle([TaskSpec(1e6, 1e9, 1.0)] * 10, t, np.ones((10, 5)), np.ones(10))

    def test_empty(self):
        assert exhaustive_oracle([], topo(1, 1), np.zeros((0, 1)), np.zeros(0)).energy == 0.0


def brute_force(tasks, t, rs, rm):
    """Independent enumeration through compmodel's own feasibility check."""
    n, m = len(tasks), t.n_sbs
    best = math.inf
    for modes in itertools.product(range(m + 2), repeat=n):
        alloc, rates = np.zeros(n), np.zeros(n)
        ok = True
        for i, md in enumerate(modes):
            st = mode_station(md, m)
            if st is None:
                continue
            rates[i] = rm[i] if st == 0 else rs[i, st - 1]
            f = min_feasible_alloc(tasks[i], rates[i])
            if f is None:
                ok = False
                break
            alloc[i] = f
        if not ok:
            continue
        a = Assignment(np.array(modes), alloc, rates)
        if check_feasible(a, t, tasks).ok:
            best = min(best, system_energy(a, t, tasks))
    return best


def random_instance(rng, seed):
    n, m = int(rng.integers(1, 5)), int(rng.integers(0, 3))
    t = topo(n, m, seed=seed, kappa=6e-27, sbs_capacity=float(rng.choice([2e9, 10e9])))
    tasks = [TaskSpec(float(rng.uniform(0.5, 5) * 8e6), float(rng.uniform(0.2, 3) * 1e9), 1.0)
             for _ in range(n)]
    rs, rm = rate_matrices(t, ChannelParams())
    return t, tasks, rs, rm


def test_oracle_matches_independent_enumeration():
    rng = np.random.default_rng(21)
    for seed in range(40):
        t, tasks, rs, rm = random_instance(rng, seed)
        res = exhaustive_oracle(tasks, t, rs, rm)
        ref = brute_force(tasks, t, rs, rm)
        if math.isinf(ref):
            assert not res.feasible
        else:
            assert math.isclose(res.energy, ref, rel_tol=1e-12)
            assert check_feasible(res.assignment, t, tasks).ok


def test_baselines_structurally_valid():
    rng = np.random.default_rng(3)
    for seed in range(20):
        t, tasks, rs, rm = random_instance(rng, seed)
        for res in (local_policy(tasks, t), full_offload_policy(tasks, t, full_offload_rates(t, ChannelParams()))):
            assert res.report.passes("one_way", "bounds", "binary")
