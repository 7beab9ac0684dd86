"""Acceptance suite: one PASS/FAIL line per criterion in the terminal summary.

Criteria 9 to 12 train the desk profile (several minutes per seed) and are
marked ``slow``; deselect them with ``-m "not slow"``.
"""
import functools
import math
import time

import numpy as np
import pytest

from acceptance_log import report
from edgeoffload.baselines import exhaustive_oracle, full_offload_policy, full_offload_rates, local_policy
from edgeoffload.compmodel import (Assignment, check_feasible, local_delay, local_energy, offload_delay,
                                   offload_energy)
from edgeoffload.config import load_profile
from edgeoffload.ddpg import ReplayMemory, soft_update
from edgeoffload.netmodel import (ChannelParams, TaskSpec, TopologyConfig, build_topology, rate_matrices,
                                  shannon_rate, uplink_rate_sbs)
from edgeoffload.refine import build_rounding_graph, extract_decisions, max_weight_complete_matching, refine
from edgeoffload.runner import bandwidth_switch_experiment, build_problem, run_experiment
from edgeoffload.ddpg import train
from test_ddpg import gradient_errors, scalar_agent
from test_netmodel import line_topology
from test_refine import brute_force_max, make_state, random_stochastic

SEEDS = range(5)


def rel(a, b):
    return abs(a - b) / abs(b)


def test_formula_exactness():
    cases = {
        "local_delay": (local_delay(TaskSpec(0, 2.5e9, 1), 0.5e9), 5.0),
        "local_energy": (local_energy(TaskSpec(0, 1e9, 1), 0.5e9, 1e-27), 0.25),
        "offload_delay": (offload_delay(TaskSpec(4e7, 1e9, 1), 4e7, 2e9), 1.5),
        "offload_energy": (offload_energy(TaskSpec(4e7, 1e9, 1), 4e7, 0.1, 1e-9), 1.1),
    }
    worst = max(rel(got, want) for got, want in cases.values())
    ok = worst <= 1e-9
    report(1, "delay and energy formulas", ok, f"max rel err {worst:.1e}")
    assert ok


def test_rate_exactness():
    # SNR 1600: 100 mW at 50 m, path-loss exponent 4, noise 1e-8 mW
    r = uplink_rate_sbs(0, 1, line_topology([[50.0]], radii=(80.0,)), ChannelParams(noise_mw=1e-8))
    err = rel(r, 5e6 * math.log2(1601.0))
    exact = shannon_rate(1e7, 1023.0, 1.0) == 1e8
    ok = err <= 1e-9 and exact and rel(r, 5.3224e7) < 1e-4
    report(2, "uplink rate vectors", ok, f"SNR-1600 rate {r:.6e} (rel err {err:.1e}), SNR-1023 exact={exact}")
    assert ok


def test_gradient_correctness():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        worst = max(worst, *gradient_errors(1000 + seed, with_head=bool(seed % 2)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and elapsed < 30
    report(3, "analytic vs finite-difference gradients", ok, f"50 nets, max rel err {worst:.1e}, {elapsed:.1f}s")
    assert ok


def test_matching_oracle_equivalence():
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        g = build_rounding_graph(random_stochastic(rng, int(rng.integers(1, 8)), int(rng.integers(2, 5))))
        if max_weight_complete_matching(g).total != brute_force_max(g):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    report(4, "Hungarian matching equals brute force", ok, f"200 graphs, {mismatches} mismatches, {elapsed:.1f}s")
    assert ok


def test_rounding_invariants():
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(500):
        n, m = int(rng.integers(1, 21)), int(rng.integers(0, 6))
        w = random_stochastic(rng, n, m + 2)
        g = build_rounding_graph(w)
        dec = extract_decisions(max_weight_complete_matching(g), g, m)
        good = (np.all(dec.sum(axis=1) == 1)
                and np.all(w[dec == 1] > 0)
                and np.all(dec.sum(axis=0) <= np.ceil(w.sum(axis=0) - 1e-12))
                and np.all(g.node_load() <= 1.0 + 1e-12))
        bad += not good
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 10
    report(5, "rounding invariants", ok, f"500 matrices, {bad} violations, {elapsed:.1f}s")
    assert ok


def test_refinement_feasibility():
    rng = np.random.default_rng(606)
    topo = build_topology(TopologyConfig(n_sbs=3, n_devices=8, mbs_radius=250, sbs_radius=60), 6)
    caps = topo.capacities
    violations = 0
    for _ in range(1000):
        tasks = [TaskSpec(float(rng.uniform(0, 4e8)), float(rng.uniform(5e8, 5e9)), 1.0) for _ in range(8)]
        state = make_state(rng, 8, 3, tasks)
        raw = rng.random((8, 5)) * (rng.random((8, 5)) > 0.3)
        out = refine(raw, rng.random((8, 3)) * caps[None, 1:], rng.random(8) * caps[0], state, caps,
                     topo.coverage_mask)
        modes = out.modes
        a = Assignment(modes, out.allocations(), np.where(modes == 4, state.rm, 0.0))
        rep = check_feasible(a, topo, tasks, decisions=out.decisions)
        served = (modes >= 1) & (modes <= 3)
        covered = np.all(topo.coverage_mask[served, modes[served] - 1])
        violations += not (rep.passes("one_way", "capacity", "bounds", "binary") and covered)
    ok = violations == 0
    report(6, "refined actions are feasible", ok, f"1000 raw actions, {violations} violations")
    assert ok


def test_exact_mechanics():
    checks = {}
    for omega, expect in ((1.0, 1.0), (0.0, 0.0), (0.01, 0.01)):
        ag = scalar_agent(1.0, 0.0)
        soft_update(ag, omega)
        checks[f"soft_update({omega})"] = all(
            p[0].ravel()[0] == expect for p in (ag.target_actor.weights, ag.target_critic.biases))
    mem = ReplayMemory(2, 1, 1)
    for v in (1.0, 2.0, 3.0):
        mem.push(np.full(1, v), np.full(1, v), v, np.full(1, v), False)
    checks["fifo"] = [t[2] for t in mem.transitions()] == [2.0, 3.0]
    cfg = load_profile("desk").replace("train", episodes=5, hidden=(16,))
    runs = [train(build_problem(cfg), cfg.train, seed=3) for _ in range(2)]
    checks["bit-identical"] = runs[0].returns == runs[1].returns and all(
        np.array_equal(p, q) for p, q in zip(runs[0].agent.actor.params(), runs[1].agent.actor.params()))
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    report(7, "soft update, replay eviction, seeded training", ok, "all exact" if ok else f"failed: {failed}")
    assert ok


def test_oracle_sandwich():
    rng = np.random.default_rng(808)
    chan = ChannelParams()
    counter, compared = 0, 0
    t0 = time.perf_counter()
    for k in range(50):
        topo = build_topology(TopologyConfig(n_sbs=2, n_devices=4, mbs_radius=250, sbs_radius=70), k)
        # small tasks, so both baselines are often feasible and the comparison is not vacuous
        tasks = [TaskSpec(float(rng.uniform(0.1, 5) * 8e6), float(rng.uniform(0.05, 0.5) * 1e9), 1.0)
                 for _ in range(4)]
        rs, rm = rate_matrices(topo, ChannelParams(mbs_sharing="full"))
        orc = exhaustive_oracle(tasks, topo, rs, rm)
        for res in (local_policy(tasks, topo), full_offload_policy(tasks, topo, full_offload_rates(topo, chan))):
            if res.feasible:
                compared += 1
                counter += not (orc.feasible and orc.energy <= res.energy * (1 + 1e-12))
    elapsed = time.perf_counter() - t0
    ok = counter == 0 and compared > 0 and elapsed < 60
    report(8, "oracle below feasible baselines", ok,
           f"50 instances, {compared} feasible baseline comparisons, {counter} counterexamples, {elapsed:.1f}s")
    assert ok


# ------------------------------------------------------------ trained behaviour

@functools.lru_cache(maxsize=None)
def trained(seed, kind="mixed", lr=1e-3):
    cfg = load_profile("desk").with_overrides(seed=seed)
    cfg = cfg.replace("tasks", kind=kind).replace("train", actor_lr=lr, critic_lr=lr)
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    res.elapsed = time.perf_counter() - t0
    return res


def energies(res):
    return {name: st.mean_energy for name, st in res.evaluation.items()}


def beats_baselines(res, slack=1.0):
    e = energies(res)
    return res.diverged is None and e["proposed"] < slack * min(e["local"], e["full-offload"])


@pytest.mark.slow
def test_beats_baselines():
    wins, parts = 0, []
    for seed in SEEDS:
        res = trained(seed)
        e = energies(res)
        win = beats_baselines(res)
        wins += win
        parts.append(f"s{seed} {e['proposed']:.1f}/{e['local']:.1f}/{e['full-offload']:.1f}"
                     f"{'' if win else '(x)'} {res.elapsed / 60:.1f}min")
    ok = wins >= 4
    report(9, "trained policy below both baselines", ok,
           f"{wins}/5 seeds; proposed/local/full-offload J: " + ", ".join(parts))
    assert ok


@pytest.mark.slow
def test_per_type_ordering():
    summary, ok = [], True
    for kind in (1, 2, 3):
        hits = 0
        for seed in SEEDS:
            res = trained(seed, kind)
            e = energies(res)
            if kind == 2:
                hit = (res.diverged is None and e["local"] <= min(e["full-offload"], e["proposed"])
                       and e["proposed"] <= 1.25 * e["local"])
            else:
                hit = res.diverged is None and e["proposed"] <= min(e["local"], e["full-offload"])
            hits += hit
        summary.append(f"type {kind}: {hits}/5")
        ok &= hits >= 4
    report(10, "per-type ordering", ok, ", ".join(summary))
    assert ok


@pytest.mark.slow
def test_convergence():
    good, fast = trained(0), trained(0, lr=1e-2)
    threshold = good.cfg.experiment.convergence_gap
    good_ok = good.converged(threshold)
    fast_flagged = not fast.converged(threshold)
    ok = good_ok and fast_flagged
    report(11, "convergence statistic", ok,
           f"lr 1e-3 gap {good.gap:.3f} (needs >= {threshold}), lr 1e-2 gap {fast.gap:.3f}"
           f"{' diverged' if fast.diverged else ''} (needs < {threshold})")
    assert ok


@pytest.mark.slow
def test_bandwidth_switch():
    wins, parts = 0, []
    for seed in SEEDS:
        cfg = load_profile("desk").with_overrides(seed=seed)
        res = bandwidth_switch_experiment(cfg, switch_episode=cfg.train.episodes // 2, factor=10.0)
        wins += res.improved
        parts.append(f"s{seed} {res.phase1_plateau:.2f}->{res.phase2_plateau:.2f}")
    ok = wins >= 4
    report(12, "higher plateau after bandwidth switch", ok, f"{wins}/5 seeds; " + ", ".join(parts))
    assert ok
