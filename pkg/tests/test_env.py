import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeoffload.env import (EpisodeConfig, OffloadEnv, action_dim, episode_return, flatten_state,
                             interpret_action, state_dim)
from edgeoffload.netmodel import ChannelParams, TaskSpec, TopologyConfig, build_topology
from edgeoffload.refine import RefinedAction, refine


def make_env(n=2, m=1, seed=0, placement="uniform", **episode):
    topo = build_topology(TopologyConfig(n_sbs=m, n_devices=n, mbs_radius=200, sbs_radius=60,
                                         switched_capacitance=1e-27, placement=placement,
                                         hotspot_fraction=1.0), seed)
    return OffloadEnv(topo, ChannelParams(), EpisodeConfig(**episode))


def action(modes, alloc, m):
    n = len(modes)
    dec = np.zeros((n, m + 2))
    dec[np.arange(n), modes] = 1.0
    fs = np.zeros((n, m))
    fm = np.zeros(n)
    for i, (md, f) in enumerate(zip(modes, alloc)):
        if md == m + 1:
            fm[i] = f
        elif md > 0:
            fs[i, md - 1] = f
    return RefinedAction(dec, fs, fm)


class TestEncoding:
    def test_dims(self):
        assert state_dim(2, 1) == 12 and state_dim(100, 10) == 1411
        assert action_dim(2, 1) == 10

    def test_reset_layout(self):
        env = make_env()
        s = env.reset([TaskSpec(1e6, 1e9, 1.0)] * 2, seed=3)
        assert s.F.shape == (2,) and np.array_equal(s.F, env.capacities)
        assert np.all(s.tau == 1.0)

    def test_reset_deterministic(self):
        env = make_env()
        env.chan = ChannelParams(gain_model="rayleigh")
        a = env.reset([TaskSpec(1e6, 1e9, 1.0)] * 2, seed=5)
        b = env.reset([TaskSpec(1e6, 1e9, 1.0)] * 2, seed=5)
        assert np.array_equal(a.rs, b.rs) and np.array_equal(a.rm, b.rm)

    def test_reset_dimension_mismatch(self):
        with pytest.raises(ValueError):
            make_env().reset([TaskSpec(1e6, 1e9, 1.0)] * 3)

    def test_zero_state_flattens_to_zero(self):
        env = make_env()
        s = env.reset([TaskSpec(1e6, 1e9, 1.0)] * 2, seed=0)
        for name in ("d", "c", "tau", "rs", "rm", "F"):
            getattr(s, name)[...] = 0.0
        assert np.array_equal(flatten_state(s, env.scales(1e6, 1e9, 1.0)), np.zeros(12))

    def test_interpret_action(self):
        caps = np.array([50e9, 10e9])
        raw = np.zeros(10)
        raw[6] = 0.5   # f^s of device 0 at SBS 1
        act = interpret_action(raw, 2, 1, caps)
        assert act.fs[0, 0] == 5e9 and act.fm.sum() == 0
        assert not interpret_action(np.zeros(10), 2, 1, caps).fs.any()
        with pytest.raises(ValueError):
            interpret_action(np.zeros(9), 2, 1, caps)


class TestDynamics:
    def test_two_local_devices_reward(self):
        env = make_env(slot_length=1.0)
        env.reset([TaskSpec(0, 1e9, 2.0)] * 2)
        s, r, done, info = env.step(action([0, 0], [0, 0], 1))
        assert math.isclose(r, -0.25, rel_tol=1e-12)
        assert np.allclose(s.c, [0.5e9, 0.5e9]) and not done

    def test_local_clamps(self):
        env = make_env(slot_length=1.0)
        env.reset([TaskSpec(1e6, 0.1e9, 1.0)] * 2)
        s, _, done, _ = env.step(action([0, 0], [0, 0], 1))
        assert np.all(s.c == 0) and np.all(s.d == 0) and done

    def test_partial_local_keeps_input(self):
        env = make_env(slot_length=0.05, placement="hotspot")
        env.reset([TaskSpec(8e6, 1e9, 1.0)] * 2)
        s, _, _, _ = env.step(action([0, 0], [0, 0], 1))
        assert np.all(s.d == 8e6) and np.allclose(s.c, 1e9 - 0.5e9 * 0.05)

    def test_local_clears_input_option(self):
        env = make_env(slot_length=0.05, local_clears_input=True)
        env.reset([TaskSpec(8e6, 1e9, 1.0)] * 2)
        s, _, _, _ = env.step(action([0, 0], [0, 0], 1))
        assert np.all(s.d == 0)

    def test_capacity_reduction(self):
        env = make_env(slot_length=0.05, capacity_mode="cumulative", placement="hotspot")
        env.reset([TaskSpec(1e6, 1e9, 1.0)] * 2)
        s, _, _, _ = env.step(action([1, 0], [2e9, 0], 1))
        assert s.F[1] == 8e9 and s.F[0] == 50e9

    def test_breach_penalty_once(self):
        env = make_env(slot_length=0.5, max_steps=4)
        env.reset([TaskSpec(0, 5e9, 1.0), TaskSpec(0, 1e6, 1.0)])
        rs = [env.step(action([0, 0], [0, 0], 1))[3].penalty for _ in range(3)]
        assert rs == [0.0, 200.0, 0.0]

    def test_penalty_scales_with_n(self):
        assert make_env(n=100, m=1, seed=0).penalty == 10000.0

    def test_episode_end_penalty(self):
        env = make_env(slot_length=0.5, max_steps=2, penalty_mode="episode_end")
        env.reset([TaskSpec(0, 5e9, 1.0), TaskSpec(0, 1e6, 1.0)])
        first = env.step(action([0, 0], [0, 0], 1))
        second = env.step(action([0, 0], [0, 0], 1))
        assert first[3].penalty == 0.0 and second[3].penalty == 200.0 and second[2]

    def test_fractional_rejected(self):
        env = make_env()
        env.reset([TaskSpec(1e6, 1e9, 1.0)] * 2)
        bad = RefinedAction(np.full((2, 3), 1 / 3), np.zeros((2, 1)), np.zeros(2))
        with pytest.raises(ValueError):
            env.step(bad)

    def test_over_capacity_rejected(self):
        env = make_env()
        env.reset([TaskSpec(1e6, 1e9, 1.0)] * 2)
        with pytest.raises(ValueError):
            env.step(action([1, 1], [6e9, 6e9], 1))

    def test_uncovered_sbs_rejected(self):
        env = make_env(n=30)
        i = int(np.flatnonzero(~env.topology.coverage_mask[:, 0])[0])
        env.reset([TaskSpec(1e6, 1e9, 1.0)] * 30)
        modes = [0] * 30
        modes[i] = 1
        with pytest.raises(ValueError):
            env.step(action(modes, [1e9 if k == i else 0 for k in range(30)], 1))

    def test_step_before_reset(self):
        with pytest.raises(RuntimeError):
            make_env().step(action([0, 0], [0, 0], 1))

    def test_preview_does_not_commit(self):
        env = make_env()
        env.reset([TaskSpec(1e6, 1e9, 1.0)] * 2)
        before = env.state.copy()
        env.preview(env.state, action([0, 2], [0, 1e9], 1))
        assert np.array_equal(env.state.c, before.c) and env.state.t == 0

    def test_savings_is_residual_minus_local(self):
        acts = action([2, 0], [5e9, 0], 1)
        out = {}
        for mode in ("residual", "savings"):
            env = make_env(reward_mode=mode)
            env.reset([TaskSpec(1e7, 1e9, 1.0), TaskSpec(0, 2e9, 1.0)])
            out[mode] = env.step(acts)[1]
        local_ref = 1e-27 * 0.5e9 ** 2 * 3e9
        assert math.isclose(out["savings"], out["residual"] + local_ref, rel_tol=1e-12)


class TestReturn:
    def test_examples(self):
        assert episode_return([-3.0, -5.0], 0.0) == -3.0
        assert episode_return([-1, -1, -1], 1.0) == -3.0
        assert math.isclose(episode_return([-1, -1], 0.6), -1.6)
        assert episode_return([], 0.6) == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_trajectory_invariants(seed):
    rng = np.random.default_rng(seed)
    env = make_env(n=4, m=2, seed=seed % 5)
    tasks = [TaskSpec(float(rng.uniform(0, 4e7)), float(rng.uniform(1e8, 3e9)), 1.0) for _ in range(4)]
    s = env.reset(tasks, seed=seed)
    caps = env.capacities
    done = False
    while not done:
        raw = rng.random((4, 4))
        act = refine(raw, rng.random((4, 2)) * caps[1:], rng.random(4) * caps[0], s, caps,
                     env.topology.coverage_mask)
        again = env.preview(s, act)
        nxt, r, done, info = env.step(act)
        assert np.array_equal(again[0].c, nxt.c) and again[1] == r
        assert r <= 0.0
        assert np.all(nxt.c <= s.c) and np.all(nxt.d <= s.d)
        live = ~s.done_mask
        assert np.allclose(nxt.tau[live], np.maximum(s.tau[live] - 0.05, 0.0))
        assert np.all(nxt.F >= 0)
        if r == 0.0:
            assert info.energy == 0.0 and info.penalty == 0.0
        s = nxt
