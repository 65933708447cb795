import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from hideseek.envs import make_env, reset_with_retry
from hideseek.envs.observation import ENTITY_DIMS, Observation
from hideseek.explore import (
    CountEmbedder,
    CountIntrinsic,
    CountTable,
    RND_DIM,
    RNDPair,
    count_reward,
    discretize,
    make_intrinsic,
    movement_report,
    quarter_arena,
)
from hideseek.explore.count import N_BINS, RANGES
from hideseek.policy import PolicyConfig

from test_policy import random_obs


def box_obs(rng, n_boxes=4):
    o = random_obs(rng, {"agent": 2, "box": n_boxes, "ramp": 1})
    lo = np.array([r[0] for r in RANGES["box"]])
    hi = np.array([r[1] for r in RANGES["box"]])
    o.entities["box"] = (lo + rng.random((n_boxes, len(lo))) * (hi - lo)).astype(np.float32)
    return o


def test_count_reward_formula_exact():
    table = CountTable()
    for n in range(1, 10_001):
        assert count_reward(table, b"k") == 0.1 / math.sqrt(n)
    fresh = CountTable()
    assert count_reward(fresh, b"a") == 0.1
    for _ in range(3):
        r = count_reward(fresh, b"a")
    assert r == pytest.approx(0.05)


def test_count_rewards_strictly_decrease():
    table = CountTable()
    rs = [count_reward(table, b"s") for _ in range(50)]
    assert all(a > b for a, b in zip(rs, rs[1:]))


@pytest.mark.parametrize("selector", ["box2d", "boxfull", "full"])
def test_key_deterministic_and_seeded(selector):
    rng = np.random.default_rng(0)
    o = box_obs(rng)
    a, b = CountEmbedder(selector, seed=3), CountEmbedder(selector, seed=3)
    assert a.key(o) == b.key(o)
    for block, tab in a.tables.items():
        assert np.array_equal(tab, b.tables[block])
        assert tab.min() >= 0 and tab.max() <= 9 and tab.shape[1:] == (N_BINS, 16)
    assert any(not np.array_equal(a.tables[k], CountEmbedder(selector, seed=4).tables[k])
               for k in a.tables)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["box2d", "boxfull", "full"]))
def test_key_permutation_invariance(seed, selector):
    rng = np.random.default_rng(seed)
    o = box_obs(rng, n_boxes=int(rng.integers(1, 8)))
    e = CountEmbedder(selector, seed=1)
    perm = rng.permutation(len(o.entities["box"]))
    o2 = Observation(o.self_feat, o.lidar, dict(o.entities, box=o.entities["box"][perm]),
                     dict(o.visible, box=o.visible["box"][perm]))
    assert e.key(o) == e.key(o2)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_key_stable_within_bin(seed):
    """Oracle: moving every value to another point of its own bin leaves the key unchanged."""
    rng = np.random.default_rng(seed)
    e = CountEmbedder("boxfull", seed=0)
    o = box_obs(rng)
    cols = list(e.columns["box"])
    r = np.array([RANGES["box"][c] for c in cols])
    lo, hi = r[:, 0], r[:, 1]
    vals = o.entities["box"][:, cols].astype(np.float64)
    idx = discretize(vals, lo, hi)
    width = (hi - lo) / N_BINS
    # a fresh point strictly inside the same bin, away from both edges
    inner = lo + (idx + 0.05 + 0.9 * rng.random(idx.shape)) * width
    moved = o.entities["box"].copy()
    moved[:, cols] = inner
    o2 = Observation(o.self_feat, o.lidar, dict(o.entities, box=moved.astype(np.float32)),
                     o.visible)
    moved64 = moved[:, cols].astype(np.float32).astype(np.float64)
    assert np.array_equal(discretize(moved64, lo, hi), idx)
    assert e.key(o) == e.key(o2)


def test_out_of_range_values_clamp_to_edge_bins():
    lo, hi = np.array([0.0]), np.array([1.0])
    assert discretize(np.array([[-5.0]]), lo, hi)[0, 0] == 0
    assert discretize(np.array([[7.0]]), lo, hi)[0, 0] == N_BINS - 1
    assert discretize(np.array([[1.0]]), lo, hi)[0, 0] == N_BINS - 1


def test_keys_handle_any_entity_count():
    rng = np.random.default_rng(5)
    e = CountEmbedder("full", seed=0)
    lens = {len(e.key(random_obs(rng, {"agent": k, "box": k + 2, "ramp": k % 3})))
            for k in range(0, 10)}
    assert len(lens) == 1


def test_count_tables_are_per_worker():
    rng = np.random.default_rng(0)
    ci = CountIntrinsic("box2d", seed=0)
    o = box_obs(rng)
    assert ci.reward(0, 0, 1, o, None) == 0.1
    assert ci.reward(1, 0, 1, o, None) == 0.1
    assert ci.reward(0, 0, 1, o, None) == pytest.approx(0.1 / math.sqrt(2))


def test_rnd_zero_when_predictor_equals_target():
    pair = RNDPair(PolicyConfig.desk(), seed=0)
    pair.copy_target_to_predictor()
    rng = np.random.default_rng(0)
    r = pair.reward([random_obs(rng) for _ in range(8)])
    assert np.all(r == 0.0)


def test_rnd_reward_nonnegative_and_target_frozen():
    pair = RNDPair(PolicyConfig.desk(), seed=1)
    rng = np.random.default_rng(1)
    before = pair.target.store.state_dict()
    obs = [random_obs(rng) for _ in range(16)]
    assert np.all(pair.reward(obs) >= 0.0)
    for _ in range(5):
        pair.update(obs)
    after = pair.target.store.state_dict()
    assert all(torch.equal(before[n], after[n]) for n in before)
    b = pair.target.forward(__import__("hideseek.policy", fromlist=["collate"]).collate(
        obs[:2], pair.types))
    assert b.shape == (2, RND_DIM)


def test_rnd_fits_frozen_input():
    env = make_env(quarter_arena())
    o = list(reset_with_retry(env, 0).values())[0]
    pair = RNDPair(PolicyConfig.desk(), seed=0)
    r0 = float(pair.reward([o])[0])
    for _ in range(1000):
        pair.update([o])
    assert float(pair.reward([o])[0]) * 10 <= r0


def test_make_intrinsic_names():
    for name in ("count-box2d", "count-boxfull", "count-full", "rnd"):
        assert make_intrinsic(name, PolicyConfig.desk()) is not None
    with pytest.raises(ValueError):
        make_intrinsic("curiosity", PolicyConfig.desk())


def test_quarter_arena_harness():
    cfg = quarter_arena()
    assert cfg.quarter_spawn and cfg.n_seekers == (0, 0)
    rep = movement_report(episodes=1, seed=0, env_config=cfg.replace(horizon=30))
    assert set(rep) == {"net_box_movement", "max_agent_movement"}
    assert rep["max_agent_movement"] >= 0 and rep["net_box_movement"] >= 0
