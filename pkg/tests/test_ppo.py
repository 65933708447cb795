import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from hideseek.policy import PolicyConfig
from hideseek.ppo import (
    Chunk,
    ChunkBuffer,
    InsufficientBuffer,
    Learner,
    PPOConfig,
    RunningNormalizer,
    clipped_surrogate,
    gae_targets,
    normalize_advantages,
    ppo_loss,
)

from oracles import fd_ppo_loss, gae_bruteforce, ppo_micro_instance
from test_policy import random_obs


def random_window(rng, max_len=12):
    T = int(rng.integers(1, max_len + 1))
    r = rng.normal(size=T)
    v = rng.normal(size=T)
    d = rng.random(T) < 0.2
    return r, v, d, float(rng.normal())


# --- GAE --------------------------------------------------------------------------

def test_gae_matches_bruteforce_on_random_windows():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        r, v, d, boot = random_window(rng)
        gamma, lam = float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.0, 1.0))
        a, g = gae_targets(r, v, d, boot, gamma, lam)
        ea, eg = gae_bruteforce(r, v, d, boot, gamma, lam)
        assert np.allclose(a, ea, atol=1e-6) and np.allclose(g, eg, atol=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gae_reverse_recurrence(seed):
    rng = np.random.default_rng(seed)
    r, v, d, boot = random_window(rng)
    gamma, lam = 0.998, 0.95
    a, g = gae_targets(r, v, d, boot, gamma, lam)
    T = len(r)
    for t in range(T):
        nxt = 0.0 if d[t] else (v[t + 1] if t + 1 < T else boot)
        delta = r[t] + gamma * nxt - v[t]
        tail = 0.0 if d[t] or t + 1 == T else a[t + 1]
        assert a[t] == pytest.approx(delta + gamma * lam * tail, abs=1e-12)
    assert np.allclose(g, a + v)


def test_gae_hand_example():
    a, _ = gae_targets([1, 0, 1], [0, 0, 0], [False, False, False], 0.0, 0.5, 1.0)
    assert a[0] == pytest.approx(1.25)


def test_gae_lambda_zero_is_td():
    rng = np.random.default_rng(1)
    r, v = rng.normal(size=6), rng.normal(size=6)
    d = np.array([0, 0, 1, 0, 0, 0], bool)
    a, _ = gae_targets(r, v, d, 0.7, 0.9, 0.0)
    nxt = np.append(v[1:], 0.7)
    nxt[2] = 0.0
    assert np.allclose(a, r + 0.9 * nxt - v)


def test_gae_boundary_splice():
    """Boundary at j=3: step 2 is terminal with horizon 1, step 3 restarts
    with a horizon running to the window end."""
    T, j = 8, 3
    r = np.arange(1.0, T + 1)
    v = np.linspace(0.1, 0.8, T)
    d = np.zeros(T, bool)
    d[j - 1] = True
    gamma, lam, boot = 0.9, 0.8, 0.5
    a, _ = gae_targets(r, v, d, boot, gamma, lam)
    assert a[2] == pytest.approx(r[2] - v[2])
    tail, _ = gae_targets(r[j:], v[j:], d[j:], boot, gamma, lam)
    head, _ = gae_targets(r[:j], v[:j], d[:j], 123.0, gamma, lam)
    assert np.allclose(a[j:], tail) and np.allclose(a[:j], head)


# --- advantage and running normalisation --------------------------------------------

def test_normalize_advantages_examples():
    assert np.allclose(normalize_advantages([1, 2, 3]), [-1.2247449, 0, 1.2247449], atol=1e-6)
    z = normalize_advantages(np.random.default_rng(0).normal(size=50))
    assert np.allclose(normalize_advantages(z), z, atol=1e-6)
    assert np.array_equal(normalize_advantages([4.0, 4.0, 4.0]), np.zeros(3))
    assert np.array_equal(normalize_advantages([7.0]), np.zeros(1))
    with pytest.raises(ValueError):
        normalize_advantages([])


def test_running_normalizer_cold_start_and_roundtrip():
    rn = RunningNormalizer((3,))
    x = np.array([1.0, -2.0, 0.5])
    assert np.allclose(rn.normalize(x), x / math.sqrt(1 + rn.eps))
    rn.update(np.random.default_rng(0).normal(size=(5, 3)))
    other = RunningNormalizer((3,))
    other.load(rn.state())
    assert np.array_equal(other.normalize(x), rn.normalize(x))


def test_running_mean_constant_stream():
    """After one sample a then n samples of c the debiased mean is
    (d^n (1-d) a + (1-d^n) c) / (1 - d^(n+1)), moving monotonically to c."""
    d, a, c = 0.9, -3.0, 2.0
    rn = RunningNormalizer((), decay=d, eps=0.0)
    rn.update(np.array([a]))
    prev = float(rn.mean)
    for n in range(1, 200):
        rn.update(np.array([c]))
        expect = (d ** n * (1 - d) * a + (1 - d ** n) * c) / (1 - d ** (n + 1))
        assert float(rn.mean) == pytest.approx(expect, rel=1e-12)
        assert prev <= float(rn.mean) <= c
        prev = float(rn.mean)
    assert float(rn.mean) == pytest.approx(c, abs=1e-6)
    fresh = RunningNormalizer((), decay=0.99)
    for _ in range(30):
        fresh.update(np.array([c]))
        assert float(fresh.mean) == pytest.approx(c, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
def test_running_variance_nonnegative(xs):
    rn = RunningNormalizer((), decay=0.95)
    for x in xs:
        rn.update(np.array([x]))
        assert float(rn.var) >= 0.0


# --- loss -------------------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(-5.0, 5.0), st.floats(0.05, 0.9))
def test_clipped_objective_below_unclipped(ratio, adv, eps):
    r, a = torch.tensor(ratio, dtype=torch.float64), torch.tensor(adv, dtype=torch.float64)
    assert float(clipped_surrogate(r, a, eps)) <= float(r * a) + 1e-12


def test_clipped_hand_example():
    assert float(clipped_surrogate(torch.tensor(2.0), torch.tensor(1.0), 0.2)) == pytest.approx(1.2)


def _micro(seed=0):
    pol, val, x = ppo_micro_instance(np.random.default_rng(seed))
    return pol, val, x


def test_identity_ratio_gives_minus_mean_advantage():
    pol, val, x = _micro(1)
    with torch.no_grad():
        _, m0 = ppo_loss(pol, val, x)
        cat, binl, _, _ = pol.forward(x.batch, x.pol_state, T=x.T, resets=x.resets)
        from hideseek.policy import ActionDist
        x.logp_old = ActionDist(cat, binl).log_prob(x.actions)
        _, m = ppo_loss(pol, val, x)
    w = x.mask
    assert m["policy_loss"] == pytest.approx(-float((x.adv * w).sum() / w.sum()), abs=1e-9)
    assert m["clip_frac"] == 0.0


def test_zero_advantage_gives_zero_policy_gradient():
    pol, val, x = _micro(2)
    x.adv = torch.zeros_like(x.adv)
    loss, _ = ppo_loss(pol, val, x, ent_coef=0.0)
    grads = torch.autograd.grad(loss, [t for _, t in pol.store.items()], allow_unused=True)
    assert all(g is None or float(g.abs().max()) == 0.0 for g in grads)


def test_ppo_loss_finite_differences():
    rng = np.random.default_rng(7)
    worst = max(fd_ppo_loss(rng) for _ in range(5))
    assert worst < 1e-3


# --- buffer -----------------------------------------------------------------------

def fake_chunk(rng, L=10, seq=0):
    return Chunk(obs=[random_obs(rng) for _ in range(L)],
                 actions=np.zeros((L, 5), np.int64), logp=np.zeros(L), rewards=np.zeros(L),
                 values=np.zeros(L), adv=rng.normal(size=L), ret=rng.normal(size=L),
                 mask=np.ones(L, bool), resets=np.zeros(L, bool),
                 pol_state=(np.zeros(64), np.zeros(64)), val_state=(np.zeros(64), np.zeros(64)),
                 seq=seq)


def test_buffer_accounting_and_reuse_bound():
    rng = np.random.default_rng(0)
    buf = ChunkBuffer(capacity=12, max_reuse=4)
    for k in range(6):
        buf.add([fake_chunk(rng, L=2, seq=k * 6 + i) for i in range(6)])
        assert buf.inserted - buf.evicted == len(buf)
        idx = buf.sample(5, rng)
        assert len(set(idx.tolist())) == 5
        buf.mark_used(idx)
        buf.evict_spent()
        buf.audit()
    with pytest.raises(AssertionError):
        c = buf.chunks[0]
        c.reuse = 4
        buf.mark_used([0])
    with pytest.raises(InsufficientBuffer):
        buf.sample(len(buf) + 1, rng)


def test_buffer_identity_survives_chunks_from_other_processes():
    # chunks built by separate worker processes arrive with no shared identity
    rng = np.random.default_rng(3)
    buf = ChunkBuffer(capacity=8)
    for _ in range(4):
        chunks = [fake_chunk(rng, L=2) for _ in range(3)]
        for c in chunks:
            c.uid = 0                      # what independent per-process counters would give
        buf.add(chunks)
        buf.mark_used(buf.sample(2, rng))
        buf.evict_spent()
    assert len({c.uid for c in buf.chunks}) == len(buf) == 8
    assert buf.inserted - buf.evicted == len(buf)


def test_buffer_rejects_used_chunks():
    buf = ChunkBuffer(4)
    c = fake_chunk(np.random.default_rng(0), L=1)
    c.reuse = 1
    with pytest.raises(ValueError):
        buf.add([c])


def test_optimize_step_contracts():
    rng = np.random.default_rng(0)
    cfg = PPOConfig.desk(buffer=64, minibatch=8, substeps=3)
    lr = Learner(PolicyConfig.desk(), cfg, seed=0)
    assert lr.optimize_step() is None and lr.version == 0
    evicted = set()
    for step in range(6):
        lr.buffer.add([fake_chunk(rng, L=3, seq=step * 6 + i) for i in range(6)])
        before = {c.uid: c.reuse for c in lr.buffer.chunks}
        out = lr.optimize_step()
        if out is None:
            continue
        for uids in lr.draws:
            assert len(set(uids)) == len(uids)
            assert not set(uids) & evicted
        drawn = {u for uids in lr.draws for u in uids}
        per_sub = {u: sum(u in s for s in lr.draws) for u in before}
        for c in lr.buffer.chunks:
            assert c.reuse <= before[c.uid] + per_sub[c.uid]
            assert c.reuse == before[c.uid] + (c.uid in drawn)
        evicted |= lr.buffer.evicted_uids
        assert math.isfinite(out["loss"])
    assert lr.version > 0


def test_optimize_step_aborts_on_nan():
    rng = np.random.default_rng(1)
    lr = Learner(PolicyConfig.desk(), PPOConfig.desk(buffer=16, minibatch=4, substeps=1))
    chunks = [fake_chunk(rng, L=2) for _ in range(4)]
    chunks[0].ret[:] = np.nan
    lr.buffer.add(chunks)
    before = lr.policy.store.state_dict()
    with pytest.raises(FloatingPointError):
        lr.optimize_step()
    after = lr.policy.store.state_dict()
    assert all(torch.equal(before[n], after[n]) for n in before)


def test_config_validation():
    with pytest.raises(ValueError):
        PPOConfig(clip=1.5)
    with pytest.raises(ValueError):
        PPOConfig(lr=0.0)
    d = PPOConfig.desk()
    assert (d.buffer, d.minibatch, d.substeps) == (4096, 512, 16)
