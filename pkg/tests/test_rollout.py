import multiprocessing as mp
import socket

import numpy as np
import pytest
import torch

from hideseek.config import TrainConfig, dump_config, load_config, parse_config
from hideseek.envs import EnvConfig
from hideseek.evalkit.rundir import RunDir, read_ndjson
from hideseek.policy.net import PolicyConfig
from hideseek.ppo.learner import Learner, PPOConfig, load_networks
from hideseek.rollout.collect import RolloutWorker, chunk_windows
from hideseek.rollout.train import (
    IngestAudit,
    ProcessHandle,
    run_training,
    stale,
    worker_round,
)
from hideseek.rollout.transport import (
    ChannelClosed,
    ChannelTimeout,
    ParamBroadcast,
    RolloutBatch,
    SocketChannel,
    Stop,
    decode,
    encode,
)

from oracles import gae_bruteforce

TINY = PolicyConfig.desk(embed=16, mlp=16, lstm=16, heads=1, head_dim=16, conv_channels=2)


def tiny_cfg(**kw):
    base = dict(env=EnvConfig.preset("chase"), policy=TINY,
                ppo=PPOConfig.desk(buffer=64, minibatch=16, substeps=2),
                workers=2, rollout_steps=40, checkpoint_every=0, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def broadcast(learner, n_steps):
    return ParamBroadcast(learner.version, learner.param_tensors(), learner.norm_state(), n_steps)


def make_worker(horizon=240, worker_id=0, seed=0):
    env = EnvConfig.preset("chase", horizon=horizon)
    ppo = PPOConfig.desk()
    learner = Learner(TINY, ppo, seed=seed)
    w = RolloutWorker(env, TINY, ppo, worker_id=worker_id, seed=seed)
    w.load_params(0, learner.param_tensors(), learner.norm_state())
    return w


# -- windows and chunks ------------------------------------------------------------------------

def test_window_splices_episode_boundary():
    # 240-step episode followed by the next one: the second window holds steps
    # 160..319 with the boundary after in-window step 79
    w = make_worker(horizon=240)
    windows, episodes = w.collect(321)
    assert [len(x) for x in windows] == [160, 160]
    assert len(episodes) == 1 and episodes[0]["length"] == 240
    first, second = windows
    assert not first.dones.any() and first.resets[0] and not first.resets[1:].any()
    assert np.flatnonzero(second.dones).tolist() == [79]
    assert np.flatnonzero(second.resets).tolist() == [80]
    # the bootstrap of a window is the value of the step after it
    assert first.bootstrap == pytest.approx(second.values[0])


def test_zero_steps_gives_no_windows():
    w = make_worker()
    windows, episodes = w.collect(0)
    assert windows == [] and episodes == []
    assert chunk_windows(windows, 10, 0.998, 0.95) == []


def test_window_partitions_into_chunks():
    w = make_worker(horizon=100)
    windows, _ = w.collect(161)
    (win,) = windows
    chunks = chunk_windows([win], 10, 0.998, 0.95)
    assert len(chunks) == 16 and all(c.mask.all() for c in chunks)
    assert np.array_equal(np.concatenate([c.actions for c in chunks]), win.actions)
    assert np.array_equal(np.concatenate([c.resets for c in chunks]), win.resets)
    assert [o for c in chunks for o in c.obs] == win.obs
    adv, ret = gae_bruteforce(win.rewards, win.values, win.dones, win.bootstrap, 0.998, 0.95)
    assert np.allclose(np.concatenate([c.adv for c in chunks]), adv, atol=1e-10)
    assert np.allclose(np.concatenate([c.ret for c in chunks]), ret, atol=1e-10)
    for k, c in enumerate(chunks):
        assert np.array_equal(c.pol_state[0], win.pol_h[10 * k])
        assert np.array_equal(c.pol_state[1], win.pol_c[10 * k])
        assert np.array_equal(c.val_state[0], win.val_h[10 * k])
        assert c.seq == k


def test_partial_chunk_is_masked():
    w = make_worker(horizon=100)
    windows, _ = w.collect(161)
    win = windows[0]
    # keep 23 steps: two full chunks and one with 3 valid steps
    for name in ("actions", "logp", "rewards", "values", "dones", "resets", "pol_h", "pol_c",
                 "val_h", "val_c"):
        setattr(win, name, getattr(win, name)[:23])
    win.obs = win.obs[:23]
    chunks = chunk_windows([win], 10, 0.99, 0.95)
    assert len(chunks) == 3
    assert chunks[2].mask.tolist() == [True] * 3 + [False] * 7
    assert not chunks[2].adv[3:].any() and not chunks[2].rewards[3:].any()


def test_stored_observation_is_the_agent_view():
    w = make_worker(horizon=60)
    env = w.envs[0]
    aid = env.learning_agents[0]
    before = w.obs[0][aid]
    w.collect(1)
    stream = w.streams[(0, 0)]
    assert stream[0].obs is before


def test_identical_workers_produce_identical_windows():
    a, b = make_worker(seed=5), make_worker(seed=5)
    wa, _ = a.collect(200)
    wb, _ = b.collect(200)
    assert len(wa) == len(wb)
    for x, y in zip(wa, wb):
        assert np.array_equal(x.actions, y.actions)
        assert np.array_equal(x.rewards, y.rewards)
        assert np.array_equal(x.logp, y.logp)


def test_version_must_not_go_backwards():
    w = make_worker()
    learner = Learner(TINY, PPOConfig.desk(), seed=0)
    w.load_params(3, learner.param_tensors(), learner.norm_state())
    with pytest.raises(ValueError):
        w.load_params(2, learner.param_tensors(), learner.norm_state())


# -- transport -----------------------------------------------------------------------------------

def test_frame_roundtrip_and_truncation():
    msg = RolloutBatch(1, 4, 20, [], [{"a": 1}], env_steps=7)
    frame = encode(msg)
    assert decode(frame) == msg
    with pytest.raises(ValueError):
        decode(frame[:-3])


def test_socket_channel_roundtrip_timeout_and_eof():
    a, b = socket.socketpair()
    ca, cb = SocketChannel(a), SocketChannel(b)
    payload = {"t": torch.arange(5.0), "x": np.ones(3)}
    ca.send(ParamBroadcast(2, payload, {}, 10))
    got = cb.recv(timeout=5)
    assert got.version == 2 and torch.equal(got.tensors["t"], payload["t"])
    with pytest.raises(ChannelTimeout):
        cb.recv(timeout=0.05)
    ca.close()
    with pytest.raises(ChannelClosed):
        cb.recv(timeout=5)
    cb.close()


def test_worker_exits_when_learner_disappears():
    cfg = tiny_cfg(workers=1)
    h = ProcessHandle(cfg, 0, mp.get_context("spawn"))
    h.ch.close()                         # learner gone without a Stop message
    h.proc.join(timeout=60)
    assert not h.proc.is_alive() and h.proc.exitcode == 0


def test_worker_obeys_stop():
    cfg = tiny_cfg(workers=1)
    h = ProcessHandle(cfg, 0, mp.get_context("spawn"))
    h.ch.send(Stop())
    h.proc.join(timeout=60)
    assert not h.proc.is_alive()
    h.alive = False
    h.close()


# -- ingest ----------------------------------------------------------------------------------------

def test_staleness_rule_examples():
    assert not stale(0, 4, 4) and stale(0, 5, 4)
    assert not stale(7, 7, 0) and stale(6, 7, 0)


def test_seq_audit_detects_gaps():
    cfg = tiny_cfg()
    learner = Learner(cfg.policy, cfg.ppo, seed=0)
    w = RolloutWorker(cfg.env, cfg.policy, cfg.ppo, worker_id=1, seed=0)
    audit = IngestAudit()
    b1 = worker_round(w, broadcast(learner, 170))
    audit.check(b1)
    b2 = worker_round(w, broadcast(learner, 170))
    b3 = worker_round(w, broadcast(learner, 170))
    with pytest.raises(RuntimeError):
        audit.check(b3)                  # b2 was lost
    audit.check(b2)
    audit.check(b3)
    assert audit.emitted[1] == len(b1.chunks) + len(b2.chunks) + len(b3.chunks)


def test_stale_batches_are_rejected(tmp_path):
    # a worker that keeps reporting version 0 is dropped once the learner is 5 versions ahead
    cfg = tiny_cfg(workers=1, rollout_steps=161)
    seen = []

    def freeze(handles, it):
        if it == 0:
            h = handles[0]
            orig = h.send

            def send(msg):
                msg.version = 0
                orig(msg)
            h.send = send

    run_training(cfg, tmp_path, steps=9, before_iteration=freeze, on_step=seen.append)
    prev_version = [0] + [r["version"] for r in seen[:-1]]
    rejected = np.diff([0] + [r["chunks_rejected"] for r in seen])
    assert rejected[-1] > 0
    # a batch is stale when the learner version exceeds its version by more than 4
    for v, dr in zip(prev_version, rejected):
        assert (dr > 0) == (v > 4)


# -- training loop -----------------------------------------------------------------------------------

def test_single_and_multi_process_metrics_match(tmp_path):
    cfg = tiny_cfg(rollout_steps=170)
    run_training(cfg, tmp_path / "s", steps=3, mode="single")
    run_training(cfg, tmp_path / "m", steps=3, mode="multi")
    ms, mm = RunDir(tmp_path / "s").metrics(), RunDir(tmp_path / "m").metrics()
    assert len(ms) == 3 and ms == mm
    assert any(r.get("approx_kl") is not None for r in ms)


def test_same_seed_same_metrics(tmp_path):
    cfg = tiny_cfg()
    run_training(cfg, tmp_path / "a", steps=3)
    run_training(cfg, tmp_path / "b", steps=3)
    assert RunDir(tmp_path / "a").metrics() == RunDir(tmp_path / "b").metrics()


def test_run_dir_layout_and_final_checkpoint(tmp_path):
    cfg = tiny_cfg(checkpoint_every=2)
    learner = run_training(cfg, tmp_path, steps=3)
    run = RunDir(tmp_path)
    recs = read_ndjson(run.metrics_path)
    assert [r["iteration"] for r in recs] == [0, 1, 2]
    assert all(r["schema_version"] == 1 for r in recs)
    assert parse_config(run.config_path.read_text()) == cfg
    ckpts = sorted(p.name for p in run.checkpoints.glob("*.hsck"))
    assert run.latest_checkpoint().name == f"ckpt_{learner.version:06d}.hsck"
    assert len(ckpts) >= 1
    loaded, meta = load_networks(run.latest_checkpoint())
    for k, v in learner.param_tensors().items():
        assert torch.equal(loaded.param_tensors()[k], v.float())


def test_training_survives_worker_death(tmp_path):
    cfg = tiny_cfg(workers=2, rollout_steps=161, heartbeat_timeout=60)
    seen = []

    def kill(handles, it):
        if it == 1:
            handles[1].proc.kill()
            handles[1].proc.join(timeout=30)

    run_training(cfg, tmp_path, steps=3, mode="multi", before_iteration=kill, on_step=seen.append)
    assert [r["workers_alive"] for r in seen] == [2, 1, 1]
    assert seen[2]["chunks_ingested"] > seen[1]["chunks_ingested"]


def test_config_roundtrip():
    cfg = tiny_cfg(intrinsic="count-box2d", name="x", env=EnvConfig.preset("hide_and_seek"))
    assert parse_config(dump_config(cfg)) == cfg
    with pytest.raises(ValueError):
        parse_config("train.bogus = 1")
    with pytest.raises(ValueError):
        parse_config("train.intrinsic = magic")
    text = "# comment\nenv.variant = chase\ntrain.workers = 3\nppo.lr = 0.001\n"
    got = parse_config(text)
    assert got.workers == 3 and got.ppo.lr == 0.001 and got.env.variant == "chase"


@pytest.mark.parametrize("name", ["chase", "lock_and_return"])
def test_shipped_configs_match_learning_settings(name):
    from pathlib import Path
    from test_acceptance import LEARN_PPO, _learn_cfg
    cfg = load_config(Path(__file__).parent.parent / "configs" / f"{name}.cfg")
    env = EnvConfig.preset(name, **({"n_rooms": (2, 2)} if name == "lock_and_return" else {}))
    want = _learn_cfg(env, 0)
    assert cfg.env == want.env and cfg.ppo == LEARN_PPO and cfg.policy == want.policy
    assert (cfg.workers, cfg.rollout_steps) == (want.workers, want.rollout_steps)
