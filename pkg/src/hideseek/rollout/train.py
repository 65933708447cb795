"""Learner loop with in-process or subprocess rollout workers.

Each iteration the learner broadcasts parameter version v, every live worker
simulates ``rollout_steps`` environment steps with v and returns its chunks,
the learner ingests them in worker order and runs one optimization step once
the buffer holds a minibatch. Because the exchange is lockstep and every
random stream is seeded per worker, the in-process and multi-process modes
produce the same metrics.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import socket
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import torch

from hideseek.config import TrainConfig, dump_config
from hideseek.evalkit.rundir import RunDir
from hideseek.ppo.learner import Learner
from hideseek.rollout.collect import RolloutWorker, chunk_windows
from hideseek.rollout.transport import (
    ChannelClosed,
    ChannelTimeout,
    Heartbeat,
    InProcChannel,
    ParamBroadcast,
    RolloutBatch,
    SocketChannel,
    Stop,
    decode,
    encode,
)

log = logging.getLogger(__name__)

BEHAVIOR_KEYS = ("max_box_move", "max_box_move_prep", "max_ramp_move", "max_ramp_move_prep",
                 "boxes_locked_end", "boxes_locked_prep", "ramps_locked_end", "ramps_locked_prep",
                 "net_box_movement", "max_agent_movement")


def make_intrinsic(cfg: TrainConfig):
    if cfg.intrinsic == "none":
        return None
    from hideseek.explore import make_intrinsic as build
    return build(cfg.intrinsic, cfg.policy, seed=cfg.seed)


def build_worker(cfg: TrainConfig, worker_id: int) -> RolloutWorker:
    return RolloutWorker(cfg.env, cfg.policy, cfg.ppo, worker_id=worker_id, seed=cfg.seed,
                         n_envs=cfg.n_envs, intrinsic=make_intrinsic(cfg),
                         intrinsic_only=cfg.intrinsic_only)


def worker_round(worker: RolloutWorker, msg: ParamBroadcast) -> RolloutBatch:
    worker.load_params(msg.version, msg.tensors, msg.norm, msg.intrinsic_state)
    windows, episodes = worker.collect(msg.n_steps)
    p = worker.ppo
    chunks = chunk_windows(windows, p.chunk_len, p.gamma, p.lam, seq_start=worker.seq)
    start = worker.seq
    worker.seq += len(chunks)
    return RolloutBatch(worker.worker_id, msg.version, start, chunks, episodes,
                        env_steps=msg.n_steps * len(worker.envs))


def worker_main(sock: socket.socket, cfg: TrainConfig, worker_id: int) -> None:
    """Subprocess entry point: obey broadcasts until Stop, EOF or heartbeat timeout."""
    torch.set_num_threads(1)
    ch = SocketChannel(sock)
    worker = build_worker(cfg, worker_id)
    try:
        ch.send(Heartbeat(worker_id, time.time()))
        while True:
            msg = ch.recv(timeout=cfg.heartbeat_timeout)
            if isinstance(msg, Stop):
                return
            if isinstance(msg, ParamBroadcast):
                ch.send(worker_round(worker, msg))
    except (ChannelClosed, ChannelTimeout) as e:
        log.warning("worker %d exiting: %s", worker_id, e)
    finally:
        ch.close()


class LocalHandle:
    """In-process worker behind the same encode/decode path as the socket workers."""

    def __init__(self, cfg: TrainConfig, worker_id: int):
        self.worker_id = worker_id
        self.worker = build_worker(cfg, worker_id)
        self.ours, self.theirs = InProcChannel.pair()
        self.alive = True

    def send(self, msg) -> None:
        self.ours.send(msg)
        m = self.theirs.recv()
        if isinstance(m, ParamBroadcast):
            self.theirs.send(worker_round(self.worker, m))

    def recv(self, timeout=None):
        return self.ours.recv(timeout)

    def close(self) -> None:
        self.alive = False


class ProcessHandle:
    def __init__(self, cfg: TrainConfig, worker_id: int, ctx):
        self.worker_id = worker_id
        parent, child = socket.socketpair()
        self.proc = ctx.Process(target=worker_main, args=(child, cfg, worker_id), daemon=True)
        self.proc.start()
        child.close()
        self.ch = SocketChannel(parent)
        self.timeout = cfg.heartbeat_timeout
        self.alive = True
        first = self.ch.recv(timeout=self.timeout)
        if not isinstance(first, Heartbeat):
            raise RuntimeError("worker did not announce itself")

    def send(self, msg) -> None:
        self.ch.send(msg)

    def recv(self, timeout=None):
        while True:
            msg = self.ch.recv(timeout=self.timeout if timeout is None else timeout)
            if not isinstance(msg, Heartbeat):
                return msg

    def close(self) -> None:
        if self.alive:
            try:
                self.ch.send(Stop())
            except ChannelClosed:
                pass
        self.alive = False
        self.ch.close()
        self.proc.join(timeout=10)
        if self.proc.is_alive():
            self.proc.terminate()


@dataclass
class IngestAudit:
    emitted: Dict[int, int] = field(default_factory=dict)     # next expected seq per worker
    ingested: int = 0
    rejected_stale: int = 0

    def check(self, batch: RolloutBatch) -> None:
        expect = self.emitted.get(batch.worker_id, 0)
        if batch.seq_start != expect:
            raise RuntimeError(f"worker {batch.worker_id}: chunk seq {batch.seq_start}, "
                               f"expected {expect} (lost or duplicated chunks)")
        for k, c in enumerate(batch.chunks):
            if c.seq != expect + k or c.worker != batch.worker_id:
                raise RuntimeError("chunk sequence numbers out of order")
        self.emitted[batch.worker_id] = expect + len(batch.chunks)


def stale(batch_version: int, current: int, max_lag: int) -> bool:
    """Chunks generated more than ``max_lag`` versions ago are rejected at ingest."""
    return current - batch_version > max_lag


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def summarize_episodes(episodes: List[dict]) -> dict:
    out = {"episodes": len(episodes)}
    for key in ("return_mean", "hider_return", "seeker_return", "length") + BEHAVIOR_KEYS:
        out[f"ep_{key}"] = _mean([e.get(key) for e in episodes])
    return out


def phase_tag(summary: dict) -> str:
    """Coarse behaviour label for checkpoints, from the episode statistics."""
    ramps_locked = summary.get("ep_ramps_locked_prep") or 0.0
    boxes_locked = summary.get("ep_boxes_locked_prep") or 0.0
    box_prep = summary.get("ep_max_box_move_prep") or 0.0
    ramp_move = summary.get("ep_max_ramp_move") or 0.0
    ramp_prep = summary.get("ep_max_ramp_move_prep") or 0.0
    if ramps_locked >= 1.0:
        return "ramp_defense"
    if ramp_move - ramp_prep > 2.0:
        return "ramp_use"
    if box_prep > 2.0 and boxes_locked >= 1.0:
        return "fort_building"
    return "running_and_chasing"


def run_training(cfg: TrainConfig, out_dir: Union[str, Path], steps: int,
                 mode: str = "single", on_step: Optional[Callable[[dict], None]] = None,
                 before_iteration: Optional[Callable[[list, int], None]] = None,
                 init: Optional[Callable[[Learner], None]] = None) -> Learner:
    """Train for ``steps`` learner iterations and return the learner.

    ``mode`` is ``single`` (workers as in-process objects) or ``multi``
    (one subprocess per worker, frames over socket pairs). ``before_iteration``
    receives the worker handles and the iteration index (used for fault injection).
    ``init`` may modify the fresh learner before the first broadcast (warm starts).
    """
    if mode not in ("single", "multi"):
        raise ValueError("mode must be single or multi")
    torch.set_num_threads(1)
    run = RunDir(out_dir)
    run.write_config(dump_config(cfg))
    if run.metrics_path.exists():
        run.metrics_path.unlink()
    learner = Learner(cfg.policy, cfg.ppo, seed=cfg.seed)
    if init is not None:
        init(learner)
        if set(learner.policy.entity_types) != set(cfg.policy.entity_types):
            raise ValueError("init changed the entity types; set them in the config instead")
    intrinsic = make_intrinsic(cfg)
    if mode == "single":
        handles = [LocalHandle(cfg, w) for w in range(cfg.workers)]
    else:
        ctx = mp.get_context("spawn")
        handles = [ProcessHandle(cfg, w, ctx) for w in range(cfg.workers)]
    audit = IngestAudit()
    env_steps = 0
    total_episodes = 0
    last_ckpt = None
    try:
        for it in range(steps):
            if before_iteration is not None:
                before_iteration(handles, it)
            msg = ParamBroadcast(learner.version, learner.param_tensors(), learner.norm_state(),
                                 cfg.rollout_steps,
                                 intrinsic.broadcast_state() if intrinsic is not None else None)
            live = [h for h in handles if h.alive]
            if not live:
                raise RuntimeError("all rollout workers died")
            for h in live:
                try:
                    h.send(msg)
                except ChannelClosed:
                    log.error("worker %d unreachable; continuing without it", h.worker_id)
                    h.alive = False
            batches = []
            for h in live:
                if not h.alive:
                    continue
                try:
                    batches.append(h.recv())
                except (ChannelClosed, ChannelTimeout) as e:
                    log.error("worker %d lost (%s); continuing without it", h.worker_id, e)
                    h.alive = False
            batches.sort(key=lambda b: b.worker_id)
            episodes: List[dict] = []
            new_chunks = []
            for b in batches:
                audit.check(b)
                if stale(b.version, learner.version, cfg.max_staleness):
                    audit.rejected_stale += len(b.chunks)
                    continue
                learner.buffer.add(b.chunks)
                audit.ingested += len(b.chunks)
                new_chunks.extend(b.chunks)
                episodes.extend(b.episodes)
                env_steps += b.env_steps
            total_episodes += len(episodes)
            rec = {"iteration": it, "env_steps": env_steps, "total_episodes": total_episodes,
                   "chunks_ingested": audit.ingested, "chunks_rejected": audit.rejected_stale,
                   "workers_alive": sum(h.alive for h in handles)}
            rec.update(summarize_episodes(episodes))
            if intrinsic is not None and new_chunks:
                rec.update(intrinsic.learner_update(new_chunks))
            stats = learner.optimize_step()
            rec["optimized"] = stats is not None
            if stats is not None:
                rec.update(stats)
            rec["version"] = learner.version
            rec["buffer_size"] = len(learner.buffer)
            rec["phase"] = phase_tag(rec)
            run.append_metrics(rec)
            if on_step is not None:
                on_step(rec)
            if cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
                last_ckpt = run.checkpoint_path(learner.version)
                learner.save(last_ckpt, {"phase": rec["phase"], "iteration": it})
    finally:
        for h in handles:
            h.close()
    final = run.checkpoint_path(learner.version)
    if final != last_ckpt:
        learner.save(final, {"phase": phase_tag(rec) if steps else "untrained",
                             "iteration": steps - 1, "final": True})
    return learner
