"""Self-play rollouts: per-agent streams spliced across episodes, cut into windows and chunks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from hideseek.envs import EnvConfig, ResetError, make_env, reset_with_retry
from hideseek.envs.observation import Observation
from hideseek.envs.stats import behavior_stats, movement_summary
from hideseek.policy.batch import collate
from hideseek.policy.dist import ActionDist, sample_actions, to_action_triple
from hideseek.policy.net import PolicyConfig, PolicyNet, ValueNet
from hideseek.ppo.buffer import Chunk
from hideseek.ppo.gae import gae_targets
from hideseek.ppo.learner import PPOConfig, obs_dims
from hideseek.ppo.normalizer import ObsNormalizer, RunningNormalizer
from hideseek.sim.factory import HIDER, SEEKER

log = logging.getLogger(__name__)


@dataclass
class Transition:
    obs: Observation
    action: np.ndarray
    logp: float
    reward: float
    value: float          # raw-scale V(s)
    done: bool            # last step of an episode
    reset: bool           # first step of an episode
    pol_state: Tuple[np.ndarray, np.ndarray]
    val_state: Tuple[np.ndarray, np.ndarray]


@dataclass
class Window:
    """Consecutive steps of one agent slot; may contain episode boundaries."""
    obs: List[Observation]
    actions: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    resets: np.ndarray
    pol_h: np.ndarray
    pol_c: np.ndarray
    val_h: np.ndarray
    val_c: np.ndarray
    bootstrap: float
    version: int = 0
    worker: int = 0
    slot: Tuple[int, int] = (0, 0)

    def __len__(self) -> int:
        return len(self.obs)


def make_window(steps: Sequence[Transition], bootstrap: float, version: int, worker: int,
                slot) -> Window:
    return Window(
        obs=[s.obs for s in steps],
        actions=np.stack([s.action for s in steps]).astype(np.int64),
        logp=np.array([s.logp for s in steps]), rewards=np.array([s.reward for s in steps]),
        values=np.array([s.value for s in steps]), dones=np.array([s.done for s in steps]),
        resets=np.array([s.reset for s in steps]),
        pol_h=np.stack([s.pol_state[0] for s in steps]),
        pol_c=np.stack([s.pol_state[1] for s in steps]),
        val_h=np.stack([s.val_state[0] for s in steps]),
        val_c=np.stack([s.val_state[1] for s in steps]),
        bootstrap=float(bootstrap), version=version, worker=worker, slot=slot)


def chunk_windows(windows: Sequence[Window], chunk_len: int, gamma: float, lam: float,
                  seq_start: int = 0) -> List[Chunk]:
    """GAE targets per window, then consecutive ``chunk_len`` slices.

    A final partial slice is padded by repeating its last step with mask false.
    Chunk k carries the recurrent states at window step ``k * chunk_len``.
    """
    out: List[Chunk] = []
    seq = seq_start
    for w in windows:
        adv, ret = gae_targets(w.rewards, w.values, w.dones, w.bootstrap, gamma, lam)
        T = len(w)
        for s in range(0, T, chunk_len):
            idx = list(range(s, min(s + chunk_len, T)))
            n = len(idx)
            pad = idx + [idx[-1]] * (chunk_len - n)
            mask = np.arange(chunk_len) < n

            def take(a):
                v = a[pad].copy()
                if v.dtype.kind in "fiu":
                    v[n:] = 0
                else:
                    v[n:] = False
                return v

            out.append(Chunk(
                obs=[w.obs[i] for i in pad], actions=take(w.actions), logp=take(w.logp),
                rewards=take(w.rewards), values=take(w.values), adv=take(adv), ret=take(ret),
                mask=mask, resets=take(w.resets),
                pol_state=(w.pol_h[s].copy(), w.pol_c[s].copy()),
                val_state=(w.val_h[s].copy(), w.val_c[s].copy()),
                version=w.version, worker=w.worker, seq=seq))
            seq += 1
    return out


def episode_seed(base: int, worker: int, episode: int) -> int:
    return int(np.random.SeedSequence([base, worker, episode]).generate_state(1)[0])


class RolloutWorker:
    """Runs ``n_envs`` environments with the current parameters.

    Every agent acts on its own observation and recurrent state only. Streams
    are keyed by (env index, agent position) and continue across episode
    boundaries; a slot that disappears at reset is flushed as a short window.
    """

    def __init__(self, env_config: EnvConfig, pcfg: PolicyConfig, ppo: PPOConfig,
                 worker_id: int = 0, seed: int = 0, n_envs: int = 1, intrinsic=None,
                 intrinsic_only: bool = True):
        self.env_config = env_config
        self.ppo = ppo
        self.worker_id = worker_id
        self.seed = seed
        self.policy = PolicyNet(pcfg)
        self.value = ValueNet(pcfg)
        self.obs_norm = ObsNormalizer(obs_dims(self.policy.entity_types), ppo.norm_decay)
        self.ret_norm = RunningNormalizer((), ppo.norm_decay, clip=0.0)
        self.rng = np.random.default_rng([seed, worker_id, 7])
        self.envs = [make_env(env_config) for _ in range(n_envs)]
        self.intrinsic = intrinsic
        self.intrinsic_only = intrinsic_only
        self.version = -1
        self.episodes = 0
        self.seq = 0
        self.obs: List[Dict[int, Observation]] = [{} for _ in self.envs]
        self.pol_state: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = {}
        self.val_state: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = {}
        self.fresh: Dict[Tuple[int, int], bool] = {}
        self.streams: Dict[Tuple[int, int], List[Transition]] = {}
        self.ep_return: List[Dict[int, float]] = [{} for _ in self.envs]
        self.reset_failures = 0
        self.finished: List[dict] = []
        self.pending: List[Window] = []
        for i in range(len(self.envs)):
            self._reset_env(i)

    # -- parameters ------------------------------------------------------------------
    def load_params(self, version: int, tensors: Dict[str, torch.Tensor], norm: dict,
                    intrinsic_state=None) -> None:
        if version < self.version:
            raise ValueError(f"parameter version went backwards: {version} < {self.version}")
        self.policy.store.load_state_dict({k[7:]: v for k, v in tensors.items()
                                           if k.startswith("policy.")})
        self.value.store.load_state_dict({k[6:]: v for k, v in tensors.items()
                                          if k.startswith("value.")})
        self.obs_norm.load({k: {n: np.asarray(v) for n, v in s.items()}
                            for k, s in norm["obs"].items()})
        self.ret_norm.load({n: np.asarray(v) for n, v in norm["ret"].items()})
        if intrinsic_state is not None and self.intrinsic is not None:
            self.intrinsic.load_state(intrinsic_state)
        self.version = version

    # -- episodes --------------------------------------------------------------------
    def _slots(self, i: int):
        return [(i, k) for k in range(len(self.envs[i].learning_agents))]

    def _reset_env(self, i: int) -> None:
        env = self.envs[i]
        old = set(self._slots(i)) if env.world is not None else set()
        while True:
            seed = episode_seed(self.seed, self.worker_id, self.episodes)
            self.episodes += 1
            try:
                self.obs[i] = reset_with_retry(env, seed)
                break
            except ResetError:
                self.reset_failures += 1
                log.warning("worker %d: env reset failed for seed %d; skipping", self.worker_id,
                            seed)
        H = self.policy.cfg.lstm
        new = set(self._slots(i))
        for slot in old - new:
            self._flush(slot)
        for slot in new:
            self.pol_state[slot] = (np.zeros(H, np.float32), np.zeros(H, np.float32))
            self.val_state[slot] = (np.zeros(H, np.float32), np.zeros(H, np.float32))
            self.fresh[slot] = True
        self.ep_return[i] = {aid: 0.0 for aid in env.learning_agents}
        if self.intrinsic is not None:
            self.intrinsic.on_reset(self.worker_id, i)

    def _flush(self, slot) -> None:
        steps = self.streams.pop(slot, [])
        if steps:
            self.pending.append(make_window(steps, 0.0, self.version, self.worker_id, slot))

    # -- stepping --------------------------------------------------------------------
    def collect(self, n_steps: int):
        """Advance every env ``n_steps`` times. Returns (windows, finished-episode stats)."""
        self.pending: List[Window] = []
        self.finished = []
        T = self.ppo.window
        for _ in range(n_steps):
            self._step_all()
            for slot in list(self.streams):
                s = self.streams[slot]
                if len(s) > T:
                    self.pending.append(make_window(s[:T], s[T].value, self.version,
                                                    self.worker_id, slot))
                    self.streams[slot] = s[T:]
        return self.pending, self.finished

    @torch.no_grad()
    def act(self, observations: Sequence[Observation], pol_states, val_states):
        b = collate(observations, self.policy.entity_types, self.obs_norm)
        ph = torch.from_numpy(np.stack([s[0] for s in pol_states]))
        pc = torch.from_numpy(np.stack([s[1] for s in pol_states]))
        vh = torch.from_numpy(np.stack([s[0] for s in val_states]))
        vc = torch.from_numpy(np.stack([s[1] for s in val_states]))
        cat, binl, _, (ph2, pc2) = self.policy.forward(b, (ph, pc))
        v, (vh2, vc2) = self.value.forward(b, (vh, vc))
        acts, logp, _ = sample_actions(ActionDist(cat[0], binl[0]), self.rng)
        raw_v = self.ret_norm.denormalize(v[0].double().numpy())
        return (acts.numpy(), logp.double().numpy(), raw_v, (ph2.numpy(), pc2.numpy()),
                (vh2.numpy(), vc2.numpy()))

    def _step_all(self) -> None:
        slots, obs = [], []
        for i, env in enumerate(self.envs):
            for k, aid in enumerate(env.learning_agents):
                slots.append((i, k))
                obs.append(self.obs[i][aid])
        if not slots:
            return
        acts, logp, vals, (ph, pc), (vh, vc) = self.act(
            obs, [self.pol_state[s] for s in slots], [self.val_state[s] for s in slots])
        by_env: Dict[int, dict] = {}
        for j, (i, k) in enumerate(slots):
            aid = self.envs[i].learning_agents[k]
            by_env.setdefault(i, {})[aid] = to_action_triple(acts[j])
        results = {}
        for i, env in enumerate(self.envs):
            if i in by_env or not env.learning_agents:
                results[i] = env.step(by_env.get(i, {}))
        for j, slot in enumerate(slots):
            i, k = slot
            env = self.envs[i]
            aid = env.learning_agents[k]
            nxt, rewards, done, _ = results[i]
            r = float(rewards.get(aid, 0.0))
            self.ep_return[i][aid] += r
            if self.intrinsic is not None:
                ri = self.intrinsic.reward(self.worker_id, i, aid, nxt[aid], env)
                r = ri if self.intrinsic_only else r + ri
            self.streams.setdefault(slot, []).append(Transition(
                obs=obs[j], action=acts[j], logp=float(logp[j]), reward=r, value=float(vals[j]),
                done=bool(done), reset=self.fresh[slot],
                pol_state=self.pol_state[slot], val_state=self.val_state[slot]))
            self.fresh[slot] = False
            self.pol_state[slot] = (ph[j].copy(), pc[j].copy())
            self.val_state[slot] = (vh[j].copy(), vc[j].copy())
        for i, (nxt, rewards, done, _) in results.items():
            if done:
                self.finished.append(self._episode_record(i))
                self._reset_env(i)
            else:
                self.obs[i] = nxt

    def _episode_record(self, i: int) -> dict:
        env = self.envs[i]
        teams = {aid: env.world[aid].team for aid in env.learning_agents}
        rets = self.ep_return[i]

        def team_mean(team):
            vals = [rets[a] for a, t in teams.items() if t == team]
            return float(np.mean(vals)) if vals else None

        rec = {"worker": self.worker_id, "env": i, "seed": env.seed, "length": env.world.t,
               "return_mean": float(np.mean(list(rets.values()))) if rets else 0.0,
               "hider_return": team_mean(HIDER), "seeker_return": team_mean(SEEKER),
               "n_agents": len(rets)}
        rec.update(behavior_stats(env.trace).as_dict())
        rec.update(movement_summary(env.trace))
        return rec
