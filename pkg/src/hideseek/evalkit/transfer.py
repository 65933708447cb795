"""Fine-tuning runs on the transfer suite, with paired seeds across init modes.

Init modes: ``hns`` and ``intrinsic`` warm-start from a checkpoint (hide-and-seek
or intrinsic-motivation pretraining) and resample the final layernorm and the
heads; ``random`` runs the same pipeline from fresh parameters. Object
counting is a supervised probe: the trunk stays frozen and only a classifier
head over the recurrent output is trained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import torch

from hideseek.config import TrainConfig
from hideseek.envs import EnvConfig, make_env
from hideseek.envs.counting import counting_episode
from hideseek.evalkit.curves import ema, write_curves
from hideseek.evalkit.rundir import RunDir, write_ndjson
from hideseek.nn import checkpoint as ckpt
from hideseek.policy.batch import collate
from hideseek.policy.net import PolicyConfig, PolicyNet
from hideseek.policy.transfer import N_COUNT_CLASSES, CountingHead, freeze, reinit_for_transfer
from hideseek.ppo.learner import Learner
from hideseek.rollout.train import run_training

log = logging.getLogger(__name__)

TRANSFER_TASKS = ("lock_and_return", "sequential_lock", "blueprint", "shelter", "object_counting")
INIT_MODES = ("hns", "intrinsic", "random")
DEFAULT_SEEDS = {"blueprint": 6}          # higher variance; every other task uses 3


def default_seeds(task: str) -> List[int]:
    return list(range(DEFAULT_SEEDS.get(task, 3)))


@dataclass
class TransferRun:
    task: str
    init_mode: str
    seeds: List[int]
    x: List[float] = field(default_factory=list)
    raw: Dict[int, List[float]] = field(default_factory=dict)
    final: Dict[int, float] = field(default_factory=dict)
    band: Optional[dict] = None

    @property
    def final_mean(self) -> float:
        return float(np.mean(list(self.final.values())))

    def as_record(self) -> dict:
        return {"task": self.task, "init_mode": self.init_mode, "seeds": self.seeds,
                "final": {str(k): v for k, v in self.final.items()},
                "final_mean": self.final_mean}


def checkpoint_policy_config(path: Union[str, Path]) -> PolicyConfig:
    _, meta = ckpt.load(path)
    pc = dict(meta["policy_config"])
    pc["entity_types"] = tuple(pc["entity_types"])
    return PolicyConfig(**pc)


def task_config(task: str, base: TrainConfig, checkpoint: Optional[Union[str, Path]] = None,
                **env_overrides) -> TrainConfig:
    """Training config for a task: the task environment, and a policy whose
    architecture comes from the checkpoint (if any) and whose entity types
    cover both the checkpoint and the task."""
    if task not in TRANSFER_TASKS:
        raise ValueError(f"task must be one of {TRANSFER_TASKS}")
    env = EnvConfig.preset(task, **env_overrides)
    pcfg = checkpoint_policy_config(checkpoint) if checkpoint is not None else base.policy
    env_types = make_env(env).entity_types
    types = tuple(pcfg.entity_types) + tuple(t for t in env_types if t not in pcfg.entity_types)
    return base.replace(env=env, policy=pcfg.replace(entity_types=types), intrinsic="none")


def warm_start(path: Union[str, Path], reinit_seed: int = 0):
    """Learner initializer: load networks and normalizers, then resample the heads."""
    tensors, meta = ckpt.load(path)

    def init(learner: Learner) -> None:
        learner.policy.store.load_state_dict(
            {k[7:]: v for k, v in tensors.items() if k.startswith("policy.")}, strict=False)
        learner.value.store.load_state_dict(
            {k[6:]: v for k, v in tensors.items() if k.startswith("value.")}, strict=False)
        learner.load_norm_state(meta["norm"])
        reinit_for_transfer(learner.policy, seed=reinit_seed)
        reinit_for_transfer(learner.value, seed=reinit_seed)

    return init


def _curve(records: List[dict], metric: str) -> List[float]:
    return [np.nan if r.get(metric) is None else float(r[metric]) for r in records]


def run_transfer(task: str, init_mode: str, seeds: Sequence[int], out_dir: Union[str, Path],
                 checkpoint: Optional[Union[str, Path]] = None, iterations: int = 50,
                 base: Optional[TrainConfig] = None, metric: str = "ep_return_mean",
                 mode: str = "single", **env_overrides) -> TransferRun:
    """Fine-tune (or train from scratch) on ``task`` once per seed and persist curves."""
    if init_mode not in INIT_MODES:
        raise ValueError(f"init_mode must be one of {INIT_MODES}")
    if init_mode != "random" and checkpoint is None:
        raise ValueError(f"init mode {init_mode} needs a checkpoint")
    if init_mode == "random":
        checkpoint = None
    base = base or TrainConfig()
    out = Path(out_dir)
    if task == "object_counting":
        return counting_transfer(init_mode, seeds, out, checkpoint, base.policy)
    cfg0 = task_config(task, base, checkpoint, **env_overrides)
    run = TransferRun(task, init_mode, [int(s) for s in seeds])
    for s in run.seeds:
        cfg = cfg0.replace(seed=s, name=f"{task}-{init_mode}-{s}")
        init = warm_start(checkpoint, reinit_seed=s) if checkpoint is not None else None
        sub = out / f"{task}_{init_mode}_seed{s}"
        run_training(cfg, sub, iterations, mode=mode, init=init)
        recs = RunDir(sub).metrics()
        run.raw[s] = _curve(recs, metric)
        if not run.x:
            run.x = [float(r["env_steps"]) for r in recs]
        sm = ema(run.raw[s])
        run.final[s] = float(sm[-1]) if len(sm) and not np.isnan(sm[-1]) else float("nan")
    rd = RunDir(out)
    band = write_curves(rd.curves / f"{task}_{init_mode}.ndjson", run.x,
                        {str(s): [0.0 if np.isnan(v) else v for v in run.raw[s]]
                         for s in run.seeds})
    run.band = {k: np.asarray(v).tolist() for k, v in band.items()}
    write_ndjson(rd.root / f"transfer_{task}_{init_mode}.ndjson", [run.as_record()])
    return run


def compare_transfer(task: str, modes: Sequence[str], seeds: Sequence[int],
                     out_dir: Union[str, Path], checkpoints: Optional[Dict[str, str]] = None,
                     **kw) -> Dict[str, TransferRun]:
    """Every mode runs on the identical seed list (paired comparison)."""
    checkpoints = checkpoints or {}
    seeds = [int(s) for s in seeds]
    runs = {m: run_transfer(task, m, seeds, out_dir, checkpoints.get(m), **kw) for m in modes}
    assert all(r.seeds == seeds for r in runs.values()), "paired seeds violated"
    return runs


# -- object counting probe -----------------------------------------------------------------

def counting_dataset(n: int, seed: int, env_config: Optional[EnvConfig] = None):
    """``n`` episodes: observation streams (each horizon+1 long) and labels."""
    env = make_env(env_config or EnvConfig.preset("object_counting"))
    rng = np.random.default_rng([seed, 0xC047])
    streams, labels = [], []
    for s in rng.integers(0, 2**31 - 1, size=n):
        stream, label = counting_episode(env, int(s))
        streams.append(stream)
        labels.append(label)
    return streams, np.array(labels, np.int64)


@torch.no_grad()
def counting_features(policy: PolicyNet, streams, obs_norm=None, batch: int = 32) -> torch.Tensor:
    """Recurrent output after the last observation of each stream, (n, lstm)."""
    feats = []
    for i in range(0, len(streams), batch):
        group = streams[i:i + batch]
        T = len(group[0])
        if any(len(s) != T for s in group):
            raise ValueError("streams in one batch must have equal length")
        obs = [group[b][t] for t in range(T) for b in range(len(group))]
        x = collate(obs, policy.entity_types, obs_norm)
        _, _, raw, _ = policy.forward(x, None, T=T)
        feats.append(raw[-1])
    return torch.cat(feats)


def train_counting_head(feats: torch.Tensor, labels: np.ndarray, seed: int = 0,
                        epochs: int = 300, lr: float = 3e-3) -> CountingHead:
    head = CountingHead(feats.shape[-1], seed=seed)
    params = [t for _, t in head.store.items()]
    opt = torch.optim.Adam(params, lr=lr)
    y = torch.as_tensor(labels)
    for _ in range(epochs):
        opt.zero_grad()
        loss = torch.nn.functional.cross_entropy(head(feats), y)
        loss.backward()
        opt.step()
    return head


def counting_probe(policy: PolicyNet, seed: int, n_train: int = 400, n_test: int = 200,
                   obs_norm=None, epochs: int = 300,
                   env_config: Optional[EnvConfig] = None) -> dict:
    """Accuracy of a head trained on a frozen trunk, with chance and majority baselines."""
    freeze(policy)
    xs, ys = counting_dataset(n_train, seed=2 * seed, env_config=env_config)
    xt, yt = counting_dataset(n_test, seed=2 * seed + 1, env_config=env_config)
    ftr = counting_features(policy, xs, obs_norm)
    fte = counting_features(policy, xt, obs_norm)
    head = train_counting_head(ftr, ys, seed=seed, epochs=epochs)
    with torch.no_grad():
        pred = head(fte).argmax(-1).numpy()
        train_acc = float((head(ftr).argmax(-1).numpy() == ys).mean())
    majority = int(np.bincount(ys, minlength=N_COUNT_CLASSES).argmax())
    return {"seed": seed, "accuracy": float((pred == yt).mean()), "train_accuracy": train_acc,
            "chance": 1.0 / N_COUNT_CLASSES, "majority_accuracy": float((yt == majority).mean()),
            "n_train": n_train, "n_test": n_test}


def counting_transfer(init_mode: str, seeds: Sequence[int], out_dir: Union[str, Path],
                      checkpoint: Optional[Union[str, Path]] = None,
                      pcfg: Optional[PolicyConfig] = None, **probe_kw) -> TransferRun:
    run = TransferRun("object_counting", init_mode, [int(s) for s in seeds])
    recs = []
    for s in run.seeds:
        obs_norm = None
        if checkpoint is not None:
            from hideseek.ppo.learner import load_networks
            learner, _ = load_networks(checkpoint)
            policy, obs_norm = learner.policy, learner.obs_norm
            reinit_for_transfer(policy, seed=s)
        else:
            policy = PolicyNet((pcfg or PolicyConfig.desk()).replace(seed=s))
        rec = counting_probe(policy, s, obs_norm=obs_norm, **probe_kw)
        recs.append(rec)
        run.final[s] = rec["accuracy"]
    rd = RunDir(out_dir)
    write_ndjson(rd.root / f"transfer_object_counting_{init_mode}.ndjson",
                 recs + [run.as_record()])
    return run
