"""PPO with GAE targets, running normalizers and a reuse-limited chunk buffer."""

from hideseek.ppo.buffer import CHUNK_LEN, MAX_REUSE, Chunk, ChunkBuffer, InsufficientBuffer
from hideseek.ppo.gae import gae_targets, normalize_advantages
from hideseek.ppo.learner import Learner, PPOConfig, load_networks, obs_dims
from hideseek.ppo.loss import ChunkTensors, clipped_surrogate, ppo_loss, stack_chunks
from hideseek.ppo.normalizer import ObsNormalizer, RunningNormalizer

__all__ = [
    "CHUNK_LEN", "Chunk", "ChunkBuffer", "ChunkTensors", "InsufficientBuffer", "Learner",
    "MAX_REUSE", "ObsNormalizer", "PPOConfig", "RunningNormalizer", "clipped_surrogate",
    "gae_targets", "load_networks", "normalize_advantages", "obs_dims", "ppo_loss",
    "stack_chunks",
]
