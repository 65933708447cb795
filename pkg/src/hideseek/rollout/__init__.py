"""Rollout workers, window/chunk construction, message transport and the training loop."""

from hideseek.rollout.collect import (
    RolloutWorker,
    Transition,
    Window,
    chunk_windows,
    episode_seed,
    make_window,
)
from hideseek.rollout.train import IngestAudit, phase_tag, run_training, worker_round
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

__all__ = [
    "ChannelClosed", "ChannelTimeout", "Heartbeat", "InProcChannel", "IngestAudit",
    "ParamBroadcast", "RolloutBatch", "RolloutWorker", "SocketChannel", "Stop", "Transition",
    "Window", "chunk_windows", "decode", "encode", "episode_seed", "make_window", "phase_tag",
    "run_training", "worker_round",
]
