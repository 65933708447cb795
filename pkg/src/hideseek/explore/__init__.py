"""Count-based exploration and random network distillation baselines."""

from hideseek.explore.count import (
    COUNT_SCALE,
    CountEmbedder,
    CountIntrinsic,
    CountTable,
    count_reward,
    discretize,
)
from hideseek.explore.harness import movement_report, quarter_arena
from hideseek.explore.rnd import RND_DIM, RNDIntrinsic, RNDNet, RNDPair

SELECTOR_BY_NAME = {"count-box2d": "box2d", "count-boxfull": "boxfull", "count-full": "full"}


def make_intrinsic(name: str, pcfg, seed: int = 0):
    """Build the intrinsic reward named by the ``--intrinsic`` choices."""
    if name in SELECTOR_BY_NAME:
        return CountIntrinsic(SELECTOR_BY_NAME[name], seed)
    if name == "rnd":
        return RNDIntrinsic(pcfg, seed)
    raise ValueError(f"unknown intrinsic reward {name!r}")


__all__ = [
    "COUNT_SCALE", "CountEmbedder", "CountIntrinsic", "CountTable", "RND_DIM", "RNDIntrinsic",
    "RNDNet", "RNDPair", "count_reward", "discretize", "make_intrinsic", "movement_report",
    "quarter_arena",
]
