"""Entity-attention policy, omniscient value network and action sampling."""

from hideseek.policy.batch import Batch, collate
from hideseek.policy.dist import ActionDist, sample_actions, to_action_triple
from hideseek.policy.net import PolicyConfig, PolicyNet, Trunk, ValueNet
from hideseek.policy.transfer import CountingHead, freeze, reinit_for_transfer

__all__ = [
    "ActionDist", "Batch", "CountingHead", "PolicyConfig", "PolicyNet", "Trunk", "ValueNet",
    "collate", "freeze", "reinit_for_transfer", "sample_actions", "to_action_triple",
]
