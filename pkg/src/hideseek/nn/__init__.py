"""Functional layers, parameter storage, Adam and checkpoints on top of torch autograd."""

from hideseek.nn.layers import (
    LN_EPS,
    NonFiniteError,
    circular_conv1d,
    dense,
    layernorm,
    lstm_step,
    lstm_unroll,
    masked_max_pool,
    masked_mean_pool,
    masked_self_attention,
)
from hideseek.nn.params import (
    AdamConfig,
    AdamState,
    ParamStore,
    adam_update,
    attention_params,
    global_norm,
    init_attention,
    init_conv,
    init_dense,
    init_layernorm,
    init_lstm,
)

__all__ = [
    "AdamConfig", "AdamState", "LN_EPS", "NonFiniteError", "ParamStore", "adam_update",
    "attention_params", "circular_conv1d", "dense", "global_norm", "init_attention",
    "init_conv", "init_dense", "init_layernorm", "init_lstm", "layernorm", "lstm_step",
    "lstm_unroll", "masked_max_pool", "masked_mean_pool", "masked_self_attention",
]
