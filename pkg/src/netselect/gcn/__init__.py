from .layers import (
    ChebNetConfig,
    ChebNetParams,
    cheb_apply,
    elu,
    forward_batch,
    gconv_forward,
    init_params,
    leaky_relu,
    net_backward,
    net_forward,
    pack_params,
    scale_laplacian,
    tensor_items,
    unpack_params,
)
from .train import NetReconstructor, TrainConfig, train_prediction_net
from .selection import (
    SensorScores,
    score_sensors,
    train_selection_dropout,
    train_selection_masking,
    write_scores_csv,
)

__all__ = [
    "ChebNetConfig",
    "ChebNetParams",
    "NetReconstructor",
    "TrainConfig",
    "SensorScores",
    "cheb_apply",
    "elu",
    "forward_batch",
    "gconv_forward",
    "init_params",
    "leaky_relu",
    "net_backward",
    "net_forward",
    "pack_params",
    "scale_laplacian",
    "score_sensors",
    "tensor_items",
    "train_prediction_net",
    "train_selection_dropout",
    "train_selection_masking",
    "unpack_params",
    "write_scores_csv",
]
