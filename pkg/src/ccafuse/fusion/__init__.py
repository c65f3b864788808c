"""Two-view fusion training."""
from .data import (
    TwoViewDataset,
    corrupt_view,
    make_synthetic_twoview,
    make_synthetic_twoview_2d,
    population_correlations,
)
from .net import FeatureNet, NetConfig, softmax_cross_entropy
from .train import (
    EpochLog,
    Mode,
    TrainSchedule,
    batch_loss,
    evaluate,
    forward,
    network_gradcheck,
    projection_correlation,
    replace_projection,
    train,
)

__all__ = [
    "EpochLog",
    "FeatureNet",
    "Mode",
    "NetConfig",
    "TrainSchedule",
    "TwoViewDataset",
    "batch_loss",
    "corrupt_view",
    "evaluate",
    "forward",
    "make_synthetic_twoview",
    "make_synthetic_twoview_2d",
    "network_gradcheck",
    "population_correlations",
    "projection_correlation",
    "replace_projection",
    "softmax_cross_entropy",
    "train",
]
