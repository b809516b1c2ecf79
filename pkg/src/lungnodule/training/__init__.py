"""Losses, Adam, and the two training stages."""

from .adam import AdamState, adam_step
from .adversarial import Stage1Result, mean_dice, predict_maps, shuffle_concat, train_stage1
from .classifier import Stage2Result, classify, train_stage2
from .config import TrainConfig
from .losses import adv_loss, cross_entropy, seg_loss

__all__ = [
    "AdamState",
    "Stage1Result",
    "Stage2Result",
    "TrainConfig",
    "adam_step",
    "adv_loss",
    "classify",
    "cross_entropy",
    "mean_dice",
    "predict_maps",
    "seg_loss",
    "shuffle_concat",
    "train_stage1",
    "train_stage2",
]
