"""Multimodal LSTM trajectory model with a Gaussian output head."""
from .checkpoint import load_checkpoint, save_checkpoint
from .lstm import lstm_backward, lstm_forward
from .model import (GaussianTraj, ModelConfig, ModelParams, backward, forward, init_params,
                    loss_and_grads, nll_grad, nll_loss, sample_deltas, step_nll)
from .optim import AdamState, adam_step, lr_schedule
from .train import MEAN, GazeXModel, History, SampleK, TrainConfig, predict, train

__all__ = [
    "AdamState", "GaussianTraj", "GazeXModel", "History", "MEAN", "ModelConfig", "ModelParams",
    "SampleK", "TrainConfig", "adam_step", "backward", "forward", "init_params", "load_checkpoint",
    "loss_and_grads", "lr_schedule", "lstm_backward", "lstm_forward", "nll_grad", "nll_loss",
    "predict", "sample_deltas", "save_checkpoint", "step_nll", "train",
]
