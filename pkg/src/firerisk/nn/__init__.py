from .gru import GruConfig, GruModel, parameter_count, parameter_shapes
from .loss import wk_loss, wk_loss_grad, wk_loss_parts
from .optim import Adam
from .training import (Forecast, TrainConfig, TrainHistory, load_checkpoint, predict,
                       save_checkpoint, train)

__all__ = ["Adam", "Forecast", "GruConfig", "GruModel", "TrainConfig", "TrainHistory",
           "load_checkpoint", "parameter_count", "parameter_shapes", "predict",
           "save_checkpoint", "train", "wk_loss", "wk_loss_grad", "wk_loss_parts"]
