"""Mini-batch training with early stopping on validation IoU, prediction and checkpoints."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..features import WindowTensor
from ..metrics import ordinal_iou
from .gru import GruConfig, GruModel
from .loss import wk_loss_grad
from .optim import Adam

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    max_epochs: int = 3000
    patience: int = 100
    batch_size: int = 64
    seed: int = 0
    horizon: int = 1
    loss: str = "wk"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("max_epochs and batch_size must be >= 1")
        if not 0 <= self.patience <= self.max_epochs:
            raise ValueError("patience must lie in [0, max_epochs]")
        if self.loss != "wk":
            raise ValueError(f"unsupported loss {self.loss!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_iou: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_iou: float = float("-inf")

    def __len__(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Forecast:
    probs: np.ndarray
    classes: np.ndarray
    zones: np.ndarray | None = None
    dates: np.ndarray | None = None


def _batches(n: int, size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    out = [order[i:i + size] for i in range(0, n, size)]
    # batch norm needs two rows; fold a trailing singleton into the previous batch
    if len(out) > 1 and len(out[-1]) == 1:
        out[-2] = np.concatenate([out[-2], out.pop()])
    return out


def predict_probs(model: GruModel, x: np.ndarray, batch_size: int = 1024) -> np.ndarray:
    # eval mode is row-independent, so chunking does not change the result
    chunks = [model.forward(x[i:i + batch_size], train=False) for i in range(0, len(x), batch_size)]
    return np.concatenate(chunks) if chunks else np.zeros((0, model.config.output_classes))


def predict(model: GruModel, windows: WindowTensor | np.ndarray) -> Forecast:
    """Eval-mode probabilities and argmax classes; np.argmax breaks ties toward the lower class."""
    if isinstance(windows, WindowTensor):
        probs = predict_probs(model, windows.x)
        return Forecast(probs, probs.argmax(axis=1), windows.zones, windows.dates)
    probs = predict_probs(model, np.asarray(windows))
    return Forecast(probs, probs.argmax(axis=1))


def train(train_windows: WindowTensor, val_windows: WindowTensor | None,
          gru_config: GruConfig, train_config: TrainConfig) -> tuple[GruModel, TrainHistory]:
    """Fit a GRU; returns the best-validation model and the per-epoch history.

    Training stops once the monitored IoU has failed to improve for more than
    ``patience`` consecutive epochs. Without validation windows the training
    IoU is monitored instead.
    """
    if len(train_windows) == 0:
        raise ValueError("empty training set")
    if len(train_windows) < 2:
        raise ValueError("need at least two training windows for batch norm")
    tc = train_config
    model = GruModel.initialize(gru_config, seed=tc.seed)
    opt = Adam(lr=tc.learning_rate)
    rng = np.random.default_rng([tc.seed, 1])
    x, y = train_windows.x, train_windows.y
    monitor = val_windows if val_windows is not None and len(val_windows) else train_windows
    hist = TrainHistory()
    best = model.copy()
    bad = 0
    for epoch in range(tc.max_epochs):
        losses, sizes = [], []
        for idx in _batches(len(y), tc.batch_size, rng):
            probs = model.forward(x[idx], train=True, rng=rng)
            loss, dprobs = wk_loss_grad(probs, y[idx])
            grads = model.backward(dprobs)
            opt.step(model.params, grads)
            losses.append(loss)
            sizes.append(len(idx))
        hist.train_loss.append(float(np.average(losses, weights=sizes)))
        score = ordinal_iou(monitor.y, predict(model, monitor).classes)
        hist.val_iou.append(score)
        if score > hist.best_val_iou:
            hist.best_val_iou, hist.best_epoch = score, epoch
            best = model.copy()
            bad = 0
        else:
            bad += 1
            if bad > tc.patience:
                break
        if epoch % 50 == 0:
            logger.debug("epoch %d loss %.4f iou %.4f", epoch, hist.train_loss[-1], score)
    return best, hist


def save_checkpoint(path: str | Path, model: GruModel, train_config: TrainConfig | None = None,
                    best_val_iou: float | None = None, optimizer: Adam | None = None,
                    extra: dict | None = None) -> None:
    doc = {
        "format_version": CHECKPOINT_FORMAT,
        "gru_config": model.config.to_dict(),
        "train_config": train_config.to_dict() if train_config else None,
        "parameters": {k: v.tolist() for k, v in sorted(model.params.items())},
        "running_mean": model.running_mean.tolist(),
        "running_var": model.running_var.tolist(),
        "optimizer": optimizer.state_dict() if optimizer else None,
        "best_val_iou": best_val_iou,
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[GruModel, dict]:
    """Model plus the raw document (for train_config, best_val_iou and extras)."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    doc = json.loads(p.read_text(encoding="utf-8"))
    if doc.get("format_version") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format_version')!r}")
    cfg = GruConfig(**doc["gru_config"])
    params = {k: np.asarray(v, dtype=np.float64) for k, v in doc["parameters"].items()}
    model = GruModel(cfg, params, doc["running_mean"], doc["running_var"])
    return model, doc
