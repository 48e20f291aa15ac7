"""Training loop: Adam updates, early stopping on validation loss.

Epoch bookkeeping follows the usual checkpoint discipline: after every
epoch the validation loss is measured with dropout off; the weights of
the best epoch so far are kept, and training stops once validation loss
has failed to improve for ``patience`` consecutive epochs (or the epoch
cap is reached).  The returned network carries the best-epoch weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..rng import Rng
from .model import ControllerNet


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    l2: float = 1e-5
    dropout: float = 0.5
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 3

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown train config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class History:
    epochs: list = field(default_factory=list)  # (epoch, train_loss, val_loss)
    best_epoch: int = 0
    stopped_epoch: int = 0
    diverged: bool = False

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "best_flag"])
            for epoch, tr, va in self.epochs:
                w.writerow([epoch, repr(tr), repr(va), int(epoch == self.best_epoch)])

    def val_losses(self):
        return [va for _, _, va in self.epochs]


class TrainingDiverged(RuntimeError):
    def __init__(self, history: History):
        super().__init__(f"validation loss became non-finite at epoch {history.stopped_epoch}")
        self.history = history


def early_stop_trace(val_losses, patience: int):
    """(stop_epoch, best_epoch) for a validation-loss sequence, 1-based.

    Improvement means strictly lower than the best seen so far; training
    stops after ``patience`` consecutive non-improving epochs.
    """
    best = float("inf")
    best_epoch = 0
    bad = 0
    for i, v in enumerate(val_losses, start=1):
        if v < best:
            best, best_epoch, bad = v, i, 0
        else:
            bad += 1
            if bad >= patience:
                return i, best_epoch
    return len(val_losses), best_epoch


class Adam:
    def __init__(self, layers, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = [{"w": np.zeros_like(l["w"]), "b": np.zeros_like(l["b"])} for l in layers]
        self.v = [{"w": np.zeros_like(l["w"]), "b": np.zeros_like(l["b"])} for l in layers]

    def step(self, layers, grads) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for lay, g, m, v in zip(layers, grads, self.m, self.v):
            for key in ("w", "b"):
                m[key] = c.beta1 * m[key] + (1.0 - c.beta1) * g[key]
                v[key] = c.beta2 * v[key] + (1.0 - c.beta2) * g[key] ** 2
                mhat = m[key] / bc1
                vhat = v[key] / bc2
                lay[key] = lay[key] - c.learning_rate * mhat / (np.sqrt(vhat) + c.epsilon)


def mse(net: ControllerNet, x: np.ndarray, y: np.ndarray, batch: int = 256) -> float:
    """Plain data MSE with dropout off (the validation metric)."""
    total = 0.0
    for i in range(0, len(x), batch):
        preds = net.forward(x[i : i + batch])
        r = preds - y[i : i + batch]
        total += float(r @ r)
    return total / len(x)


def train(
    net: ControllerNet,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
    rng: Rng,
):
    """Fit in place; returns (net with best-epoch weights, History)."""
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("train and validation splits must be non-empty")
    y_train = np.asarray(y_train, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    opt = Adam(net.layers, cfg)
    history = History()
    best_val = float("inf")
    best_weights = None
    bad = 0
    order = list(range(len(x_train)))
    for epoch in range(1, cfg.max_epochs + 1):
        rng.shuffle(order)
        loss_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            grads, loss = net.backward(
                x_train[idx], y_train[idx], l2=cfg.l2, rng=rng, dropout=cfg.dropout
            )
            opt.step(net.layers, grads)
            loss_sum += loss * len(idx)
        train_loss = loss_sum / len(order)
        val_loss = mse(net, x_val, y_val)
        history.epochs.append((epoch, train_loss, val_loss))
        history.stopped_epoch = epoch
        if not np.isfinite(val_loss):
            history.diverged = True
            raise TrainingDiverged(history)
        if val_loss < best_val:
            best_val = val_loss
            history.best_epoch = epoch
            best_weights = [{"w": l["w"].copy(), "b": l["b"].copy()} for l in net.layers]
            bad = 0
        else:
            bad += 1
            if bad >= cfg.patience:
                break
    if best_weights is not None:
        net.layers = best_weights
    return net, history
