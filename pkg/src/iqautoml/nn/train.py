"""Training loop with budgeted epochs, early stopping, and rung-wise resume.

All randomness (init, per-epoch shuffle, dropout) is derived from (seed,
purpose, epoch index), so training to budget b in one call is bit-identical
to reaching b through repeated resume calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from iqautoml.nn.model import Model, ModelSpec
from iqautoml.nn.optim import NonFiniteGradients, Optimizer, make_optimizer
from iqautoml.preprocess import SplitDataset, stack_inputs

_SEED_MASK = (1 << 64) - 1
_STREAM_INIT, _STREAM_SHUFFLE, _STREAM_DROPOUT = 0xA1, 0xA2, 0xA3

_EVAL_BATCH = 512


class TrainingDiverged(RuntimeError):
    """Loss or gradients went non-finite; carries diagnostics for the trial log."""


@dataclass(frozen=True)
class LearnConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    batch_size: int = 128
    shuffle: bool = True
    early_stopping: bool = True
    patience: int = 6


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    valid_loss: float
    valid_accuracy: float


@dataclass
class Metrics:
    loss: float
    accuracy: float
    confusion: np.ndarray  # (classes, classes), rows = true class


@dataclass
class TrainedModel:
    spec: ModelSpec
    learn: LearnConfig
    seed: int
    model: Model
    optimizer: Optimizer
    history: list[EpochRecord] = field(default_factory=list)
    epochs_consumed: int = 0
    early_stopped: bool = False
    best_valid_loss: float = np.inf
    best_epoch: int = -1
    epochs_since_improve: int = 0
    best_weights: list[np.ndarray] | None = None

    @property
    def valid_loss(self) -> float:
        """Validation loss of the model as it stands (post-restore if stopped)."""
        if self.early_stopped:
            return self.best_valid_loss
        if not self.history:
            return np.inf
        return self.history[-1].valid_loss


def _rng(seed: int, stream: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK, stream, epoch]))


def _as_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple):
        return data
    return stack_inputs(list(data))


def train(
    spec: ModelSpec,
    split: SplitDataset,
    learn: LearnConfig,
    budget_epochs: int,
    seed: int = 0,
    resume_from: TrainedModel | None = None,
    *,
    dtype=np.float32,
) -> TrainedModel:
    """Train up to a cumulative budget of epochs, resuming when given.

    Early stopping (when enabled) halts once validation loss has failed to
    improve for `patience` consecutive epochs and restores the best-validation
    weights; the trial then stays final across further resume calls.
    """
    if budget_epochs < 1:
        raise ValueError(f"budget_epochs must be >= 1, got {budget_epochs}")
    if len(split.train) == 0:
        raise ValueError("training set is empty")

    if resume_from is not None:
        if resume_from.spec != spec:
            raise ValueError("resume_from was trained with a different model spec")
        tm = resume_from
    else:
        init = _rng(seed, _STREAM_INIT, 0)
        model = Model(spec, init_seed=int(init.integers(1 << 63)), dtype=dtype)
        tm = TrainedModel(
            spec=spec,
            learn=learn,
            seed=seed,
            model=model,
            optimizer=make_optimizer(learn.optimizer, learn.learning_rate, model.parameters()),
        )

    if tm.early_stopped or tm.epochs_consumed >= budget_epochs:
        return tm

    x_train, y_train = stack_inputs(split.train)
    x_valid, y_valid = stack_inputs(split.valid) if split.valid else (None, None)
    n_train = x_train.shape[0]
    model = tm.model

    for epoch in range(tm.epochs_consumed, budget_epochs):
        if tm.learn.shuffle:
            order = _rng(seed, _STREAM_SHUFFLE, epoch).permutation(n_train)
        else:
            order = np.arange(n_train)
        dropout_rng = _rng(seed, _STREAM_DROPOUT, epoch)

        loss_sum = 0.0
        correct = 0
        for lo in range(0, n_train, tm.learn.batch_size):
            sel = order[lo : lo + tm.learn.batch_size]
            xb, yb = x_train[sel], y_train[sel]
            probs = model.forward(xb, training=True, rng=dropout_rng)
            batch_loss = model.loss(yb)
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"non-finite train loss {batch_loss} at epoch {epoch}, batch offset {lo}"
                )
            loss_sum += batch_loss * sel.size
            correct += int((probs.argmax(axis=1) == yb.argmax(axis=1)).sum())
            model.backward(yb)
            try:
                tm.optimizer.step(model.parameters(), model.gradients())
            except NonFiniteGradients as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc

        train_loss = loss_sum / n_train
        train_acc = correct / n_train
        if x_valid is not None:
            vmetrics = evaluate(model, (x_valid, y_valid))
            valid_loss, valid_acc = vmetrics.loss, vmetrics.accuracy
            if not np.isfinite(valid_loss):
                raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        else:
            valid_loss, valid_acc = train_loss, train_acc

        tm.history.append(EpochRecord(epoch, train_loss, train_acc, valid_loss, valid_acc))
        tm.epochs_consumed = epoch + 1

        if valid_loss < tm.best_valid_loss:
            tm.best_valid_loss = valid_loss
            tm.best_epoch = epoch
            tm.epochs_since_improve = 0
            if tm.learn.early_stopping:
                tm.best_weights = model.get_weights()
        else:
            tm.epochs_since_improve += 1
            if tm.learn.early_stopping and tm.epochs_since_improve >= tm.learn.patience:
                tm.early_stopped = True
                if tm.best_weights is not None:
                    model.set_weights(tm.best_weights)
                break

    return tm


def evaluate(model: Model | TrainedModel, dataset) -> Metrics:
    """Loss, accuracy, and confusion matrix on a dataset, inference mode.

    Accuracy counts rows whose argmax probability matches the label argmax;
    numpy's argmax breaks ties toward the lowest class index.
    """
    if isinstance(model, TrainedModel):
        model = model.model
    x, y = _as_arrays(dataset)
    if x.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    classes = y.shape[1]
    confusion = np.zeros((classes, classes), dtype=np.int64)
    loss_sum = 0.0
    for lo in range(0, x.shape[0], _EVAL_BATCH):
        xb, yb = x[lo : lo + _EVAL_BATCH], y[lo : lo + _EVAL_BATCH]
        probs = model.forward(xb, training=False)
        loss_sum += model.loss(yb) * xb.shape[0]
        pred = probs.argmax(axis=1)
        true = yb.argmax(axis=1)
        np.add.at(confusion, (true, pred), 1)
    total = x.shape[0]
    accuracy = float(np.trace(confusion)) / total
    return Metrics(loss=loss_sum / total, accuracy=accuracy, confusion=confusion)
