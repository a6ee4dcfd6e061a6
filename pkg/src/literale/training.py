"""1-N training: label smoothing, sigmoid cross-entropy, Adam, early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import numeric as nx
from .data import TripleStore, batch_targets
from .errors import ConfigurationError

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 128
    max_epochs: int = 100
    label_smoothing: float = 0.1
    eval_every: int = 3
    patience: int = 5
    seed: int = 0
    eval_batch_size: int = 512

    def __post_init__(self):
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigurationError(f"label_smoothing must be in [0, 1), got {self.label_smoothing}")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.eval_every < 1:
            raise ConfigurationError("eval_every must be >= 1")
        if self.max_epochs < 0 or self.patience < 1:
            raise ConfigurationError("max_epochs must be >= 0 and patience >= 1")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be non-negative")

    @staticmethod
    def default_epochs(model_kind: str, fusion_kind: str) -> int:
        if model_kind == "conve":
            return 1000
        if fusion_kind == "gate":
            return 500
        return 100


def smooth_labels(y, epsilon: float, n_entities: int | None = None):
    y = np.asarray(y, dtype=float)
    n = y.shape[-1] if n_entities is None else n_entities
    return (1.0 - epsilon) * y + epsilon / n


def bce_loss(scores, targets):
    """Mean binary cross-entropy of ``sigmoid(scores)`` against ``targets``.

    Each row's loss is averaged over its N_e entries and rows are averaged
    over the batch. Returns ``(loss, dloss/dscores)``; the gradient is
    ``(sigmoid(scores) - targets) / (N_e * B)``.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(targets, dtype=float)
    if s.shape != y.shape:
        raise ConfigurationError(f"scores {s.shape} and targets {y.shape} differ in shape")
    # -[y log p + (1-y) log(1-p)] = softplus(s) - y s, softplus computed stably
    softplus = np.maximum(s, 0.0) + np.log1p(np.exp(-np.abs(s)))
    per_entry = softplus - y * s
    loss = float(per_entry.mean())
    grad = (nx.sigmoid_forward(s) - y) / s.size
    return loss, grad


@dataclass
class EpochState:
    epoch: int
    loss: float
    val_mrr: float | None = None


def train_epoch(model, store: TripleStore, optimizer: nx.AdamConfig, rng: np.random.Generator, config: TrainConfig) -> float:
    """One pass over the shuffled ``(head, relation)`` training keys; returns the mean batch loss."""
    pairs = store.training_pairs()
    if len(pairs) == 0:
        raise ConfigurationError("no training triples")
    pairs = pairs[rng.permutation(len(pairs))]
    n = model.n_entities
    losses = []
    for start in range(0, len(pairs), config.batch_size):
        batch = pairs[start : start + config.batch_size]
        targets = smooth_labels(batch_targets(batch, store, n), config.label_smoothing, n)
        scores, cache = model.forward(batch[:, 0], batch[:, 1], train=True, rng=rng)
        loss, dscores = bce_loss(scores, targets)
        model.store.zero_grads()
        model.backward(cache, dscores)
        nx.adam_step(model.store, optimizer)
        losses.append(loss)
    model.store.zero_grads()
    return float(np.mean(losses))


@dataclass
class FitResult:
    best_store: nx.ParameterStore
    best_mrr: float
    best_epoch: int
    log: list[EpochState] = field(default_factory=list)
    stopped_early: bool = False


class EarlyStopping:
    """Tracks the best validation score and signals after ``patience`` evaluations without improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -math.inf
        self.best_index = -1
        self.bad = 0
        self.count = 0

    def update(self, value: float) -> bool:
        """Record one evaluation; returns True when training should stop."""
        improved = value > self.best
        if improved:
            self.best = value
            self.best_index = self.count
            self.bad = 0
        else:
            self.bad += 1
        self.count += 1
        return self.bad >= self.patience

    @property
    def improved_last(self) -> bool:
        return self.best_index == self.count - 1


def fit(model, store: TripleStore, config: TrainConfig, evaluate_fn=None, log_file=None) -> FitResult:
    """Train with periodic validation and keep the best-MRR parameters.

    ``evaluate_fn(model) -> float`` defaults to filtered validation MRR.
    ``log_file`` receives one ``epoch<TAB>loss<TAB>val_mrr`` line per epoch.
    """
    if not store.valid:
        raise ConfigurationError("validation split is empty")
    if evaluate_fn is None:
        from .evaluation import evaluate

        def evaluate_fn(m):
            return evaluate(m, store, "valid", filtered=True, batch_size=config.eval_batch_size).mrr

    rng = np.random.default_rng(config.seed)
    optimizer = nx.AdamConfig(learning_rate=config.learning_rate)
    stopper = EarlyStopping(config.patience)
    result = FitResult(best_store=model.store.copy(), best_mrr=-math.inf, best_epoch=0)

    if log_file is not None:
        log_file.write("epoch\tloss\tval_mrr\n")
    for epoch in range(1, config.max_epochs + 1):
        loss = train_epoch(model, store, optimizer, rng, config)
        state = EpochState(epoch, loss)
        stop = False
        if epoch % config.eval_every == 0 or epoch == config.max_epochs:
            state.val_mrr = float(evaluate_fn(model))
            stop = stopper.update(state.val_mrr)
            if stopper.improved_last:
                result.best_store = model.store.copy()
                result.best_mrr = state.val_mrr
                result.best_epoch = epoch
        result.log.append(state)
        if log_file is not None:
            mrr = "" if state.val_mrr is None else repr(state.val_mrr)
            log_file.write(f"{epoch}\t{loss!r}\t{mrr}\n")
            log_file.flush()
        log.info("epoch %d loss %.6f val_mrr %s", epoch, loss, state.val_mrr)
        if stop:
            result.stopped_early = True
            break
    return result


def read_training_log(path) -> list[EpochState]:
    states = []
    with open(path, encoding="utf-8") as f:
        next(f)
        for line in f:
            epoch, loss, mrr = line.rstrip("\n").split("\t")
            states.append(EpochState(int(epoch), float(loss), float(mrr) if mrr else None))
    return states
