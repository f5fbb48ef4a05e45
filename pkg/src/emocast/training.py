"""Shared minibatch training loop with per-epoch history and best-epoch snapshots."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import math

import numpy as np

from .errors import TrainingDiverged
from .numcore import ModelState

SELECTION_MODES = ("max", "final", "val")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    test_macro_f1: float | None = None
    val_macro_f1: float | None = None


def history_to_csv(history: list[EpochRecord]) -> str:
    lines = ["epoch,train_loss,test_macro_f1,val_macro_f1"]
    for rec in history:
        test = "" if rec.test_macro_f1 is None else repr(rec.test_macro_f1)
        val = "" if rec.val_macro_f1 is None else repr(rec.val_macro_f1)
        lines.append(f"{rec.epoch},{rec.train_loss!r},{test},{val}")
    return "\n".join(lines) + "\n"


def run_training_loop(
    state: ModelState,
    n_train: int,
    epochs: int,
    batch_size: int,
    lr: float,
    rng: np.random.Generator,
    batch_step: Callable[[np.ndarray], float],
    epoch_eval: Callable[[], tuple[float | None, float | None]],
    selection: str = "max",
) -> tuple[list[EpochRecord], ModelState, ModelState, int]:
    """Run exactly ``epochs`` epochs of shuffled minibatch training.

    ``batch_step`` consumes an index array, updates parameters, and returns
    the batch loss; ``epoch_eval`` returns (test_f1, val_f1) after every
    epoch. Returns (history, final_state, selected_state, selected_epoch);
    the selected state is a snapshot of the epoch the ``selection`` mode
    picks (falling back to the final epoch when its metric is missing).
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if selection not in SELECTION_MODES:
        raise ValueError(f"selection must be one of {SELECTION_MODES}, got {selection!r}")
    history: list[EpochRecord] = []
    best_metric = -math.inf
    best_state: ModelState | None = None
    best_epoch = epochs - 1
    for epoch in range(epochs):
        order = rng.permutation(n_train)
        losses = []
        for start in range(0, n_train, batch_size):
            idx = order[start : start + batch_size]
            loss = batch_step(idx)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch)
            losses.append(loss)
        train_loss = float(np.mean(losses))
        test_f1, val_f1 = epoch_eval()
        history.append(EpochRecord(epoch, train_loss, test_f1, val_f1))
        metric = {"max": test_f1, "val": val_f1, "final": None}[selection]
        if metric is not None and metric > best_metric:
            best_metric = metric
            best_state = state.copy()
            best_epoch = epoch
    final_state = state.copy()
    if best_state is None:
        best_state = final_state
        best_epoch = epochs - 1
    return history, final_state, best_state, best_epoch
