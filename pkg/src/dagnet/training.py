"""Mini-batch SGD training loop."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .data import Dataset
from .errors import DataError
from .tensor import Tensor, no_grad, sgd_step, softmax_cross_entropy

__all__ = ["fit", "accuracy", "evaluate"]


def _inputs(model, X: np.ndarray) -> Tensor:
    return Tensor(X.astype(model.dtype, copy=False))


def evaluate(model, data: Dataset) -> tuple[float, float]:
    """Return ``(mean loss, accuracy)`` over the whole dataset."""
    if len(data) == 0:
        raise DataError("empty dataset")
    with no_grad():
        logits = model(_inputs(model, data.X))
        loss = softmax_cross_entropy(logits, data.y).item()
    return loss, float(np.mean(logits.data.argmax(axis=1) == data.y))


def accuracy(model, data: Dataset) -> float:
    return evaluate(model, data)[1]


def fit(model, data: Dataset, epochs: int, lr: float, batch_size: int | None = None,
        seed: int = 0, shuffle: bool = True,
        on_epoch: Callable[[dict], None] | None = None) -> list[dict]:
    """Train with plain SGD; returns one ``{"epoch", "loss", "accuracy"}`` record per epoch.

    ``batch_size=None`` means full-batch.  Loss and accuracy are measured on the
    full training set after each epoch.
    """
    if len(data) == 0:
        raise DataError("empty dataset")
    n = len(data)
    bs = n if batch_size is None else max(1, min(batch_size, n))
    rng = np.random.default_rng(seed)
    params = model.parameters()
    history = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n) if shuffle else np.arange(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            model.zero_grad()
            loss = softmax_cross_entropy(model(_inputs(model, data.X[idx])), data.y[idx])
            loss.backward()
            sgd_step(params, lr)
        loss_val, acc = evaluate(model, data)
        rec = {"epoch": epoch, "loss": loss_val, "accuracy": acc}
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
    return history
