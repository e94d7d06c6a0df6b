"""Magnitude pruning on the binary masks of a model.

``recompute_mask`` only ever switches mask entries off: the new mask is the
old mask AND ``|W| >= theta`` (pass ``fresh=True`` to threshold raw
magnitudes instead).  ``apply_mask`` burns the mask into the weights.
``iterative_magnitude_prune`` runs the lottery-ticket loop of train, prune
a fixed fraction of survivors, and optionally rewind to the initial weights.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .data import Dataset
from .errors import DataError, NoMaskableLayersError
from .nn import MaskedLinear
from .training import fit

__all__ = [
    "LayerDensity",
    "PruneReport",
    "TicketState",
    "prune_report",
    "recompute_mask",
    "apply_mask",
    "density",
    "quantile_threshold",
    "prune_by_rate",
    "iterative_magnitude_prune",
    "io_layers",
]


@dataclass(frozen=True)
class LayerDensity:
    layer: str
    kept: int
    total: int
    density: float


@dataclass(frozen=True)
class PruneReport:
    layers: tuple[LayerDensity, ...]
    global_density: float

    @property
    def kept(self) -> int:
        return sum(l.kept for l in self.layers)

    @property
    def total(self) -> int:
        return sum(l.total for l in self.layers)

    def to_jsonl(self) -> str:
        compact = dict(separators=(",", ":"))
        lines = [json.dumps({"layer": l.layer, "kept": l.kept, "total": l.total, "density": l.density},
                            **compact) for l in self.layers]
        lines.append(json.dumps({"global_density": self.global_density}, **compact))
        return "\n".join(lines) + "\n"


def _layers(model) -> list[MaskedLinear]:
    layers = list(model.maskable_layers())
    if not layers:
        raise NoMaskableLayersError(f"{type(model).__name__} has no maskable layers")
    return layers


def io_layers(model) -> set[str]:
    """Names of the blocks touching the model's input or output."""
    layers = _layers(model)
    if getattr(model, "kind", "") == "cell":
        return {layers[-1].name}
    return {layers[0].name, layers[-1].name}


def prune_report(model) -> PruneReport:
    rows = []
    for layer in _layers(model):
        kept, total = int(layer.mask.sum()), int(layer.mask.size)
        rows.append(LayerDensity(layer.name, kept, total, kept / total))
    return PruneReport(tuple(rows), sum(r.kept for r in rows) / sum(r.total for r in rows))


def density(model) -> float:
    """Fraction of unmasked entries over all maskable layers."""
    return prune_report(model).global_density


def _threshold_layer(layer: MaskedLinear, theta: float, fresh: bool) -> None:
    keep = (np.abs(layer.weight.data) >= theta).astype(np.uint8)
    layer.mask = keep if fresh else layer.mask & keep


def recompute_mask(model, theta: float = 0.1, fresh: bool = False,
                   protect_io: bool = False) -> PruneReport:
    """Drop every connection whose weight magnitude is below ``theta``.

    Ties (``|W| == theta``) survive, so ``theta=0`` is a no-op.
    """
    if theta < 0:
        raise ValueError(f"theta must be non-negative, got {theta}")
    skip = io_layers(model) if protect_io else set()
    for layer in _layers(model):
        if layer.name not in skip:
            _threshold_layer(layer, theta, fresh)
    return prune_report(model)


def apply_mask(model):
    """Zero every masked weight in place (not undoable)."""
    for layer in _layers(model):
        layer.weight.data[...] = layer.effective_weight()
    return model


def quantile_threshold(magnitudes: np.ndarray, rate: float) -> float:
    """Smallest threshold that prunes ``round(rate * n)`` of ``magnitudes`` (ties kept)."""
    s = np.sort(np.asarray(magnitudes, dtype=np.float64).ravel())
    if s.size == 0:
        return 0.0
    k = int(np.floor(rate * s.size + 0.5))
    return float("inf") if k >= s.size else float(s[k])


def prune_by_rate(model, rate: float, scope: str = "layer", protect_io: bool = False) -> PruneReport:
    """Prune a ``rate`` fraction of the surviving weights, per layer or globally."""
    if not 0 < rate < 1:
        raise ValueError(f"rate must lie in (0, 1), got {rate}")
    skip = io_layers(model) if protect_io else set()
    targets = [l for l in _layers(model) if l.name not in skip]

    def survivors(layer):
        return np.abs(layer.weight.data[layer.mask.astype(bool)])

    if scope == "layer":
        for layer in targets:
            _threshold_layer(layer, quantile_threshold(survivors(layer), rate), fresh=False)
    elif scope == "global":
        if targets:
            theta = quantile_threshold(np.concatenate([survivors(l) for l in targets]), rate)
            for layer in targets:
                _threshold_layer(layer, theta, fresh=False)
    else:
        raise ValueError(f"scope must be 'layer' or 'global', got {scope!r}")
    return prune_report(model)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass
class TicketState:
    """Initial weights plus the masks found by iterative pruning."""

    initial: Mapping[str, np.ndarray]
    masks: dict[str, np.ndarray]
    reports: list[PruneReport] = field(default_factory=list)

    @classmethod
    def capture(cls, model) -> TicketState:
        initial = {name: _frozen(p.data) for name, p in model.named_parameters()}
        masks = {l.name: l.mask.copy() for l in _layers(model)}
        return cls(MappingProxyType(initial), masks)

    def rewind(self, model) -> None:
        """Restore the snapshot parameters; masks are left as they are."""
        for name, p in model.named_parameters():
            p.data[...] = self.initial[name]

    def apply(self, model) -> None:
        """Install the ticket (snapshot weights and masks) into ``model``."""
        self.rewind(model)
        for layer in _layers(model):
            layer.set_mask(self.masks[layer.name])


def iterative_magnitude_prune(model, data: Dataset, rounds: int, rate: float, train_epochs: int,
                              rewind: bool = True, lr: float = 0.1, batch_size: int | None = None,
                              seed: int = 0, scope: str = "layer",
                              protect_io: bool = False) -> tuple[TicketState, object]:
    """Repeat ``rounds`` times: train, prune ``rate`` of survivors, optionally rewind.

    After ``r`` rounds each pruned layer keeps about ``(1 - rate) ** r`` of its
    entries.  With ``rewind`` the returned model holds the initial weights
    under the final masks, i.e. the untrained ticket.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if not 0 < rate < 1:
        raise ValueError(f"rate must lie in (0, 1), got {rate}")
    if len(data) == 0:
        raise DataError("empty dataset")
    ticket = TicketState.capture(model)
    for r in range(rounds):
        fit(model, data, train_epochs, lr, batch_size=batch_size, seed=seed + r)
        ticket.reports.append(prune_by_rate(model, rate, scope=scope, protect_io=protect_io))
        if rewind:
            ticket.rewind(model)
    ticket.masks = {l.name: l.mask.copy() for l in _layers(model)}
    return ticket, model
