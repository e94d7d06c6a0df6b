#!/usr/bin/env python3
# Threshold pruning and iterative magnitude pruning with rewind.

# %%
import numpy as np

from dagnet import (MaskedDeepFFN, apply_mask, density, fit,
                    iterative_magnitude_prune, recompute_mask, synthesize)

data = synthesize("blobs", 300, seed=0)

# %% one-shot: drop every weight with |w| < 0.1
model = MaskedDeepFFN(2, 3, [64, 32], seed=0)
fit(model, data, epochs=30, lr=0.1, batch_size=32)
print(recompute_mask(model, theta=0.1).to_jsonl())

# masked weights still hold values until the mask is burnt in
apply_mask(model)
print("density after apply_mask:", density(model))

# %% lottery ticket: train, prune 20% of survivors per layer, rewind; three rounds
model = MaskedDeepFFN(2, 3, [64, 32], seed=0)
ticket, model = iterative_magnitude_prune(model, data, rounds=3, rate=0.2, train_epochs=20,
                                          batch_size=32)
for r, report in enumerate(ticket.reports, 1):
    print(f"round {r}: density {report.global_density:.3f}")  # ~0.8, 0.64, 0.512

# the model now holds the original initial weights under the final masks
w0 = ticket.initial["hidden0.weight"]
print("rewound:", np.array_equal(model.hidden[0].weight.data, w0))

# %% retrain the ticket from its initialization
hist = fit(model, data, epochs=30, lr=0.1, batch_size=32)
print("ticket accuracy:", hist[-1]["accuracy"])

# %% install the same ticket into a fresh model
fresh = MaskedDeepFFN(2, 3, [64, 32], seed=123)
ticket.apply(fresh)
print("same masks:", all(np.array_equal(a.mask, b.mask)
                         for a, b in zip(fresh.maskable_layers(), model.maskable_layers())))
