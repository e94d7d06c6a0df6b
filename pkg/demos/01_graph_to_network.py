#!/usr/bin/env python3
# Sample a small-world graph, layer it, and compile it into a sparse network.

# %%
import numpy as np

from dagnet import (Dag, GeneratorSpec, build_dan, compute_layering, cross_layer_adjacency, fit,
                    generate, graph_stats, synthesize)

# %% a Newman-Watts-Strogatz graph, oriented low id -> high id
g = generate(GeneratorSpec("watts_strogatz_newman", n=100, k=4, p=0.5, seed=1))
stats = graph_stats(g)
print(stats.num_nodes, "nodes,", stats.num_edges, "edges, density", round(stats.density, 4))

# %% the ring edges i -> i+1 form a path through every vertex,
# so longest-path layering gives one vertex per layer here
print(stats.num_layers, "layers")

# %% a random layered DAG is the wide alternative
g = generate(GeneratorSpec("random_layered_dag", n=60, p=0.2, seed=1, layers=4))
print("layer sizes:", [len(layer) for layer in g.layers])
print("block 0->1 mask shape:", cross_layer_adjacency(g, 0, 1).shape)

# %% one neuron per vertex, one masked block per connected layer pair
model = build_dan(2, 3, g, seed=0)
print(model)
skips = [k for k in model.blocks if k[1] - k[0] > 1]
print(f"{len(model.blocks)} hidden blocks, {len(skips)} of them skip blocks")

# %% train it on three Gaussian blobs
data = synthesize("blobs", 300, seed=0)
history = fit(model, data, epochs=100, lr=0.1, batch_size=32, seed=0)
print("final accuracy:", history[-1]["accuracy"])

# %% a hand-made graph works the same way
tiny = compute_layering(Dag([(0, 1), (1, 2), (0, 2)]))
print(tiny.layers, np.asarray(cross_layer_adjacency(tiny, 0, 2)))
