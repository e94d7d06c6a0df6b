#!/usr/bin/env python3
# Graph -> network -> graph, and what pruning does to the extracted graph.

# %%
from dagnet import (GraphTransform, MaskedDeepFFN, build_dan, generate_random_layered_dag,
                    graph_stats, hidden_subgraph, recompute_mask, roundtrip_check)

g = generate_random_layered_dag(60, 5, 0.2, seed=3)
model = build_dan(784, 10, g)

# %% the probe is the shape of one input sample, here a 28x28 image
extracted = GraphTransform((28, 28)).transform(model)
print(graph_stats(extracted).to_dict()["nodes"], "vertices incl. inputs and outputs")
print("hidden part equals source:", hidden_subgraph(extracted).edge_set() == g.edge_set())
print(roundtrip_check(g, 784, 10))

# %% pruning removes edges, never adds them
recompute_mask(model, theta=0.05)
after = GraphTransform((784,)).transform(model)
print("edges before/after:", len(extracted.edges), len(after.edges))
res = roundtrip_check(g, 784, 10, model=model)
print("ok:", res.ok, "missing:", len(res.missing))

# %% layer granularity: one vertex per input, hidden layer and output group
coarse = GraphTransform((784,), granularity="layer").transform(model)
print(coarse.edges)

# %% a dense MNIST-sized FFN extracts to 784*20 + 20*10 edges
ffn = MaskedDeepFFN(784, 10, [20])
print(len(GraphTransform((784,)).transform(ffn).edges))
