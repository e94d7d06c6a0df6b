#!/usr/bin/env python3
# Cells on graph vertices: a trainable channel mixer and a forward-only 5x5 conv cell.

# %%
import numpy as np

from dagnet import (ChannelMixCell, ReductionCell, build_cell_dan, generate_random_layered_dag,
                    softmax_cross_entropy, sgd_step)
from dagnet.extraction import ExtractionConfig, transform


# the constructor sees the vertex's position in the graph
def constructor(is_input, is_output, in_degree, out_degree, layer, input_channel_size):
    return ChannelMixCell(input_channel_size if is_input else in_degree, 1)


g = generate_random_layered_dag(12, 4, 0.3, seed=0)
net = build_cell_dan(10, 3, constructor, g, seed=0)
print(net)

# %% a few SGD steps on random images
rng = np.random.default_rng(0)
x, y = rng.normal(size=(8, 3, 16, 16)), rng.integers(0, 10, 8)
for step in range(5):
    net.zero_grad()
    loss = softmax_cross_entropy(net(x), y)
    loss.backward()
    sgd_step(net.parameters(), 0.1)
    print(step, round(loss.item(), 4))


# %% conv + relu + batchnorm cells run forward only
def reduction(is_input, is_output, in_degree, out_degree, layer, input_channel_size):
    return ReductionCell(input_channel_size if is_input else in_degree, 1)


conv_net = build_cell_dan(10, 3, reduction, g, seed=0)
image = rng.random((1, 3, 224, 224)).astype(np.float32)
print(conv_net.predict(image).shape)

# %% one vertex per cell in the extracted graph
cells = transform(conv_net, ExtractionConfig((3, 32, 32), granularity="layer"))
print(cells.edge_set() == g.edge_set())
