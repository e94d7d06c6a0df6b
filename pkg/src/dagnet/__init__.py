"""Compile DAGs into mask-sparse neural networks, prune them, and extract graphs back."""
from .cells import (ChannelMixCell, DeepCellDAN, ReductionCell, build_cell_dan,
                    channel_mix_constructor, reduction_constructor)
from .data import Dataset, load_csv, load_idx, save_idx, synthesize
from .errors import *  # noqa: F401,F403
from .extraction import (ExtractionConfig, GraphTransform, graph_stats, hidden_subgraph,
                         roundtrip_check, transform)
from .generators import (GeneratorSpec, generate, generate_newman_watts_strogatz,
                         generate_random_layered_dag, orient_to_dag)
from .graph import Dag, LayeredDag, compute_layering, cross_layer_adjacency, graph_density
from .io import load_graph, load_model, save_graph, save_model
from .models import (MaskedDeepDAN, MaskedDeepFFN, build_dan, build_ffn, chain_of_cliques,
                     maskable_layers)
from .nn import MaskedLinear
from .pruning import (PruneReport, TicketState, apply_mask, density, iterative_magnitude_prune,
                      prune_by_rate, recompute_mask)
from .tensor import Tensor, no_grad, sgd_step, softmax_cross_entropy
from .training import accuracy, fit

__version__ = "0.1.0"
