"""Neuron and filter pruning by sensitivity sampling, with error bounds over an input ball."""

__version__ = "0.1.0"

from .activations import Activation, activation_eval, activation_sup_abs_on_interval
from .baselines import percentile_coreset, uniform_coreset
from .coreset import (Coreset, QueryBall, SamplingPlan, WeightedSet, certified_epsilon,
                      coreset_layer, coreset_single, merge_duplicates, required_sample_size,
                      sampling_plan)
from .kernels import BACKEND
from .network import (ConvLayer, DenseLayer, Flatten, Network, forward, forward_linear_part,
                      load_model, save_model)
from .pruning import (PruneReport, PruneSpec, conv_layer_to_weighted_set,
                      dense_layer_to_weighted_set, propagate_beta, prune_conv, prune_dense,
                      prune_network)

__all__ = [
    "Activation", "activation_eval", "activation_sup_abs_on_interval",
    "percentile_coreset", "uniform_coreset",
    "Coreset", "QueryBall", "SamplingPlan", "WeightedSet", "certified_epsilon", "coreset_layer",
    "coreset_single", "merge_duplicates", "required_sample_size", "sampling_plan",
    "BACKEND",
    "ConvLayer", "DenseLayer", "Flatten", "Network", "forward", "forward_linear_part",
    "load_model", "save_model",
    "PruneReport", "PruneSpec", "conv_layer_to_weighted_set", "dense_layer_to_weighted_set",
    "propagate_beta", "prune_conv", "prune_dense", "prune_network",
]
