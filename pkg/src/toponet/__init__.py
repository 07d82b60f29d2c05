"""Topological view of softmax classifiers: labeled manifold data, explicit
separators, small ReLU networks, per-layer moves and simplex Voronoi cells."""

__version__ = "0.1.0"

from .data import LabeledPointSet, generate, parse_shape
from .network import (
    ActivationTrace,
    Hyperparams,
    LayerSpec,
    Network,
    NetworkSpec,
    forward,
    head,
    trace_activations,
    train,
)
from .separator import (
    disc_separability_check,
    kernel_collision_witness,
    lift_to_rk,
    urysohn_multiclass,
    urysohn_pair,
)
from .simplex import separation_verdict, softmax_map, voronoi_cell_of
from .moves import classify_relu_action, decompose_linear, layer_move_summary
from .embedding import epsilon_components, isomap
