"""
MLPs and the encode-process-decode graph network.

Parameters arrive as a flat mapping name -> array-or-ADValue using the
layout produced by `gnn_layer_spec` / `mlp_sizes`:

    <prefix>/encoder/node/w0 ...      node encoder
    <prefix>/encoder/edge/w0 ...      edge encoder
    <prefix>/processor/block<m>/edge_mlp/w0 ...
    <prefix>/processor/block<m>/node_mlp/w0 ...
    <prefix>/decoder/w0 ...           per-node head (no LayerNorm)
"""
import logging

import numpy as np

from adcore import ops
from adcore.exceptions import ShapeError
from adcore.tape import lift

logger = logging.getLogger(__name__)

_ACTIVATIONS = {
    "softplus": ops.softplus,
    "tanh": ops.tanh,
}


def mlp_sizes(in_width, hidden, out_width):
    return [int(in_width)] + [int(h) for h in hidden] + [int(out_width)]


def gnn_layer_spec(prefix, config, node_width, edge_width, out_width):
    """Layer sizes for every MLP of one GNN, keyed by parameter prefix."""
    hidden = config.hidden_sizes()
    latent = config.latent_size
    spec = {
        f"{prefix}/encoder/node": mlp_sizes(node_width, hidden, latent),
        f"{prefix}/encoder/edge": mlp_sizes(edge_width, hidden, latent),
        f"{prefix}/decoder": mlp_sizes(latent, hidden, out_width),
    }
    for m in range(config.num_message_passing):
        block = f"{prefix}/processor/block{m}"
        spec[f"{block}/edge_mlp"] = mlp_sizes(3 * latent, hidden, latent)
        spec[f"{block}/node_mlp"] = mlp_sizes(2 * latent, hidden, latent)
    return spec


def param_subtree(params, prefix):
    head = prefix.rstrip("/") + "/"
    return {name[len(head):]: value for name, value in params.items()
            if name.startswith(head)}


def _num_layers(params):
    count = 0
    while f"w{count}" in params:
        count += 1
    if count == 0:
        raise KeyError("MLP parameters need at least w0/b0")
    return count


def mlp_forward(params, x, activation="softplus", layer_norm=False):
    """
    Dense layers `x @ w_i + b_i`; the activation runs between layers and
    the last layer is linear. With `layer_norm` the output row is
    normalised.
    """
    x = lift(x)
    act = _ACTIVATIONS[activation]
    depth = _num_layers(params)
    w0 = lift(params["w0"])
    if x.ndim != 2 or x.shape[1] != w0.shape[0]:
        raise ShapeError("mlp_forward", x.shape, w0.shape,
                         detail="trailing dimension must match first layer")
    h = x
    for i in range(depth):
        h = ops.add(ops.matmul(h, params[f"w{i}"]), params[f"b{i}"])
        if i < depth - 1:
            h = act(h)
    if layer_norm:
        h = ops.layer_norm(h)
    return h


def gnn_forward(params, graph, config, prefix):
    """Per-node latents after encoding and message passing."""
    tree = param_subtree(params, prefix)
    norm = config.use_layer_norm
    act = config.activation

    h = mlp_forward(param_subtree(tree, "encoder/node"), graph.node_features,
                    act, norm)
    num_edges = graph.edges.shape[0]
    if num_edges:
        e = mlp_forward(param_subtree(tree, "encoder/edge"),
                        graph.edge_features, act, norm)
    num_nodes = h.shape[0]
    latent = h.shape[1]

    for m in range(config.num_message_passing):
        block = param_subtree(tree, f"processor/block{m}")
        if num_edges:
            edge_in = ops.concat([
                e,
                ops.gather_by_index(h, graph.senders),
                ops.gather_by_index(h, graph.receivers),
            ], axis=1)
            e = ops.add(e, mlp_forward(param_subtree(block, "edge_mlp"),
                                       edge_in, act, norm))
            messages = ops.scatter_sum_by_index(e, graph.receivers,
                                                num_nodes)
        else:
            messages = lift(np.zeros((num_nodes, latent)))
        node_in = ops.concat([h, messages], axis=1)
        h = ops.add(h, mlp_forward(param_subtree(block, "node_mlp"),
                                   node_in, act, norm))
    return h


def decode(params, latents, config, prefix):
    return mlp_forward(param_subtree(params, f"{prefix}/decoder"), latents,
                       config.activation, layer_norm=False)