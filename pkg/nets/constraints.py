"""Scalar constraint heads over graphs and padded feature vectors."""
from dataclasses import dataclass

from adcore import ops
from adcore.exceptions import ShapeError
from adcore.tape import ADValue, lift
from nets.configs import AGGREGATIONS
from nets.layers import (decode, gnn_forward, mlp_forward, mlp_sizes,
                         param_subtree)

MLP_CONSTRAINT_VARIANTS = ("np_positions_only", "cmlp_with_context")


@dataclass(frozen=True, eq=False)
class ConstraintOutput:
    """
    `per_graph` holds one constraint value per graph of a batch (shape G);
    `c` is their sum, which is the scalar the solver differentiates since
    graphs in a batch share no nodes. `per_node` is the pre-aggregation
    decoder output (absent for MLP constraints).
    """
    per_graph: ADValue
    per_node: ADValue | None = None

    @property
    def c(self):
        return ops.reduce_sum(self.per_graph)


def aggregate(per_node, segment_ids, num_graphs, aggregation):
    if aggregation == "mean_of_squares":
        return ops.segment_mean(ops.square(per_node), segment_ids,
                                num_graphs)
    if aggregation == "plain_sum":
        return ops.scatter_sum_by_index(per_node, segment_ids, num_graphs)
    raise ValueError(f"unknown aggregation {aggregation!r}; "
                     f"expected one of {AGGREGATIONS}")


def constraint_value(params, graph, config, aggregation="mean_of_squares",
                     prefix="constraint", positional=False):
    """
    GNN constraint on a graph that already carries the proposal, or, with
    `positional`, on a graph whose edges were built from proposed positions.
    """
    if not graph.proposal_width and not positional:
        raise ValueError("constraint needs a graph with an attached proposal")
    latents = gnn_forward(params, graph, config, prefix)
    per_node = ops.reshape(decode(params, latents, config, prefix),
                           (graph.num_nodes,))
    per_graph = aggregate(per_node, graph.segment_ids, graph.num_graphs,
                          aggregation)
    return ConstraintOutput(per_graph=per_graph, per_node=per_node)


def mlp_constraint_layer_spec(prefix, config, row_width, max_nodes):
    hidden = [config.mlp_constraint_units] * config.mlp_constraint_layers
    return {f"{prefix}/mlp": mlp_sizes(row_width * max_nodes, hidden, 1)}


def pad_rows(rows, n_node, max_nodes):
    """
    Flatten each graph's node rows (node-major) and zero-pad to
    `max_nodes` rows: returns G x (max_nodes * F).
    """
    rows = lift(rows)
    width = rows.shape[1]
    padded = []
    start = 0
    for count in n_node:
        if count > max_nodes:
            raise ShapeError("mlp_constraint", (count, width),
                             (max_nodes, width),
                             detail=f"{count} nodes exceed padding capacity "
                                    f"{max_nodes}")
        block = ops.slice_(rows, (slice(start, start + count), slice(None)))
        flat = ops.reshape(block, (1, count * width))
        padded.append(ops.embed(flat, (1, max_nodes * width),
                                (slice(None), slice(0, count * width))))
        start += count
    return ops.concat(padded, axis=0)


def mlp_constraint_value(params, rows, n_node, config, max_nodes,
                         aggregation="mean_of_squares", prefix="constraint"):
    """
    MLP over the padded concatenation of per-node rows. For the
    positions-only variant `rows` are the proposed positions; with context
    they are the node features with the proposal attached.
    """
    flat = pad_rows(rows, n_node, max_nodes)
    raw = mlp_forward(param_subtree(params, f"{prefix}/mlp"), flat,
                      config.activation, layer_norm=False)
    raw = ops.reshape(raw, (len(n_node),))
    if aggregation == "mean_of_squares":
        return ConstraintOutput(per_graph=ops.square(raw))
    if aggregation == "plain_sum":
        return ConstraintOutput(per_graph=raw)
    raise ValueError(f"unknown aggregation {aggregation!r}")
