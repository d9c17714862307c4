import logging
from dataclasses import replace
from typing import TYPE_CHECKING

import numpy as np

from adcore import ops
from adcore.tape import ADValue, lift
from graphs.structures import ContextGraph, FeatureConfig, Proposal

if TYPE_CHECKING:
    from data.structures import NormStats

logger = logging.getLogger(__name__)

CONNECTIVITY_KINDS = ("chain", "fully_connected", "radius")


def _is_traced(value):
    return isinstance(value, ADValue)


class GraphService:
    """Builders for connectivity, context graphs and graph batches."""

    @staticmethod
    def build_connectivity(positions, kind, radius=None):
        """Directed edge list (E x 2, columns sender/receiver), no self
        edges."""
        positions = np.asarray(positions, dtype=np.float64)
        num_nodes = positions.shape[0]
        if num_nodes == 0:
            raise ValueError("cannot build connectivity for zero nodes")
        if kind == "chain":
            pairs = []
            for j in range(num_nodes - 1):
                pairs.append((j, j + 1))
                pairs.append((j + 1, j))
        elif kind == "fully_connected":
            pairs = [(j, k) for j in range(num_nodes)
                     for k in range(num_nodes) if j != k]
        elif kind == "radius":
            if radius is None or radius <= 0:
                raise ValueError("radius connectivity needs r > 0")
            deltas = positions[None, :, :] - positions[:, None, :]
            close = np.linalg.norm(deltas, axis=-1) < radius
            np.fill_diagonal(close, False)
            pairs = [tuple(p) for p in np.argwhere(close)]
        else:
            raise ValueError(
                f"unknown connectivity {kind!r}; "
                f"expected one of {CONNECTIVITY_KINDS}")
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    @staticmethod
    def clipped_wall_distances(positions, box, cap):
        return np.clip(box.wall_distances(positions), 0.0, cap)

    @staticmethod
    def build_context_graph(window, edges, config: FeatureConfig,
                            norm: "NormStats | None" = None):
        history = config.history
        if window.length < history + 1:
            raise ValueError(
                f"context needs {history + 1} positions, got {window.length}")
        num_nodes, dim = window.num_nodes, window.dim

        velocities = window.velocities[-history:]
        if norm is not None:
            velocities = norm.normalize_inputs(velocities)
        # J x (H*D), oldest velocity first
        velocity_channels = np.transpose(velocities, (1, 0, 2)).reshape(
            num_nodes, history * dim)

        columns = [window.statics.one_hot()]
        if config.use_radius:
            if window.statics.radius is None:
                raise ValueError("radius feature requested but statics "
                                 "carry no radius")
            columns.append(window.statics.radius[:, None])
        columns.append(velocity_channels)
        wall_channels = None
        if config.wall_clip is not None:
            if window.box is None:
                raise ValueError("wall features requested without a box")
            start = sum(c.shape[1] for c in columns)
            walls = GraphService.clipped_wall_distances(
                window.latest, window.box, config.wall_clip)
            columns.append(walls)
            wall_channels = slice(start, start + walls.shape[1])

        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            raise ValueError("edge index out of range")
        latest = window.latest
        edge_features = latest[edges[:, 1]] - latest[edges[:, 0]]

        return ContextGraph(
            node_features=np.concatenate(columns, axis=1),
            edges=edges,
            edge_features=edge_features,
            fixed_mask=window.statics.fixed_mask.copy(),
            n_node=(num_nodes,),
            wall_channels=wall_channels,
        )

    @staticmethod
    def build_static_graph(window, edges, config: FeatureConfig):
        """Statics-only graph; positional channels come from a proposal
        via `with_positions`."""
        columns = [window.statics.one_hot()]
        if config.use_radius:
            columns.append(window.statics.radius[:, None])
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        return ContextGraph(
            node_features=np.concatenate(columns, axis=1),
            edges=edges,
            edge_features=np.zeros((edges.shape[0], window.dim)),
            fixed_mask=window.statics.fixed_mask.copy(),
            n_node=(window.num_nodes,),
        )

    @staticmethod
    def with_positions(static_graph, positions, box, config: FeatureConfig):
        """Edge displacements (and clipped wall distances) computed from
        proposed positions, differentiably."""
        positions = lift(positions)
        edge_features = ops.sub(
            ops.gather_by_index(positions, static_graph.receivers),
            ops.gather_by_index(positions, static_graph.senders))
        node_features = lift(static_graph.node_features)
        wall_channels = None
        if config.wall_clip is not None:
            lower = np.asarray(box.lower, dtype=np.float64)
            upper = np.asarray(box.upper, dtype=np.float64)
            walls = []
            for axis in range(config.dim):
                coord = ops.slice_(positions, (slice(None),
                                               slice(axis, axis + 1)))
                walls.append(ops.sub(coord, lower[axis]))
                walls.append(ops.sub(upper[axis], coord))
            walls = ops.clip(ops.concat(walls, axis=1), 0.0, config.wall_clip)
            start = node_features.shape[1]
            node_features = ops.concat([node_features, walls], axis=1)
            wall_channels = slice(start, start + 2 * config.dim)
        return replace(static_graph, node_features=node_features,
                       edge_features=edge_features,
                       wall_channels=wall_channels)

    @staticmethod
    def attach_proposal(graph, proposal):
        """Append the proposed update as trailing node channels."""
        if graph.proposal_width:
            raise ValueError("graph already carries a proposal")
        y = proposal.y if isinstance(proposal, Proposal) else proposal
        rows = y.shape[0]
        if y.ndim != 2 or rows != graph.num_nodes:
            raise ValueError(
                f"proposal shape {tuple(y.shape)} does not match "
                f"{graph.num_nodes} nodes")
        if _is_traced(y) or _is_traced(graph.node_features):
            features = ops.concat([graph.node_features, y], axis=1)
        else:
            features = np.concatenate(
                [graph.node_features, np.asarray(y, dtype=np.float64)],
                axis=1)
        return replace(graph, node_features=features,
                       proposal_width=int(y.shape[1]))

    @staticmethod
    def detach_proposal(graph):
        if not graph.proposal_width:
            return graph
        features = graph.node_features[:, :-graph.proposal_width]
        if _is_traced(features):
            features = features.value
        return replace(graph, node_features=features, proposal_width=0)

    @staticmethod
    def refresh_wall_channels(graph, positions, box, cap):
        """Recompute clipped wall distances from provisional positions
        (treated as constants)."""
        if graph.wall_channels is None:
            return graph
        if _is_traced(graph.node_features):
            raise ValueError("refresh walls before attaching a proposal")
        features = np.array(graph.node_features, copy=True)
        features[:, graph.wall_channels] = GraphService.clipped_wall_distances(
            positions, box, cap)
        return replace(graph, node_features=features)

    @staticmethod
    def batch_graphs(graphs):
        """Disjoint union; returns (batched graph, node segment ids)."""
        graphs = list(graphs)
        if not graphs:
            raise ValueError("cannot batch an empty list of graphs")
        first = graphs[0]
        for g in graphs[1:]:
            if g.node_features.shape[1] != first.node_features.shape[1] or \
                    g.edge_features.shape[1] != first.edge_features.shape[1]:
                raise ValueError("graphs in a batch must share feature widths")
            if g.wall_channels != first.wall_channels or \
                    g.proposal_width != first.proposal_width:
                raise ValueError("graphs in a batch must share layouts")

        offsets = np.cumsum([0] + [g.num_nodes for g in graphs[:-1]])
        edges = np.concatenate(
            [g.edges + offset for g, offset in zip(graphs, offsets)], axis=0)

        def join(values):
            if any(_is_traced(v) for v in values):
                return ops.concat(values, axis=0)
            return np.concatenate(values, axis=0)

        n_node = tuple(n for g in graphs for n in g.n_node)
        batched = ContextGraph(
            node_features=join([g.node_features for g in graphs]),
            edges=edges.astype(np.int64),
            edge_features=join([g.edge_features for g in graphs]),
            fixed_mask=np.concatenate([g.fixed_mask for g in graphs]),
            n_node=n_node,
            wall_channels=first.wall_channels,
            proposal_width=first.proposal_width,
        )
        return batched, batched.segment_ids

    @staticmethod
    def split_nodes(array, n_node):
        """Per-graph row blocks of a batched node array."""
        bounds = np.cumsum((0,) + tuple(n_node))
        return [array[start:stop] for start, stop in zip(bounds[:-1],
                                                          bounds[1:])]
