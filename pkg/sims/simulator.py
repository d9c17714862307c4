"""
Predictor and Updater for every simulator variant, plus rollouts.

Proposals live in normalised units (`spec.norm`); only the Updater maps
them back to positions. Constraint variants solve for the proposal, the
forward GNN decodes it in one pass and the iterative GNN adds decoded
corrections N times.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from adcore import ops
from adcore.exceptions import NonFiniteError
from adcore.params import init_params
from adcore.tape import ADValue
from data.structures import Trajectory
from graphs.services import GraphService
from graphs.structures import ContextGraph, Proposal, SystemState
from nets.constraints import (constraint_value, mlp_constraint_layer_spec,
                              mlp_constraint_value)
from nets.layers import decode, gnn_forward, gnn_layer_spec
from sims.hand_constraints import total_penalty
from solver.solvers import init_proposal, solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PreparedBatch:
    """Context graphs of several windows joined into one disjoint union."""
    graph: ContextGraph
    static_graph: ContextGraph | None
    latest: np.ndarray
    previous: np.ndarray
    y0: Proposal
    box: object = None

    @property
    def fixed_mask(self):
        return self.graph.fixed_mask

    @property
    def n_node(self):
        return self.graph.n_node

    @property
    def segment_ids(self):
        return self.graph.segment_ids

    @property
    def num_graphs(self):
        return self.graph.num_graphs


def prepare_batch(spec, windows):
    windows = list(windows)
    if not windows:
        raise ValueError("cannot predict for an empty list of windows")
    box = windows[0].box
    if any(w.box != box for w in windows[1:]):
        raise ValueError("windows in one batch must share their walls")
    features = spec.features

    graphs, statics, proposals = [], [], []
    for window in windows:
        edges = GraphService.build_connectivity(
            window.latest, features.connectivity, radius=features.radius)
        graphs.append(GraphService.build_context_graph(window, edges,
                                                       features, spec.norm))
        if spec.variant == "cgns_gd_no_context":
            statics.append(GraphService.build_static_graph(window, edges,
                                                           features))
        proposals.append(init_proposal(window, spec.update_mode, spec.norm))

    graph, _ = GraphService.batch_graphs(graphs)
    static_graph = GraphService.batch_graphs(statics)[0] if statics else None
    y0 = Proposal(np.concatenate([p.y for p in proposals]),
                  mode=spec.update_mode)
    return PreparedBatch(
        graph=graph, static_graph=static_graph,
        latest=np.concatenate([w.latest for w in windows]),
        previous=np.concatenate([w.previous for w in windows]),
        y0=y0, box=box)


def param_layer_spec(spec):
    net, features = spec.net, spec.features
    variant = spec.variant
    if variant in ("cgns_gd", "cgns_fp"):
        return gnn_layer_spec("constraint", net, features.node_width(True),
                              features.edge_width, 1)
    if variant == "cgns_gd_no_context":
        return gnn_layer_spec("constraint", net, spec.no_context_node_width(),
                              features.edge_width, 1)
    if variant == "forward":
        return gnn_layer_spec("forward", net, features.node_width(False),
                              features.edge_width, features.dim)
    if variant == "iterative":
        return gnn_layer_spec("iterative", net, features.node_width(True),
                              features.edge_width, features.dim)
    if variant == "neural_projection":
        return mlp_constraint_layer_spec("constraint", net, features.dim,
                                         spec.max_nodes)
    return mlp_constraint_layer_spec("constraint", net,
                                     features.node_width(True),
                                     spec.max_nodes)


def init_simulator_params(spec, seed):
    return init_params(param_layer_spec(spec), seed)


def implied_positions(y, latest, previous, mode, norm=None):
    """Positions the Updater would produce from `y` (array or ADValue)."""
    if mode == "position":
        return y
    update = y if norm is None else norm.denormalize_targets(y)
    if mode == "velocity":
        base = latest
    elif mode == "acceleration":
        base = 2.0 * latest - previous
    else:
        raise ValueError(f"unknown update mode {mode!r}")
    if isinstance(update, ADValue):
        return ops.add(base, update)
    return base + update


def next_positions(window, proposal, norm=None, override_fixed=True):
    y = proposal.y.value if isinstance(proposal.y, ADValue) else proposal.y
    positions = np.array(implied_positions(
        np.asarray(y, dtype=np.float64), window.latest, window.previous,
        proposal.mode, norm), dtype=np.float64)
    if override_fixed:
        fixed = window.statics.fixed_mask
        positions[fixed] = window.latest[fixed]
    return positions


def updater(window, proposal, norm=None, override_fixed=True):
    """
    Next state from a proposal: P_t + Y, 2 P_t - P_{t-1} + Y, or Y itself.
    Fixed nodes are put back at P_t when `override_fixed` is set.
    """
    return SystemState(next_positions(window, proposal, norm, override_fixed),
                       window.statics, window.box)


def _wall_refresh(spec, batch):
    cap = spec.features.wall_clip
    if cap is None or batch.box is None:
        return None

    def refresh(graph, y_value):
        positions = implied_positions(y_value, batch.latest, batch.previous,
                                      spec.update_mode, spec.norm)
        return GraphService.refresh_wall_channels(graph, positions,
                                                  batch.box, cap)

    return refresh


def learned_constraint(spec, params, batch):
    """
    `(context, y) -> per-graph values` of the learned constraint, together
    with the context it expects.
    """
    variant = spec.variant
    aggregation = spec.aggregation

    if variant in ("cgns_gd", "cgns_fp"):
        def constraint(graph, y):
            attached = GraphService.attach_proposal(graph, y)
            return constraint_value(params, attached, spec.net,
                                    aggregation).per_graph
        return constraint, batch.graph

    if variant == "cgns_gd_no_context":
        def constraint(static_graph, y):
            positions = implied_positions(y, batch.latest, batch.previous,
                                          spec.update_mode, spec.norm)
            positional = GraphService.with_positions(
                static_graph, positions, batch.box, spec.features)
            return constraint_value(params, positional, spec.net,
                                    aggregation, positional=True).per_graph
        return constraint, batch.static_graph

    if variant == "neural_projection":
        def constraint(context, y):
            return mlp_constraint_value(params, y, batch.n_node, spec.net,
                                        spec.max_nodes, aggregation).per_graph
        return constraint, None

    if variant in ("cmlp_gd", "cmlp_fp"):
        def constraint(graph, y):
            attached = GraphService.attach_proposal(graph, y)
            return mlp_constraint_value(params, attached.node_features,
                                        graph.n_node, spec.net,
                                        spec.max_nodes, aggregation).per_graph
        return constraint, batch.graph

    raise ValueError(f"variant {variant!r} has no constraint")


def compose_constraints(learned, extras, positions_of, segment_ids,
                        num_graphs):
    """
    learned + sum_k weight_k * penalty_k(positions implied by Y).

    `positions_of(y)` maps a proposal to the positions the Updater would
    produce; without extras the learned constraint is returned unchanged.
    """
    extras = tuple(extras)
    if not extras:
        return learned

    def constraint(context, y):
        value = learned(context, y)
        penalty = total_penalty(extras, positions_of(y), segment_ids,
                                num_graphs)
        return ops.add(value, penalty)

    return constraint


def _run_iterative(spec, params, batch, iterations, create_graph,
                   record_trace):
    refresh = _wall_refresh(spec, batch)
    graph = batch.graph
    y = batch.y0.y
    trace = [y] if record_trace else []
    for i in range(iterations):
        if refresh is not None and i > 0:
            graph = refresh(graph, y.value if isinstance(y, ADValue) else y)
        attached = GraphService.attach_proposal(graph, y)
        latents = gnn_forward(params, attached, spec.net, "iterative")
        delta = decode(params, latents, spec.net, "iterative")
        y = ops.add(y, delta)
        if not create_graph:
            y = y.value
        if record_trace:
            trace.append(y)
    return Proposal(y, mode=spec.update_mode, trace=tuple(trace))


def predict_batch(spec, params, batch, create_graph=False, iterations=None,
                  extras=(), record_trace=False):
    """
    Proposal for every node of a prepared batch.

    With `create_graph` the result (and its trace) stays differentiable
    with respect to `params`, which should then be ADValue leaves.
    """
    iterations = spec.iterations if iterations is None else int(iterations)

    if spec.variant == "forward":
        latents = gnn_forward(params, batch.graph, spec.net, "forward")
        y = decode(params, latents, spec.net, "forward")
        if not create_graph:
            y = y.value
        return Proposal(y, mode=spec.update_mode,
                        trace=(batch.y0.y, y) if record_trace else ())

    if spec.variant == "iterative":
        return _run_iterative(spec, params, batch, iterations, create_graph,
                              record_trace)

    constraint, context = learned_constraint(spec, params, batch)
    constraint = compose_constraints(
        constraint, extras,
        lambda y: implied_positions(y, batch.latest, batch.previous,
                                    spec.update_mode, spec.norm),
        batch.segment_ids, batch.num_graphs)
    cfg = spec.solver.with_iterations(iterations)
    if record_trace:
        cfg = replace(cfg, record_trace=True)
    refresh = _wall_refresh(spec, batch) if context is batch.graph else None
    return solve(constraint, context, batch.y0, cfg,
                 fixed_mask=batch.fixed_mask, segment_ids=batch.segment_ids,
                 refresh=refresh, create_graph=create_graph)


def predict(spec, params, window, iterations=None, extras=(),
            record_trace=False):
    batch = prepare_batch(spec, [window])
    return predict_batch(spec, params, batch, iterations=iterations,
                         extras=extras, record_trace=record_trace)


def constant_velocity(spec):
    """Predictor that keeps every node's latest velocity."""
    def predictor(window):
        if spec.update_mode == "acceleration":
            y = np.zeros_like(window.latest)
            if spec.norm is not None:
                y = spec.norm.normalize_targets(y)
            return Proposal(np.asarray(y, dtype=np.float64), "acceleration")
        return init_proposal(window, spec.update_mode, spec.norm)
    return predictor


def rollout(spec, params, window, steps, predictor=None, extras=(),
            iterations=None, refresh=None):
    """
    Autoregressive rollout of `steps` frames from the seed `window`.

    Returns a Trajectory holding the seed frames followed by the
    predictions. `refresh(window)` may rebuild the context after each
    shift.
    """
    if steps < 1:
        raise ValueError("a rollout needs at least one step")
    if predictor is None:
        extras = tuple(e.bound_to(window.latest,
                                  GraphService.build_connectivity(
                                      window.latest,
                                      spec.features.connectivity,
                                      radius=spec.features.radius))
                       for e in extras)

        def predictor(current):
            return predict(spec, params, current, iterations=iterations,
                           extras=extras)

    frames = list(window.positions)
    for t in range(1, steps + 1):
        positions = next_positions(window, predictor(window), spec.norm)
        if not np.all(np.isfinite(positions)):
            raise NonFiniteError("rollout", step=t)
        frames.append(positions)
        window = window.shifted(positions)
        if refresh is not None:
            window = refresh(window)
    logger.debug("rollout of %d steps (%s)", steps, spec.variant)
    return Trajectory(np.stack(frames), window.statics, window.box,
                      meta={"seed_frames": len(frames) - steps})
