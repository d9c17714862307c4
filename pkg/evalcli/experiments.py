"""
Test-time experiments on a trained simulator: solver-iteration sweeps,
longer ropes, rollouts under hand-designed constraints and the landscape
of the learned constraint around one node.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from adcore.tape import no_record
from data.generators import generate_rope
from graphs.services import GraphService
from sims.configs import CONSTRAINT_VARIANTS
from sims.hand_constraints import total_penalty
from sims.simulator import (learned_constraint, predict_batch, prepare_batch,
                            rollout)
from evalcli.metrics import evaluate

logger = logging.getLogger(__name__)

GENERALIZATION_NODES = 20


def iteration_sweep(spec, params, trajectories, n_test_values):
    """
    Standard metrics per test-time iteration count, everything else fixed.

    Returns a DataFrame indexed by n_test with one column per metric.
    """
    if spec.variant not in CONSTRAINT_VARIANTS + ("iterative",):
        raise ValueError(f"{spec.variant} has no iteration count to sweep")
    trajectories = list(trajectories)
    rows = []
    for n_test in n_test_values:
        n_test = int(n_test)
        if n_test < 0:
            raise ValueError("iteration counts must be >= 0")
        metrics = evaluate(spec, params, trajectories, iterations=n_test)
        rows.append({"n_test": n_test,
                     **{name: m.mean for name, m in metrics.items()}})
        logger.info("N_test=%d: one-step %.3e, full rollout %.3e", n_test,
                    rows[-1]["one_step"], rows[-1]["rollout_full"])
    return pd.DataFrame(rows).set_index("n_test")


def generalization_split(num_nodes=GENERALIZATION_NODES, n_traj=10, seed=0,
                         **overrides):
    """Ropes with exactly `num_nodes` nodes, outside the training range."""
    return generate_rope(seed, n_traj, num_nodes=[num_nodes, num_nodes],
                         **overrides)


def generalization_eval(spec, params, num_nodes=GENERALIZATION_NODES,
                        n_traj=10, seed=0, iterations=None, **overrides):
    """(metrics, trajectories) on freshly generated longer ropes."""
    if spec.domain != "rope":
        raise ValueError("generalization runs on ropes only")
    if spec.variant in ("neural_projection", "cmlp_gd", "cmlp_fp") \
            and num_nodes > spec.max_nodes:
        raise ValueError(f"{spec.variant} handles at most {spec.max_nodes} "
                         f"nodes; got {num_nodes}")
    trajectories = generalization_split(num_nodes, n_traj, seed, **overrides)
    return evaluate(spec, params, trajectories, iterations), trajectories


@dataclass(frozen=True, eq=False)
class ConstrainedRollout:
    trajectory: object
    penalty: np.ndarray
    depths: dict = field(default_factory=dict)
    seed_frames: int = 0

    def mean_depth(self, kind):
        return float(np.mean(self.depths[kind])) if kind in self.depths \
            else 0.0

    def as_dict(self):
        return {
            "penalty": [float(x) for x in self.penalty],
            "depths": {kind: [float(x) for x in values]
                       for kind, values in self.depths.items()},
            "mean_depth": {kind: self.mean_depth(kind)
                           for kind in self.depths},
        }


def bind_extras(spec, window, extras):
    edges = GraphService.build_connectivity(
        window.latest, spec.features.connectivity,
        radius=spec.features.radius)
    return tuple(extra.bound_to(window.latest, edges) for extra in extras)


def penalty_trace(extras, trajectory, free_mask, start=0):
    """
    Weighted penalty and per-kind depths for frames start..T-1.

    Region depths are averaged over free nodes; length_preserve reports
    the largest link deviation of each frame.
    """
    frames = trajectory.positions[start:]
    penalty = np.zeros(len(frames))
    depths = {}
    segment_ids = np.zeros(trajectory.num_nodes, dtype=np.int64)
    with no_record():
        for t, positions in enumerate(frames):
            if extras:
                penalty[t] = float(total_penalty(
                    extras, positions, segment_ids, 1).value[0])
            for extra in extras:
                depth = extra.depths(positions)
                if extra.kind == "length_preserve":
                    value = float(np.max(depth)) if depth.size else 0.0
                else:
                    value = float(np.mean(depth[free_mask])) \
                        if np.any(free_mask) else 0.0
                depths.setdefault(extra.kind, np.zeros(len(frames)))
                depths[extra.kind][t] = max(depths[extra.kind][t], value)
    return penalty, depths


def constrained_rollout(spec, params, window, extras, steps,
                        iterations=None, report_extras=None):
    """
    Roll out under learned constraint + hand penalties and trace them.

    `report_extras` selects the penalties to measure; it defaults to
    `extras`, and passing the same list with empty `extras` gives the
    unconstrained reference run.
    """
    extras = bind_extras(spec, window, extras)
    measured = extras if report_extras is None \
        else bind_extras(spec, window, report_extras)
    trajectory = rollout(spec, params, window, steps, extras=extras,
                         iterations=iterations)
    start = trajectory.meta["seed_frames"]
    penalty, depths = penalty_trace(measured, trajectory,
                                    ~trajectory.statics.fixed_mask, start)
    return ConstrainedRollout(trajectory, penalty, depths, start)


def depth_reduction(constrained, unconstrained):
    """Relative drop of mean penetration depth, per region kind."""
    out = {}
    for kind, values in unconstrained.depths.items():
        if kind == "length_preserve":
            continue
        before = float(np.mean(values))
        after = constrained.mean_depth(kind)
        out[kind] = None if before == 0.0 else 1.0 - after / before
    return out


@dataclass(frozen=True, eq=False)
class Landscape:
    values: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    trace: np.ndarray
    center: np.ndarray
    node: int

    @property
    def argmin(self):
        i, j = np.unravel_index(np.argmin(self.values), self.values.shape)
        return float(self.xs[j]), float(self.ys[i])


def landscape(spec, params, window, node, extent, resolution, center=None):
    """
    Learned constraint over a resolution x resolution grid of node `node`'s
    proposal, the other nodes held at their solved values.

    The grid spans +-extent around `center` (normalised units; defaults to
    the solved proposal). All cells are evaluated as one batch. Signed
    constraints (fast-projection variants) are shown as |f|. The solver
    iterates of that node come back as `trace`.
    """
    if not spec.is_constraint:
        raise ValueError(f"{spec.variant} has no constraint to visualise")
    if not 0 <= node < window.num_nodes:
        raise IndexError(f"node {node} out of range for "
                         f"{window.num_nodes} nodes")
    if window.dim != 2:
        raise ValueError("landscapes are drawn for 2-D proposals only")
    resolution = int(resolution)
    if resolution < 1:
        raise ValueError("resolution must be >= 1")

    solved = predict_batch(spec, params, prepare_batch(spec, [window]),
                           record_trace=True)
    trace = np.stack([np.asarray(y)[node] for y in solved.trace])
    center = np.asarray(solved.y[node] if center is None else center,
                        dtype=np.float64)
    if resolution == 1:
        offsets = np.zeros(1)
    else:
        offsets = np.linspace(-extent, extent, resolution)
    xs, ys = center[0] + offsets, center[1] + offsets

    cells = resolution * resolution
    grid_x, grid_y = np.meshgrid(xs, ys)
    proposals = np.tile(np.asarray(solved.y, dtype=np.float64), (cells, 1))
    rows = np.arange(cells) * window.num_nodes + node
    proposals[rows, 0] = grid_x.ravel()
    proposals[rows, 1] = grid_y.ravel()

    batch = prepare_batch(spec, [window] * cells)
    constraint, context = learned_constraint(spec, params, batch)
    with no_record():
        values = np.asarray(constraint(context, proposals).value,
                            dtype=np.float64)
    if spec.aggregation == "plain_sum":
        values = np.abs(values)
    return Landscape(values.reshape(resolution, resolution), xs, ys, trace,
                     center, node)
