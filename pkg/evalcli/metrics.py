"""
Position-space error metrics over a split.

Errors are squared position differences in raw units, averaged over free
nodes and dims. Each metric keeps per-trajectory means with their entry
counts so the aggregate can be recomputed from them.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings

from graphs.services import GraphService
from graphs.structures import Proposal
from sims.simulator import (next_positions, predict_batch, prepare_batch,
                            rollout)

logger = logging.getLogger(__name__)

ROLLOUT_HORIZONS = {"rollout_10": 10, "rollout_full": None}


@dataclass(frozen=True)
class MetricResult:
    mean: float
    per_trajectory: list = field(default_factory=list)
    counts: list = field(default_factory=list)

    @classmethod
    def combine(cls, per_trajectory, counts):
        total = float(np.sum(counts))
        mean = float(np.dot(per_trajectory, counts) / total) if total \
            else float("nan")
        return cls(mean, [float(x) for x in per_trajectory],
                   [int(c) for c in counts])


def _map_ordered(fn, items):
    workers = max(1, int(getattr(settings, "CGNS_WORKERS", 1)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _free_squared_error(predicted, truth, fixed_mask):
    free = ~fixed_mask
    diff = (np.asarray(predicted) - np.asarray(truth))[..., free, :]
    return float(np.sum(diff * diff)), int(diff.size)


def _history(spec):
    return spec.features.history


def trajectory_one_step(spec, params, trajectory, iterations=None,
                        predictor=None):
    """(sum of squared errors, entry count) over every valid frame."""
    history = _history(spec)
    times = list(trajectory.target_times(history))
    if not times:
        logger.warning("trajectory %s has %d frames; too short for a "
                       "%d-velocity window, skipped",
                       trajectory.meta.get("index", "?"),
                       trajectory.num_frames, history)
        return 0.0, 0
    windows = [trajectory.window(t, history) for t in times]
    if predictor is None:
        batch = prepare_batch(spec, windows)
        proposal = predict_batch(spec, params, batch, iterations=iterations)
        parts = GraphService.split_nodes(proposal.y, batch.n_node)
        proposals = [Proposal(y, proposal.mode) for y in parts]
    else:
        proposals = [predictor(window) for window in windows]

    total, count = 0.0, 0
    fixed = trajectory.statics.fixed_mask
    for t, window, proposal in zip(times, windows, proposals):
        predicted = next_positions(window, proposal, spec.norm)
        err, n = _free_squared_error(predicted, trajectory.positions[t + 1],
                                     fixed)
        total += err
        count += n
    return total, count


def trajectory_rollout(spec, params, trajectory, horizon=None,
                       iterations=None, predictor=None, extras=()):
    history = _history(spec)
    t0 = history
    available = trajectory.num_frames - 1 - t0
    if available < 1:
        logger.warning("trajectory %s is too short to roll out, skipped",
                       trajectory.meta.get("index", "?"))
        return 0.0, 0
    steps = available if horizon is None else min(int(horizon), available)
    out = rollout(spec, params, trajectory.window(t0, history), steps,
                  predictor=predictor, iterations=iterations, extras=extras)
    predicted = out.positions[t0 + 1:]
    truth = trajectory.positions[t0 + 1:t0 + 1 + steps]
    return _free_squared_error(predicted, truth,
                               trajectory.statics.fixed_mask)


def _metric(fn, trajectories):
    results = _map_ordered(fn, list(trajectories))
    per_trajectory, counts = [], []
    for total, count in results:
        per_trajectory.append(total / count if count else float("nan"))
        counts.append(count)
    return MetricResult.combine(
        np.nan_to_num(per_trajectory, nan=0.0), counts)


def one_step_mse(spec, params, trajectories, iterations=None,
                 predictor=None):
    """One-step position MSE along every ground-truth frame of a split."""
    return _metric(lambda traj: trajectory_one_step(
        spec, params, traj, iterations, predictor), trajectories)


def rollout_mse(spec, params, trajectories, horizon=None, iterations=None,
                predictor=None):
    """Autoregressive MSE from each trajectory's first window; `horizon`
    None rolls out to the last frame."""
    return _metric(lambda traj: trajectory_rollout(
        spec, params, traj, horizon, iterations, predictor), trajectories)


def evaluate(spec, params, trajectories, iterations=None, predictor=None):
    """The three standard metrics of a split."""
    trajectories = list(trajectories)
    metrics = {"one_step": one_step_mse(spec, params, trajectories,
                                        iterations, predictor)}
    for name, horizon in ROLLOUT_HORIZONS.items():
        metrics[name] = rollout_mse(spec, params, trajectories, horizon,
                                    iterations, predictor)
    return metrics
