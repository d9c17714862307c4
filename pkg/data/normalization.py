import logging

import numpy as np

from data.exceptions import DatasetError
from data.structures import NormStats

logger = logging.getLogger(__name__)

BALLS_VELOCITY_SCALE = 100.0


def _free_rows(trajectory, values):
    """Drop fixed nodes from a T x J x D stack, flattening to rows x D."""
    free = ~trajectory.statics.fixed_mask
    return values[:, free].reshape(-1, trajectory.dim)


def compute_norm_stats(trajectories, domain, update_mode):
    """
    Normalisation for one training split.

    Rope features are already near unit scale and pass through unchanged;
    bouncing-balls velocities are multiplied by 100. Acceleration mode
    standardises inputs (velocities) and targets (accelerations) per channel
    from the split itself, fixed nodes excluded.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise DatasetError("cannot compute normalisation stats of an empty "
                           "split")
    dim = trajectories[0].dim

    if update_mode == "acceleration":
        velocities, accelerations = [], []
        for trajectory in trajectories:
            p = trajectory.positions
            velocities.append(_free_rows(trajectory, np.diff(p, axis=0)))
            accelerations.append(
                _free_rows(trajectory, np.diff(p, n=2, axis=0)))
        velocities = np.concatenate(velocities)
        accelerations = np.concatenate(accelerations)
        if velocities.shape[0] == 0 or accelerations.shape[0] == 0:
            raise DatasetError("split has no free nodes with enough frames "
                               "to standardise")
        stats = NormStats(velocities.mean(axis=0), velocities.std(axis=0),
                          accelerations.mean(axis=0),
                          accelerations.std(axis=0), kind="standardize")
    elif update_mode == "velocity" and domain == "bouncing_balls":
        stats = NormStats.scaled(BALLS_VELOCITY_SCALE, dim)
    else:
        stats = NormStats.identity(dim)

    logger.info("normalisation for %s/%s: %s", domain, update_mode,
                stats.kind)
    return stats
