"""
Inner-loop solvers: fixed-step gradient descent and fast projection.

The proposal Y is refined by repeatedly differentiating the constraint
with respect to it. With `create_graph=True` every gradient evaluation is
recorded, so the returned Y^(N) can be differentiated with respect to the
constraint's parameters (full unrolling, no truncation).
"""
import logging

import numpy as np

from adcore import ops
from adcore.exceptions import DegenerateGradientError, NonFiniteError
from adcore.tape import ADValue, grad
from graphs.structures import Proposal
from solver.configs import FP_MIN_NORM_SQ

logger = logging.getLogger(__name__)

_fp_sign_noted = False


def init_proposal(window, mode, norm=None):
    """Y^(0): latest velocity, zero acceleration, or the Euler position."""
    if mode == "velocity":
        y = window.latest - window.previous
        if norm is not None:
            y = norm.normalize_targets(y)
    elif mode == "acceleration":
        y = np.zeros_like(window.latest)
    elif mode == "position":
        y = 2.0 * window.latest - window.previous
    else:
        raise ValueError(f"unknown update mode {mode!r}")
    return Proposal(np.array(y, dtype=np.float64), mode=mode)


def _per_graph(values):
    values = getattr(values, "per_graph", values)
    return ops.reshape(values, (-1,)) if values.ndim != 1 else values


def _note_fp_sign():
    global _fp_sign_noted
    if not _fp_sign_noted:
        logger.debug(
            "fast projection steps along -(f/|grad f|^2) grad f; the "
            "published composition of the step gives the opposite sign")
        _fp_sign_noted = True


def _segment_norm_sq(g, segment_ids, num_graphs):
    rows = np.sum(np.square(g), axis=1)
    out = np.zeros(num_graphs)
    np.add.at(out, segment_ids, rows)
    return out


def solve(constraint, context, y0, cfg, fixed_mask=None, segment_ids=None,
          refresh=None, create_graph=False):
    """
    Run `cfg.iterations` solver steps from `y0`.

    `constraint(context, y)` returns the per-graph constraint values (an
    ADValue of shape G, a scalar, or anything with a `per_graph`
    attribute). `refresh(context, y_value)` optionally rebuilds the context
    from the provisional update between iterations; it only sees plain
    arrays. Rows flagged in `fixed_mask` are never updated.
    """
    y_init = y0.y if isinstance(y0, Proposal) else y0
    mode = y0.mode if isinstance(y0, Proposal) else "velocity"
    num_rows = y_init.shape[0]
    segment_ids = (np.zeros(num_rows, dtype=np.int64) if segment_ids is None
                   else np.asarray(segment_ids, dtype=np.int64))
    num_graphs = int(segment_ids.max()) + 1 if num_rows else 0
    free = None
    if fixed_mask is not None:
        fixed_mask = np.asarray(fixed_mask, dtype=bool)
        if fixed_mask.any():
            free = (~fixed_mask).astype(np.float64)[:, None]

    if cfg.method == "fp":
        _note_fp_sign()

    y = y_init
    # iterates stay traced under create_graph so losses can reach them
    trace = [y] if cfg.record_trace else []
    for i in range(cfg.iterations):
        if refresh is not None and i > 0:
            context = refresh(context, _value(y))

        if create_graph:
            if not (isinstance(y, ADValue) and y.requires_grad):
                y = ADValue.leaf(_value(y))
        else:
            y = ADValue.leaf(_value(y))

        per_graph = _per_graph(constraint(context, y))
        (g,) = grad(ops.reduce_sum(per_graph), [y], build_graph=create_graph)
        if free is not None:
            # fixed rows take no part in the step or in its FP norm
            g = ops.mul(g, free) if create_graph else _value(g) * free
        g_value = g.value if isinstance(g, ADValue) else g

        if cfg.method == "gd":
            step = ops.mul(g, cfg.step_size) if create_graph \
                else cfg.step_size * g_value
        else:
            norm_sq = _segment_norm_sq(g_value, segment_ids, num_graphs)
            if np.any(norm_sq < FP_MIN_NORM_SQ):
                raise DegenerateGradientError(i, float(norm_sq.min()))
            if create_graph:
                squared = ops.scatter_sum_by_index(
                    ops.reduce_sum(ops.square(g), axis=1), segment_ids,
                    num_graphs)
                scale = ops.gather_by_index(ops.div(per_graph, squared),
                                            segment_ids)
                step = ops.mul(g, ops.reshape(scale, (num_rows, 1)))
            else:
                scale = per_graph.value / norm_sq
                step = scale[segment_ids][:, None] * g_value

        if create_graph:
            if free is not None:
                step = ops.mul(step, free)
            y = ops.sub(y, step)
            y_value = y.value
        else:
            y_value = _value(y)
            if free is None:
                y_value = y_value - step
            else:
                y_value = np.where(fixed_mask[:, None], y_value,
                                   y_value - step)
            y = y_value

        if not np.all(np.isfinite(y_value)):
            raise NonFiniteError("solver iterate", step=i + 1)
        if cfg.record_trace:
            trace.append(y if create_graph else np.array(y_value))
        logger.debug("solver %s iteration %d: constraint %.6e", cfg.method,
                     i, float(np.sum(per_graph.value)))

    if not create_graph:
        y = np.array(_value(y))
    return Proposal(y, mode=mode, trace=tuple(trace))


def _value(y):
    return y.value if isinstance(y, ADValue) else np.asarray(y, np.float64)
