"""One-step supervised losses on the predicted update."""
import numpy as np

from adcore import ops
from graphs.structures import ContextWindow
from sims.simulator import predict_batch, prepare_batch


def iteration_weights(iterations, alpha):
    """w_i = alpha^(N - i) for i = 1..N, so the last iterate weighs 1."""
    return np.array([alpha ** (iterations - i)
                     for i in range(1, iterations + 1)], dtype=np.float64)


def masked_mse(y_hat, target, fixed_mask):
    """Mean over free nodes and dims of (y_hat - target)^2."""
    free = ~np.asarray(fixed_mask, dtype=bool)
    count = int(free.sum()) * int(np.shape(target)[1])
    if count == 0:
        raise ValueError("every node is fixed; the loss has no entries")
    diff = ops.sub(y_hat, target)
    diff = ops.mul(diff, free.astype(np.float64)[:, None])
    return ops.div(ops.reduce_sum(ops.square(diff)), float(count))


def normalized_target(spec, trajectory, t):
    """Ground-truth update at frame t in the units the model predicts."""
    target = trajectory.target_update(t, spec.update_mode)
    if spec.norm is not None and spec.update_mode != "position":
        target = spec.norm.normalize_targets(target)
    return np.asarray(target, dtype=np.float64)


def one_step_loss(spec, params, batch, target, loss_cfg):
    """
    Loss of one (batched) prediction against `target` (nodes x D).

    `batch` is a PreparedBatch or a single ContextWindow; `params` should
    be ADValue leaves for the result to carry parameter gradients.
    """
    if isinstance(batch, ContextWindow):
        batch = prepare_batch(spec, [batch])
    target = np.asarray(target, dtype=np.float64)
    if not np.any(~batch.fixed_mask):
        raise ValueError("every node is fixed; the loss has no entries")

    proposal = predict_batch(spec, params, batch, create_graph=True,
                             record_trace=loss_cfg.per_iteration)
    iterates = list(proposal.trace[1:]) if loss_cfg.per_iteration else []
    if not iterates:
        return masked_mse(proposal.y, target, batch.fixed_mask)

    weights = iteration_weights(len(iterates), loss_cfg.alpha)
    total = None
    for weight, iterate in zip(weights, iterates):
        term = ops.mul(masked_mse(iterate, target, batch.fixed_mask), weight)
        total = term if total is None else ops.add(total, term)
    return ops.div(total, float(weights.sum()))
