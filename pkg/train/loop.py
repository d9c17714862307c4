"""
Training loop: sampled one-step batches, Adam, periodic validation and
best/latest checkpoints in `out_dir`.
"""
import json
import logging
import time
from pathlib import Path

import numpy as np

from adcore.checkpoints import load_checkpoint, save_checkpoint
from adcore.exceptions import NonFiniteError
from adcore.tape import grad
from evalcli.metrics import one_step_mse
from sims.configs import SimulatorSpec
from sims.simulator import init_simulator_params, prepare_batch
from train.configs import LossConfig, OptimConfig, TrainResult
from train.losses import normalized_target, one_step_loss
from train.optim import AdamState, adam_step

logger = logging.getLogger(__name__)

BEST_NAME = "best.json"
LATEST_NAME = "latest.json"
METRICS_NAME = "metrics.jsonl"


def sample_pairs(trajectories, history):
    """Every (trajectory index, frame) that yields a context and a target."""
    pairs = [(i, t) for i, traj in enumerate(trajectories)
             for t in traj.target_times(history)]
    if not pairs:
        raise ValueError("no trajectory is long enough to train on")
    return pairs


def draw_batch(pairs, batch_size, seed, step):
    """Uniform draw with replacement; (seed, step) fixes the draw."""
    rng = np.random.default_rng([int(seed), int(step)])
    return [pairs[k] for k in rng.integers(0, len(pairs), size=batch_size)]


def training_step(spec, params, state, trajectories, drawn, step, opt_cfg,
                  loss_cfg):
    """One optimizer update on the drawn (trajectory, frame) pairs."""
    history = spec.features.history
    windows = [trajectories[i].window(t, history) for i, t in drawn]
    target = np.concatenate([normalized_target(spec, trajectories[i], t)
                             for i, t in drawn])
    batch = prepare_batch(spec, windows)

    leaves = params.as_leaves()
    loss = one_step_loss(spec, leaves, batch, target, loss_cfg)
    loss_value = float(loss.value)
    if not np.isfinite(loss_value):
        raise NonFiniteError("training loss", step=step)
    names = list(leaves)
    grads = grad(loss, [leaves[name] for name in names])
    params, state = adam_step(state, params, dict(zip(names, grads)), step,
                              opt_cfg)
    return params, state, loss_value


def checkpoint_config(spec, step, seed, opt_cfg, loss_cfg, val_mse):
    return {
        "spec": spec.as_dict(),
        "step": int(step),
        "seed": int(seed),
        "optim": opt_cfg.as_dict(),
        "loss": loss_cfg.as_dict(),
        "val_1step_mse": val_mse,
    }


def load_simulator(path):
    """(spec, params, checkpoint) of a simulator checkpoint file."""
    checkpoint = load_checkpoint(path)
    from train.serializers import CheckpointConfigSerializer
    serializer = CheckpointConfigSerializer(data=checkpoint.config)
    serializer.is_valid(raise_exception=True)
    spec = SimulatorSpec.from_dict(checkpoint.config["spec"])
    return spec, checkpoint.params, checkpoint


def _validation_mse(spec, params, val):
    if not val:
        return None
    return one_step_mse(spec, params, val).mean


def _is_better(candidate, best):
    if best is None:
        return True
    if candidate is None:
        return False
    return candidate <= best


def train_loop(spec, train, val, opt_cfg=None, loss_cfg=None, out_dir=".",
               seed=0, resume=None):
    """
    Train `spec` on the `train` trajectories, validating on `val`.

    `resume` is a checkpoint path written by an earlier run; training then
    continues from its step with its parameters and Adam moments up to
    `opt_cfg.total_steps`. A non-finite loss or gradient raises
    NonFiniteError after logging; the checkpoints on disk are those of the
    last validation.
    """
    opt_cfg = opt_cfg or OptimConfig.from_profile()
    loss_cfg = loss_cfg or LossConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, val = list(train), list(val)
    pairs = sample_pairs(train, spec.features.history)

    best_val = None
    if resume is None:
        start = 0
        params = init_simulator_params(spec, seed)
        state = AdamState.zeros(params)
        (out_dir / METRICS_NAME).write_text("", encoding="utf-8")
    else:
        _, params, checkpoint = load_simulator(resume)
        start = int(checkpoint.config["step"])
        state = (AdamState.from_dict(checkpoint.optimizer)
                 if checkpoint.optimizer else AdamState.zeros(params))
        best_val = checkpoint.config.get("val_1step_mse")
        logger.info("resuming %s from step %d", spec.variant, start)

    paths = {"best": out_dir / BEST_NAME, "latest": out_dir / LATEST_NAME,
             "metrics": out_dir / METRICS_NAME}
    history = []
    since_validation = []
    started = time.monotonic()

    def validate(step):
        nonlocal best_val
        val_mse = _validation_mse(spec, params, val)
        config = checkpoint_config(spec, step, seed, opt_cfg, loss_cfg,
                                   val_mse)
        save_checkpoint(paths["latest"], params, config, state.as_dict())
        if _is_better(val_mse, best_val) or not paths["best"].exists():
            best_val = val_mse if val_mse is not None else best_val
            save_checkpoint(paths["best"], params, config, state.as_dict())
        record = {
            "step": int(step),
            "train_loss": (float(np.mean(since_validation))
                           if since_validation else None),
            "val_1step_mse": val_mse,
            "lr": opt_cfg.learning_rate_at(step),
            "wall_time_s": round(time.monotonic() - started, 3),
        }
        with open(paths["metrics"], "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record) + "\n")
        since_validation.clear()
        logger.info("step %d: train loss %s, val 1-step mse %s", step,
                    record["train_loss"], val_mse)

    validate(start)
    for step in range(start, opt_cfg.total_steps):
        drawn = draw_batch(pairs, opt_cfg.batch_size, seed, step)
        try:
            params, state, loss_value = training_step(
                spec, params, state, train, drawn, step, opt_cfg, loss_cfg)
        except NonFiniteError:
            logger.error("training aborted at step %d; keeping %s", step,
                         paths["latest"])
            raise
        history.append(loss_value)
        since_validation.append(loss_value)
        done = step + 1
        if done % opt_cfg.validate_every == 0 or done == opt_cfg.total_steps:
            validate(done)

    return TrainResult(best_checkpoint=paths["best"],
                       latest_checkpoint=paths["latest"],
                       metrics_log=paths["metrics"], history=history)
