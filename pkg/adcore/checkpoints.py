"""JSON checkpoints: {"format", "params", "config"[, "optimizer"]}."""
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from adcore.params import ParamStore
from adcore.serializers import CHECKPOINT_FORMAT, CheckpointSerializer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Checkpoint:
    params: ParamStore
    config: dict
    optimizer: dict | None = field(default=None)


def _array_document(array):
    # float repr is the shortest string that reads back to the same double
    return {"shape": list(array.shape),
            "data": [float(x) for x in np.ravel(array)]}


def dump_checkpoint(params, config, optimizer=None):
    document = {
        "format": CHECKPOINT_FORMAT,
        "params": {name: _array_document(params[name]) for name in params},
        "config": config,
    }
    if optimizer is not None:
        document["optimizer"] = optimizer
    return document


def save_checkpoint(path, params, config, optimizer=None):
    """Write atomically (temp file + rename) so a crash never truncates."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = dump_checkpoint(params, config, optimizer)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(document, handle)
    os.replace(tmp, path)
    logger.debug("checkpoint written to %s (%d arrays)", path, len(params))
    return path


def parse_checkpoint(document):
    serializer = CheckpointSerializer(data=document)
    serializer.is_valid(raise_exception=True)
    data = serializer.validated_data
    params = ParamStore({
        name: np.asarray(entry["data"], dtype=np.float64).reshape(
            entry["shape"])
        for name, entry in data["params"].items()
    })
    return Checkpoint(params=params, config=dict(data["config"]),
                      optimizer=data.get("optimizer"))


def load_checkpoint(path):
    with open(path, encoding="utf-8") as handle:
        document = json.load(handle)
    return parse_checkpoint(document)
