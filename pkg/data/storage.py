"""
Dataset directories: manifest.json plus one JSON-Lines file per split.

Reals are written with Python's float repr (the shortest string that
parses back to the same double), so a write/read round trip is bitwise.
"""
import json
import logging
from pathlib import Path

from rest_framework.exceptions import ValidationError

from data.exceptions import (DatasetIntegrityError, ManifestError,
                             UnknownSplitError)
from data.serializers import (DATASET_FORMAT, ManifestSerializer,
                              TrajectoryRecordSerializer)
from data.structures import DatasetManifest, Trajectory
from graphs.structures import Box, Statics

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def split_path(directory, split):
    return Path(directory) / f"{split}.jsonl"


def _record(trajectory):
    statics = {"node_type": trajectory.statics.node_type.tolist()}
    if trajectory.statics.radius is not None:
        statics["radius"] = trajectory.statics.radius.tolist()
    if trajectory.statics.rest_length is not None:
        statics["rest_length"] = float(trajectory.statics.rest_length)
    return {"statics": statics, "positions": trajectory.positions.tolist()}


def write_dataset(splits, directory, name, domain, generator, seed,
                  dt_record):
    """
    Write `splits` ({split name: [Trajectory, ...]}) under `directory`.

    Returns the written DatasetManifest.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(
        name=name, domain=domain,
        counts={split: len(trajs) for split, trajs in splits.items()},
        generator=dict(generator), dt_record=float(dt_record),
        seed=int(seed), format=DATASET_FORMAT)

    for split, trajectories in splits.items():
        with open(split_path(directory, split), "w",
                  encoding="utf-8") as handle:
            for trajectory in trajectories:
                handle.write(json.dumps(_record(trajectory)))
                handle.write("\n")

    document = {
        "format": manifest.format,
        "name": manifest.name,
        "domain": manifest.domain,
        "dt_record": manifest.dt_record,
        "counts": manifest.counts,
        "generator": manifest.generator,
        "seed": manifest.seed,
    }
    with open(directory / MANIFEST_NAME, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2)
    logger.info("dataset %r written to %s (%s)", name, directory,
                ", ".join(f"{k}={v}" for k, v in manifest.counts.items()))
    return manifest


def load_manifest(directory):
    path = Path(directory) / MANIFEST_NAME
    try:
        with open(path, encoding="utf-8") as handle:
            document = json.load(handle)
    except FileNotFoundError:
        raise ManifestError(f"no {MANIFEST_NAME} in {directory}") from None
    except json.JSONDecodeError as exc:
        raise DatasetIntegrityError(path, f"invalid JSON ({exc})") from None

    serializer = ManifestSerializer(data=document)
    if not serializer.is_valid():
        raise ManifestError(f"{path}: {serializer.errors}")
    return DatasetManifest(**serializer.validated_data)


def dataset_box(manifest):
    """Walls of a bouncing-balls dataset; None for ropes."""
    box = manifest.generator.get("box")
    if manifest.domain != "bouncing_balls" or box is None:
        return None
    return Box(tuple(box["lower"]), tuple(box["upper"]))


def _parse_line(line, path, number, box, meta):
    try:
        document = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetIntegrityError(
            path, f"line {number}: invalid JSON ({exc.msg})") from None
    serializer = TrajectoryRecordSerializer(data=document)
    try:
        serializer.is_valid(raise_exception=True)
    except ValidationError as exc:
        raise DatasetIntegrityError(
            path, f"line {number}: malformed record {exc.detail}") from None
    data = serializer.validated_data
    return Trajectory(data["positions"], Statics(**data["statics"]), box,
                      meta={**meta, "index": number - 1})


def read_dataset(directory, split):
    """Trajectories of one split, in file order (a list)."""
    manifest = load_manifest(directory)
    if split not in manifest.counts:
        raise UnknownSplitError(split, manifest.splits)
    path = split_path(directory, split)
    if not path.exists():
        raise DatasetIntegrityError(path, "split file is missing")

    box = dataset_box(manifest)
    meta = {"dt_record": manifest.dt_record,
            "substeps": manifest.generator.get("substeps"),
            "seed": manifest.seed, "split": split}
    trajectories = []
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            trajectories.append(_parse_line(line, path, number, box, meta))

    expected = manifest.counts[split]
    if len(trajectories) != expected:
        raise DatasetIntegrityError(
            path, f"manifest lists {expected} trajectories, file has "
                  f"{len(trajectories)}")
    logger.debug("read %d trajectories from %s", expected, path)
    return trajectories
