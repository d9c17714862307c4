from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from evalcli.metrics import MetricResult

METRIC_NAMES = ("one_step", "rollout_10", "rollout_full")


@dataclass(frozen=True)
class EvalReport:
    variant: str
    split: str
    metrics: dict
    checkpoint: object = None
    n_test: int | None = None
    per_trajectory: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "variant": self.variant,
            "checkpoint": self.checkpoint,
            "split": self.split,
            "n_test": self.n_test,
            "metrics": dict(self.metrics),
            "per_trajectory": list(self.per_trajectory),
            "seeds": list(self.seeds),
            "config": dict(self.config),
        }

    @classmethod
    def from_dict(cls, data):
        from evalcli.serializers import EvalReportSerializer
        serializer = EvalReportSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        return cls(**serializer.validated_data)


class SeedAnalytics:
    def __init__(self, runs):
        """
        recebe uma lista de execuções {seed, checkpoint, metrics}, com
        metrics mapeando nome -> MetricResult.
        """
        self.runs = list(runs)

    def per_seed(self):
        """DataFrame indexed by seed, one column per metric."""
        rows = [{"seed": run["seed"],
                 **{name: run["metrics"][name].mean
                    for name in METRIC_NAMES if name in run["metrics"]}}
                for run in self.runs]
        if not rows:
            return pd.DataFrame(columns=["seed", *METRIC_NAMES]) \
                .set_index("seed")
        return pd.DataFrame(rows).set_index("seed")

    def per_trajectory(self):
        rows = []
        for run in self.runs:
            metrics = run["metrics"]
            first = next(iter(metrics.values()), MetricResult(float("nan")))
            for index in range(len(first.per_trajectory)):
                row = {"seed": run["seed"], "trajectory": index}
                for name, result in metrics.items():
                    row[name] = result.per_trajectory[index]
                    row[f"{name}_count"] = result.counts[index]
                rows.append(row)
        return pd.DataFrame(rows)

    def medians(self):
        frame = self.per_seed()
        if frame.empty:
            return {}
        return {name: float(frame[name].median()) for name in frame.columns}

    def report(self, variant, split, n_test=None, config=None):
        trajectories = self.per_trajectory()
        seeds = [{"seed": run["seed"], "checkpoint": run.get("checkpoint"),
                  "metrics": {name: result.mean
                              for name, result in run["metrics"].items()}}
                 for run in self.runs]
        checkpoints = [run.get("checkpoint") for run in self.runs]
        return EvalReport(
            variant=variant,
            checkpoint=checkpoints[0] if len(checkpoints) == 1 else checkpoints,
            split=split,
            n_test=n_test,
            metrics=self.medians(),
            per_trajectory=_records(trajectories),
            seeds=seeds,
            config=dict(config or {}),
        )


def _records(frame):
    if frame.empty:
        return []
    return [{key: _plain(value) for key, value in row.items()}
            for row in frame.to_dict(orient="records")]


def _plain(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def recompute_aggregate(per_trajectory, name, seed=None):
    """Count-weighted mean of one metric from per-trajectory entries."""
    rows = [row for row in per_trajectory
            if seed is None or row["seed"] == seed]
    counts = np.array([row[f"{name}_count"] for row in rows], dtype=float)
    values = np.array([row[name] for row in rows], dtype=float)
    return MetricResult.combine(values, counts).mean
