from dataclasses import dataclass, field

import numpy as np

from graphs.structures import Box, ContextWindow, Statics

DOMAINS = ("rope", "bouncing_balls")
STD_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class Trajectory:
    """T recorded frames of J nodes sharing one set of statics."""
    positions: np.ndarray
    statics: Statics
    box: Box | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        positions = np.array(self.positions, dtype=np.float64)
        if positions.ndim != 3:
            raise ValueError("trajectory positions must be T x J x D")
        if positions.shape[1] != self.statics.num_nodes:
            raise ValueError("positions and statics disagree on J")
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    @property
    def num_frames(self):
        return int(self.positions.shape[0])

    @property
    def num_nodes(self):
        return int(self.positions.shape[1])

    @property
    def dim(self):
        return int(self.positions.shape[2])

    def window(self, t, history=3):
        """Context ending at frame t (inclusive)."""
        if t < history or t >= self.num_frames:
            raise IndexError(
                f"frame {t} has no {history}-velocity history in a "
                f"{self.num_frames}-frame trajectory")
        return ContextWindow(self.positions[t - history:t + 1], self.statics,
                             self.box)

    def target_times(self, history=3):
        """Frames t that have a full context and a successor."""
        return range(history, self.num_frames - 1)

    def target_update(self, t, mode):
        p = self.positions
        if mode == "velocity":
            return p[t + 1] - p[t]
        if mode == "acceleration":
            return p[t + 1] - 2.0 * p[t] + p[t - 1]
        if mode == "position":
            return np.array(p[t + 1])
        raise ValueError(f"unknown update mode {mode!r}")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    domain: str
    counts: dict
    generator: dict
    dt_record: float
    seed: int
    format: str = "cgns-data-v1"

    @property
    def splits(self):
        return tuple(self.counts)


@dataclass(frozen=True, eq=False)
class NormStats:
    """
    Per-channel affine maps for velocity inputs and update targets.

    `normalize_*` computes (x - mean) / std; arrays or ADValues both work
    as long as they come first in the expression.
    """
    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: np.ndarray
    target_std: np.ndarray
    kind: str = "identity"

    def __post_init__(self):
        for name in ("input_mean", "input_std", "target_mean", "target_std"):
            array = np.array(getattr(self, name), dtype=np.float64)
            if name.endswith("std"):
                array = np.maximum(array, STD_FLOOR)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @classmethod
    def identity(cls, dim=2):
        zeros, ones = np.zeros(dim), np.ones(dim)
        return cls(zeros, ones, zeros, ones, kind="identity")

    @classmethod
    def scaled(cls, factor, dim=2):
        """Velocity channels multiplied by `factor`, no mean shift."""
        zeros, std = np.zeros(dim), np.full(dim, 1.0 / factor)
        return cls(zeros, std, zeros, std, kind="scale")

    def normalize_inputs(self, values):
        return (values - self.input_mean) / self.input_std

    def normalize_targets(self, values):
        return (values - self.target_mean) / self.target_std

    def denormalize_targets(self, values):
        return values * self.target_std + self.target_mean

    def as_dict(self):
        return {
            "kind": self.kind,
            "input_mean": self.input_mean.tolist(),
            "input_std": self.input_std.tolist(),
            "target_mean": self.target_mean.tolist(),
            "target_std": self.target_std.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        from data.serializers import NormStatsSerializer
        serializer = NormStatsSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        return cls(**serializer.validated_data)
