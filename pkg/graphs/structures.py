from dataclasses import dataclass, field, replace

import numpy as np

NODE_FREE = 0
NODE_FIXED = 1
NODE_TYPES = ("free", "fixed")

UPDATE_MODES = ("velocity", "acceleration", "position")


def _frozen(array, dtype=np.float64):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Box:
    """Axis-aligned walls [lower, upper] per axis."""
    lower: tuple = (0.0, 0.0)
    upper: tuple = (5.0, 5.0)

    def wall_distances(self, positions):
        """Distance from each node centre to each wall, shape J x 2D.

        Order: lower x, upper x, lower y, upper y (per axis, lower first).
        """
        positions = np.asarray(positions, dtype=np.float64)
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        columns = []
        for axis in range(positions.shape[-1]):
            columns.append(positions[..., axis] - lower[axis])
            columns.append(upper[axis] - positions[..., axis])
        return np.stack(columns, axis=-1)

    @property
    def num_walls(self):
        return 2 * len(self.lower)


@dataclass(frozen=True, eq=False)
class Statics:
    """Per-node static properties Z."""
    node_type: np.ndarray
    radius: np.ndarray | None = None
    rest_length: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "node_type",
                           _frozen(self.node_type, dtype=np.int64))
        if self.radius is not None:
            object.__setattr__(self, "radius", _frozen(self.radius))
            if self.radius.shape != self.node_type.shape:
                raise ValueError("radius must have one entry per node")

    @property
    def num_nodes(self):
        return int(self.node_type.shape[0])

    @property
    def fixed_mask(self):
        return self.node_type == NODE_FIXED

    def one_hot(self):
        out = np.zeros((self.num_nodes, len(NODE_TYPES)))
        out[np.arange(self.num_nodes), self.node_type] = 1.0
        return out

    def permuted(self, order):
        order = np.asarray(order)
        return Statics(
            node_type=self.node_type[order],
            radius=None if self.radius is None else self.radius[order],
            rest_length=self.rest_length,
        )


@dataclass(frozen=True, eq=False)
class SystemState:
    positions: np.ndarray
    statics: Statics
    box: Box | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions))
        if self.positions.ndim != 2 or self.positions.shape[0] < 1:
            raise ValueError("positions must be a non-empty J x D array")
        if self.positions.shape[0] != self.statics.num_nodes:
            raise ValueError("positions and statics disagree on J")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")


@dataclass(frozen=True, eq=False)
class ContextWindow:
    """The H+1 most recent positions (oldest first) sharing statics."""
    positions: np.ndarray
    statics: Statics
    box: Box | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions))
        if self.positions.ndim != 3:
            raise ValueError("context positions must be (H+1) x J x D")
        if self.positions.shape[1] != self.statics.num_nodes:
            raise ValueError(
                f"mismatched node count across history: statics have "
                f"{self.statics.num_nodes} nodes, positions "
                f"{self.positions.shape[1]}")

    @classmethod
    def from_states(cls, states):
        states = list(states)
        if not states:
            raise ValueError("empty history")
        statics = states[0].statics
        for state in states[1:]:
            if state.positions.shape != states[0].positions.shape:
                raise ValueError(
                    f"mismatched J across history: "
                    f"{state.positions.shape} vs {states[0].positions.shape}")
        return cls(np.stack([s.positions for s in states]), statics,
                   states[0].box)

    @property
    def length(self):
        return int(self.positions.shape[0])

    @property
    def num_nodes(self):
        return int(self.positions.shape[1])

    @property
    def dim(self):
        return int(self.positions.shape[2])

    @property
    def latest(self):
        return self.positions[-1]

    @property
    def previous(self):
        return self.positions[-2]

    @property
    def velocities(self):
        """Backward differences, oldest first: (H) x J x D."""
        return np.diff(self.positions, axis=0)

    @property
    def states(self):
        return [SystemState(p, self.statics, self.box)
                for p in self.positions]

    def shifted(self, next_positions):
        """Drop the oldest frame and append `next_positions`."""
        stacked = np.concatenate(
            [self.positions[1:], np.asarray(next_positions)[None]], axis=0)
        return replace(self, positions=stacked)

    def translated(self, delta):
        return replace(self, positions=self.positions + np.asarray(delta))

    def permuted(self, order):
        order = np.asarray(order)
        return ContextWindow(self.positions[:, order],
                             self.statics.permuted(order), self.box)


@dataclass(frozen=True)
class FeatureConfig:
    """How a context is turned into graph features for one domain."""
    connectivity: str = "chain"
    radius: float | None = None
    wall_clip: float | None = None
    use_radius: bool = False
    history: int = 3
    dim: int = 2

    def node_width(self, with_proposal=True):
        width = len(NODE_TYPES) + self.history * self.dim
        if self.use_radius:
            width += 1
        if self.wall_clip is not None:
            width += 2 * self.dim
        if with_proposal:
            width += self.dim
        return width

    @property
    def edge_width(self):
        return self.dim


@dataclass(frozen=True, eq=False)
class ContextGraph:
    """
    Translation-invariant encoding of a context.

    `node_features` is a plain array, or an ADValue once a differentiable
    proposal has been attached. `n_node` holds per-graph node counts (one
    entry unless the graph is a batch).
    """
    node_features: object
    edges: np.ndarray
    edge_features: np.ndarray
    fixed_mask: np.ndarray
    n_node: tuple = ()
    wall_channels: slice | None = None
    proposal_width: int = 0

    @property
    def num_nodes(self):
        return int(self.fixed_mask.shape[0])

    @property
    def num_graphs(self):
        return len(self.n_node)

    @property
    def senders(self):
        return self.edges[:, 0]

    @property
    def receivers(self):
        return self.edges[:, 1]

    @property
    def segment_ids(self):
        return np.repeat(np.arange(len(self.n_node)), self.n_node)

    @property
    def node_offsets(self):
        return np.concatenate([[0], np.cumsum(self.n_node)]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class Proposal:
    y: np.ndarray
    mode: str = "velocity"
    trace: tuple = field(default=())

    def __post_init__(self):
        if self.mode not in UPDATE_MODES:
            raise ValueError(f"unknown update mode {self.mode!r}")
