"""
Hand-designed penalties added to a learned constraint at test time.

Every penalty is a sum of squared penetration depths, so it is zero (with
a zero gradient) outside the forbidden region and grows quadratically
inside it. `length_preserve` instead penalises deviation of chain links
from rest lengths read off the seed frame.
"""
from dataclasses import dataclass, field

import numpy as np

from adcore import ops
from adcore.tape import lift

HAND_CONSTRAINT_KINDS = ("wall_x", "floor_y", "disk", "length_preserve")
SIDES = ("left", "right", "below", "above")
DEFAULT_WEIGHT = 1.0
# keeps sqrt differentiable at zero distance
DISTANCE_EPS = 1e-12


def _column(positions, axis):
    return ops.reshape(
        ops.slice_(positions, (slice(None), slice(axis, axis + 1))), (-1,))


@dataclass(frozen=True, eq=False)
class HandConstraint:
    kind: str
    params: dict = field(default_factory=dict)
    weight: float = DEFAULT_WEIGHT

    def __post_init__(self):
        if self.kind not in HAND_CONSTRAINT_KINDS:
            raise ValueError(f"unknown hand constraint {self.kind!r}")
        if not self.weight >= 0:
            raise ValueError("hand constraint weights must be >= 0")

    @classmethod
    def wall_x(cls, a, side="right", weight=DEFAULT_WEIGHT):
        return cls("wall_x", {"a": float(a), "side": side}, weight)

    @classmethod
    def floor_y(cls, b, side="below", weight=DEFAULT_WEIGHT):
        return cls("floor_y", {"b": float(b), "side": side}, weight)

    @classmethod
    def disk(cls, center, radius, weight=DEFAULT_WEIGHT):
        return cls("disk", {"center": tuple(float(c) for c in center),
                            "radius": float(radius)}, weight)

    @classmethod
    def length_preserve(cls, weight=DEFAULT_WEIGHT):
        return cls("length_preserve", {}, weight)

    @property
    def is_bound(self):
        return self.kind != "length_preserve" or "rest" in self.params

    def bound_to(self, positions, edges):
        """Fix rest lengths of `edges` (undirected pairs) from `positions`."""
        if self.kind != "length_preserve":
            return self
        positions = np.asarray(positions, dtype=np.float64)
        pairs = _undirected(edges)
        link = positions[pairs[:, 1]] - positions[pairs[:, 0]]
        rest = np.sqrt(np.sum(np.square(link), axis=1) + DISTANCE_EPS)
        return HandConstraint(self.kind, {"edges": pairs, "rest": rest},
                              self.weight)

    def depths(self, positions):
        """
        Per-node penetration depth (J) for region penalties; per-link
        absolute length deviation for length_preserve.
        """
        return self._depth(lift(np.asarray(positions, dtype=np.float64)),
                           absolute=True).value

    def penalty(self, positions, segment_ids, num_graphs):
        """Unweighted penalty per graph (shape G), differentiable."""
        positions = lift(positions)
        depth = self._depth(positions)
        squared = ops.square(depth)
        if self.kind == "length_preserve":
            owner = np.asarray(segment_ids)[self.params["edges"][:, 0]]
        else:
            owner = segment_ids
        return ops.scatter_sum_by_index(squared, owner, num_graphs)

    def _depth(self, positions, absolute=False):
        p = self.params
        if self.kind == "wall_x":
            x = _column(positions, 0)
            if p.get("side", "right") == "right":
                return ops.relu(ops.sub(x, p["a"]))
            return ops.relu(ops.sub(p["a"], x))
        if self.kind == "floor_y":
            y = _column(positions, 1)
            if p.get("side", "below") == "below":
                return ops.relu(ops.sub(p["b"], y))
            return ops.relu(ops.sub(y, p["b"]))
        if self.kind == "disk":
            offset = ops.sub(positions, np.asarray(p["center"]))
            distance = ops.sqrt(ops.add(
                ops.reduce_sum(ops.square(offset), axis=1), DISTANCE_EPS))
            return ops.relu(ops.sub(p["radius"], distance))
        if not self.is_bound:
            raise ValueError("length_preserve needs rest lengths; call "
                             "bound_to(seed_positions, edges) first")
        pairs = p["edges"]
        link = ops.sub(ops.gather_by_index(positions, pairs[:, 1]),
                       ops.gather_by_index(positions, pairs[:, 0]))
        length = ops.sqrt(ops.add(ops.reduce_sum(ops.square(link), axis=1),
                                  DISTANCE_EPS))
        deviation = ops.sub(length, p["rest"])
        if absolute:
            return lift(np.abs(deviation.value))
        return deviation


def _undirected(edges):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    keep = edges[:, 0] < edges[:, 1]
    return edges[keep]


def total_penalty(extras, positions, segment_ids, num_graphs):
    """Weighted sum of hand penalties per graph, or None without extras."""
    total = None
    for extra in extras:
        term = ops.mul(extra.penalty(positions, segment_ids, num_graphs),
                       extra.weight)
        total = term if total is None else ops.add(total, term)
    return total


def parse_hand_constraint(text):
    """
    Parse `kind[=value]:key=value:...`, for example `wall_x=2.0:w=10`,
    `floor_y=0.5:side=below`, `disk=2.5,1.0:r=0.5` or
    `length_preserve:w=5`. `w` is the weight.
    """
    from sims.serializers import HandConstraintSerializer

    head, *options = [part.strip() for part in text.split(":") if part]
    kind, _, value = head.partition("=")
    document = {"kind": kind}
    main_key = {"wall_x": "a", "floor_y": "b", "disk": "center"}.get(kind)
    if value:
        if kind == "length_preserve":
            raise ValueError(f"{kind} takes no value: {text!r}")
        if main_key is not None:
            document[main_key] = value.split(",") if kind == "disk" \
                else value
    aliases = {"w": "weight", "r": "radius", "c": "center"}
    for option in options:
        key, sep, val = option.partition("=")
        if not sep:
            raise ValueError(f"malformed constraint option {option!r} in "
                             f"{text!r}")
        key = aliases.get(key, key)
        document[key] = val.split(",") if key == "center" else val

    serializer = HandConstraintSerializer(data=document)
    serializer.is_valid(raise_exception=True)
    data = dict(serializer.validated_data)
    kind = data.pop("kind")
    weight = data.pop("weight", DEFAULT_WEIGHT)
    if kind == "disk":
        return HandConstraint.disk(data["center"], data["radius"], weight)
    if kind == "wall_x":
        return HandConstraint.wall_x(data["a"], data.get("side", "right"),
                                     weight)
    if kind == "floor_y":
        return HandConstraint.floor_y(data["b"], data.get("side", "below"),
                                      weight)
    return HandConstraint.length_preserve(weight)
