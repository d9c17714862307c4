"""Named parameter arrays and their deterministic initialisation."""
from collections.abc import Mapping

import numpy as np

from adcore.exceptions import ShapeError
from adcore.tape import ADValue, as_dense


class ParamStore(Mapping):
    """Immutable mapping name -> float64 array, iterated in name order."""

    def __init__(self, entries=None):
        entries = dict(entries or {})
        self._entries = {}
        for name in sorted(entries):
            array = as_dense(entries[name]).copy()
            array.setflags(write=False)
            self._entries[name] = array

    def __getitem__(self, name):
        return self._entries[name]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __repr__(self):
        return f"ParamStore({len(self)} arrays, {self.size} values)"

    @property
    def size(self):
        return int(sum(a.size for a in self._entries.values()))

    def shapes(self):
        return {name: tuple(a.shape) for name, a in self._entries.items()}

    def subtree(self, prefix):
        """Entries under `prefix/`, with the prefix stripped."""
        head = prefix.rstrip("/") + "/"
        return ParamStore({
            name[len(head):]: array
            for name, array in self._entries.items()
            if name.startswith(head)
        })

    def replace(self, updates):
        """New store with some arrays swapped; shapes must not change."""
        merged = dict(self._entries)
        for name, array in updates.items():
            if name not in merged:
                raise KeyError(f"unknown parameter {name!r}")
            array = as_dense(array)
            if array.shape != merged[name].shape:
                raise ShapeError("ParamStore.replace", merged[name].shape,
                                 array.shape, detail=name)
            merged[name] = array
        return ParamStore(merged)

    def as_leaves(self, requires_grad=True):
        """ADValue view of every entry, keyed by name."""
        return {
            name: ADValue.leaf(array, requires_grad=requires_grad, name=name)
            for name, array in self._entries.items()
        }

    def as_constants(self):
        return {name: ADValue(array) for name, array in self._entries.items()}


def glorot_bound(fan_in, fan_out):
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(layer_spec, seed):
    """
    Fan-in/fan-out scaled uniform initialisation.

    `layer_spec` maps a block prefix (e.g. "processor/block0/edge_mlp") to
    its layer sizes [in, hidden..., out]; each consecutive pair gets
    "<prefix>/w<i>" (uniform in +-sqrt(6/(fan_in+fan_out))) and
    "<prefix>/b<i>" (zeros). Blocks are drawn in name order from one
    generator, so (spec, seed) fixes every value.
    """
    rng = np.random.default_rng(seed)
    entries = {}
    for prefix in sorted(layer_spec):
        sizes = [int(s) for s in layer_spec[prefix]]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(
                f"layer sizes for {prefix!r} must be >= 2 positive integers, "
                f"got {sizes}")
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = glorot_bound(fan_in, fan_out)
            entries[f"{prefix}/w{i}"] = rng.uniform(
                -bound, bound, size=(fan_in, fan_out))
            entries[f"{prefix}/b{i}"] = np.zeros(fan_out)
    return ParamStore(entries)
