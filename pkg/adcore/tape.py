"""
Define-by-run reverse-mode differentiation over dense float64 arrays.

Every primitive in `adcore.ops` returns an `ADValue` that remembers the
inputs it was computed from and a vector-Jacobian product written with the
same primitives. Running the reverse sweep with recording switched on
therefore builds a differentiable graph of the backward pass itself, which
is what lets training differentiate through `grad` calls made inside the
solver loop.
"""
import threading
from contextlib import contextmanager

import numpy as np
import numpy.typing as npt
from django.conf import settings

from adcore.exceptions import InternalGraphError, NonFiniteError, ShapeError


DenseArray = npt.NDArray[np.float64]

_state = threading.local()


def as_dense(data, shape=None):
    """Copy-free float64 view of `data`, reshaped when `shape` is given."""
    array = np.asarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape, dtype=np.int64)) != array.size:
            raise ShapeError("as_dense", array.shape, shape,
                             detail="element count differs")
        array = array.reshape(shape)
    return array


def is_recording():
    return getattr(_state, "recording", True)


@contextmanager
def no_record():
    """Evaluate primitives without recording provenance (thread-local)."""
    previous = is_recording()
    _state.recording = False
    try:
        yield
    finally:
        _state.recording = previous


def _check_finite_enabled():
    if not settings.configured:
        return False
    return bool(getattr(settings, "CGNS_CHECK_FINITE", False))


class ADValue:
    __slots__ = ("value", "parents", "vjp", "op", "requires_grad", "name")
    # make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, value, parents=(), vjp=None, op=None,
                 requires_grad=False, name=None):
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.op = op
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def leaf(cls, data, requires_grad=True, name=None):
        return cls(as_dense(data).copy(), requires_grad=requires_grad,
                   name=name)

    @classmethod
    def constant(cls, data):
        return cls(as_dense(data))

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def is_leaf(self):
        return self.vjp is None

    def detach(self):
        return ADValue(self.value)

    def item(self):
        return float(self.value.reshape(-1)[0])

    def __repr__(self):
        label = self.op or ("leaf" if self.requires_grad else "const")
        return f"ADValue({label}, shape={self.value.shape})"

    # arithmetic sugar; the primitives live in adcore.ops

    def __add__(self, other):
        from adcore import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from adcore import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from adcore import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from adcore import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from adcore import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from adcore import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from adcore import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from adcore import ops
        return ops.div(other, self)

    def __neg__(self):
        from adcore import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from adcore import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from adcore import ops
        return ops.slice_(self, index)


def lift(x):
    """Wrap numbers and arrays as constants; pass ADValues through."""
    if isinstance(x, ADValue):
        return x
    return ADValue.constant(x)


def record(op, value, parents, vjp):
    """Create the result node of primitive `op`."""
    if _check_finite_enabled() and not np.all(np.isfinite(value)):
        raise NonFiniteError(op)
    if is_recording() and any(p.requires_grad for p in parents):
        return ADValue(value, tuple(parents), vjp, op, requires_grad=True)
    return ADValue(value)


def _reverse_topological(output, stops):
    """Nodes reachable from `output`, each listed before its parents.

    Nodes whose id is in `stops` are not expanded.
    """
    order = []
    state = {}
    stack = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        key = id(node)
        if expanded:
            state[key] = 2
            order.append(node)
            continue
        mark = state.get(key)
        if mark == 2:
            continue
        if mark == 1:
            raise InternalGraphError(
                f"cycle detected at node produced by {node.op}")
        state[key] = 1
        stack.append((node, True))
        if key in stops or node.vjp is None:
            continue
        for parent in node.parents:
            if not parent.requires_grad:
                continue
            parent_mark = state.get(id(parent))
            if parent_mark == 1:
                raise InternalGraphError(
                    f"cycle detected at node produced by {parent.op}")
            if parent_mark is None:
                stack.append((parent, False))
    order.reverse()
    return order


def grad(output, wrt, build_graph=False):
    """Gradients of scalar `output` with respect to each node in `wrt`.

    Each node in `wrt` is treated as a leaf of the sweep, so an intermediate
    value (for instance a solver iterate) can be differentiated against
    directly. Nodes outside the provenance of `output` get zeros.

    With `build_graph=False` plain arrays are returned. With
    `build_graph=True` the reverse sweep is itself recorded and ADValues are
    returned, ready to be differentiated again.
    """
    if output.value.size != 1:
        raise ShapeError("grad", output.shape, (),
                         detail="output must be scalar")
    wrt = list(wrt)
    stops = {id(w) for w in wrt}

    cotangents = {}
    if output.requires_grad:
        seed = ADValue.constant(np.ones_like(output.value))
        cotangents[id(output)] = seed
        order = _reverse_topological(output, stops)
    else:
        order = []
        if id(output) in stops:
            cotangents[id(output)] = ADValue.constant(
                np.ones_like(output.value))

    from adcore import ops

    scope = _keep_recording() if build_graph else no_record()
    with scope:
        for node in order:
            key = id(node)
            if key in stops or node.vjp is None:
                continue
            upstream = cotangents.pop(key, None)
            if upstream is None:
                continue
            contributions = node.vjp(upstream)
            for parent, contribution in zip(node.parents, contributions):
                if contribution is None or not parent.requires_grad:
                    continue
                parent_key = id(parent)
                current = cotangents.get(parent_key)
                if current is None:
                    cotangents[parent_key] = contribution
                else:
                    cotangents[parent_key] = ops.add(current, contribution)

    results = []
    for node in wrt:
        g = cotangents.get(id(node))
        if g is None:
            g = ADValue.constant(np.zeros_like(node.value))
        if g.shape != node.shape:
            raise InternalGraphError(
                f"gradient shape {g.shape} does not match {node.shape}")
        results.append(g if build_graph else g.value)
    return results


@contextmanager
def _keep_recording():
    previous = is_recording()
    _state.recording = True
    try:
        yield
    finally:
        _state.recording = previous
