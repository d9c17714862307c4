"""
Differentiable primitives over float64 arrays.

Every vector-Jacobian product is written in terms of these same primitives
so that a recorded backward pass can itself be differentiated.
"""
import numpy as np

from adcore.exceptions import ShapeError
from adcore.tape import ADValue, lift, record

LAYER_NORM_EPS = 1e-6


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# shape plumbing

def sum_to(x, shape):
    """Sum a broadcast array back down to `shape`."""
    x = lift(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    lead = x.ndim - len(shape)
    if lead < 0:
        raise ShapeError("sum_to", x.shape, shape)
    axes = list(range(lead))
    for i, extent in enumerate(shape):
        if extent == 1 and x.shape[lead + i] != 1:
            axes.append(lead + i)
        elif extent != x.shape[lead + i]:
            raise ShapeError("sum_to", x.shape, shape)
    value = x.value.sum(axis=tuple(axes), keepdims=True)
    value = value.reshape(shape)

    def vjp(g):
        return (broadcast_to(g, x.shape),)

    return record("sum_to", value, (x,), vjp)


def broadcast_to(x, shape):
    x = lift(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    try:
        value = np.broadcast_to(x.value, shape)
    except ValueError:
        raise ShapeError("broadcast_to", x.shape, shape) from None

    def vjp(g):
        return (sum_to(g, x.shape),)

    return record("broadcast_to", np.ascontiguousarray(value), (x,), vjp)


def reshape(x, shape):
    x = lift(x)
    shape = tuple(shape)
    try:
        value = x.value.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, shape) from None

    def vjp(g):
        return (reshape(g, x.shape),)

    return record("reshape", value, (x,), vjp)


def transpose(x):
    x = lift(x)
    if x.ndim != 2:
        raise ShapeError("transpose", x.shape, detail="expects a matrix")

    def vjp(g):
        return (transpose(g),)

    return record("transpose", x.value.T.copy(), (x,), vjp)


# elementwise arithmetic

def add(a, b):
    a, b = lift(a), lift(b)
    _broadcast_shape("add", a, b)

    def vjp(g):
        return sum_to(g, a.shape), sum_to(g, b.shape)

    return record("add", a.value + b.value, (a, b), vjp)


def sub(a, b):
    a, b = lift(a), lift(b)
    _broadcast_shape("sub", a, b)

    def vjp(g):
        return sum_to(g, a.shape), sum_to(neg(g), b.shape)

    return record("sub", a.value - b.value, (a, b), vjp)


def mul(a, b):
    a, b = lift(a), lift(b)
    _broadcast_shape("mul", a, b)

    def vjp(g):
        return sum_to(mul(g, b), a.shape), sum_to(mul(g, a), b.shape)

    return record("mul", a.value * b.value, (a, b), vjp)


def div(a, b):
    a, b = lift(a), lift(b)
    _broadcast_shape("div", a, b)
    out_value = a.value / b.value

    def vjp(g):
        ga = sum_to(div(g, b), a.shape)
        gb = sum_to(neg(div(mul(g, a), square(b))), b.shape)
        return ga, gb

    return record("div", out_value, (a, b), vjp)


def neg(a):
    a = lift(a)

    def vjp(g):
        return (neg(g),)

    return record("neg", -a.value, (a,), vjp)


def square(a):
    a = lift(a)

    def vjp(g):
        return (mul(g, mul(a, 2.0)),)

    return record("square", a.value * a.value, (a,), vjp)


def sqrt(a):
    a = lift(a)
    if np.any(a.value < 0):
        raise ValueError("sqrt: negative input")
    out = None

    def vjp(g):
        return (div(mul(g, 0.5), out),)

    out = record("sqrt", np.sqrt(a.value), (a,), vjp)
    return out


def tanh(a):
    a = lift(a)
    out = None

    def vjp(g):
        return (mul(g, sub(1.0, square(out))),)

    out = record("tanh", np.tanh(a.value), (a,), vjp)
    return out


def sigmoid(a):
    a = lift(a)
    out = None

    def vjp(g):
        return (mul(g, mul(out, sub(1.0, out))),)

    # tanh form stays finite for large |x|
    value = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    out = record("sigmoid", value, (a,), vjp)
    return out


def softplus(a):
    a = lift(a)

    def vjp(g):
        return (mul(g, sigmoid(a)),)

    return record("softplus", np.logaddexp(0.0, a.value), (a,), vjp)


def relu(a):
    a = lift(a)
    mask = (a.value > 0).astype(np.float64)

    def vjp(g):
        return (mul(g, mask),)

    return record("relu", a.value * mask, (a,), vjp)


def clip(a, lower, upper):
    a = lift(a)
    inside = ((a.value > lower) & (a.value < upper)).astype(np.float64)

    def vjp(g):
        return (mul(g, inside),)

    return record("clip", np.clip(a.value, lower, upper), (a,), vjp)


# contractions and reductions

def matmul(a, b):
    a, b = lift(a), lift(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)

    def vjp(g):
        return matmul(g, transpose(b)), matmul(transpose(a), g)

    return record("matmul", a.value @ b.value, (a, b), vjp)


def reduce_sum(a, axis=None, keepdims=False):
    a = lift(a)
    value = a.value.sum(axis=axis, keepdims=keepdims)
    kept_shape = a.value.sum(axis=axis, keepdims=True).shape

    def vjp(g):
        return (broadcast_to(reshape(g, kept_shape), a.shape),)

    return record("reduce_sum", np.asarray(value), (a,), vjp)


def reduce_mean(a, axis=None, keepdims=False):
    a = lift(a)
    if axis is None:
        count = a.value.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    if count == 0:
        raise ShapeError("reduce_mean", a.shape, detail="empty reduction")
    return mul(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def layer_norm(a, axis=-1, eps=LAYER_NORM_EPS):
    """Normalise along `axis` to zero mean and unit variance (no gain)."""
    a = lift(a)
    centered = sub(a, reduce_mean(a, axis=axis, keepdims=True))
    variance = reduce_mean(square(centered), axis=axis, keepdims=True)
    return div(centered, sqrt(add(variance, eps)))


# structure

def concat(values, axis=0):
    values = [lift(v) for v in values]
    if not values:
        raise ShapeError("concat", detail="nothing to concatenate")
    try:
        value = np.concatenate([v.value for v in values], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[v.shape for v in values]) from None
    bounds = np.cumsum([0] + [v.shape[axis] for v in values])

    def vjp(g):
        pieces = []
        for start, stop in zip(bounds[:-1], bounds[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(int(start), int(stop))
            pieces.append(slice_(g, tuple(index)))
        return tuple(pieces)

    return record("concat", value, tuple(values), vjp)


def slice_(a, index):
    """Basic (view-style) indexing: ints and slices only."""
    a = lift(a)
    if not isinstance(index, tuple):
        index = (index,)
    for part in index:
        if not isinstance(part, (int, slice, np.integer)):
            raise ShapeError("slice", a.shape,
                             detail="only ints and slices are supported")
    try:
        value = np.array(a.value[index])
    except IndexError:
        raise ShapeError("slice", a.shape, detail=f"index {index}") from None

    def vjp(g):
        return (embed(g, a.shape, index),)

    return record("slice", value, (a,), vjp)


def embed(a, shape, index):
    """Zeros of `shape` with `a` written at `index`; adjoint of slice_."""
    a = lift(a)
    value = np.zeros(shape, dtype=np.float64)
    try:
        value[index] = a.value
    except ValueError:
        raise ShapeError("embed", a.shape, shape) from None

    def vjp(g):
        return (slice_(g, index),)

    return record("embed", value, (a,), vjp)


def gather_by_index(a, index):
    """Rows of `a` selected by integer `index` (repeats allowed)."""
    a = lift(a)
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 1:
        raise ShapeError("gather_by_index", a.shape, index.shape)
    if index.size and (index.min() < 0 or index.max() >= a.shape[0]):
        raise ShapeError("gather_by_index", a.shape, index.shape,
                         detail="index out of range")
    rows = a.shape[0]

    def vjp(g):
        return (scatter_sum_by_index(g, index, rows),)

    return record("gather_by_index", a.value[index], (a,), vjp)


def scatter_sum_by_index(a, index, num_segments):
    """Sum rows of `a` into `num_segments` buckets given by `index`."""
    a = lift(a)
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 1 or index.shape[0] != a.shape[0]:
        raise ShapeError("scatter_sum_by_index", a.shape, index.shape)
    if index.size and (index.min() < 0 or index.max() >= num_segments):
        raise ShapeError("scatter_sum_by_index", a.shape, index.shape,
                         detail="segment id out of range")
    value = np.zeros((num_segments,) + a.shape[1:], dtype=np.float64)
    np.add.at(value, index, a.value)

    def vjp(g):
        return (gather_by_index(g, index),)

    return record("scatter_sum_by_index", value, (a,), vjp)


def segment_mean(a, index, num_segments):
    counts = np.bincount(np.asarray(index, dtype=np.int64),
                         minlength=num_segments).astype(np.float64)
    if np.any(counts == 0):
        raise ShapeError("segment_mean", a.shape, (num_segments,),
                         detail="empty segment")
    shape = (num_segments,) + (1,) * (lift(a).ndim - 1)
    return div(scatter_sum_by_index(a, index, num_segments),
               counts.reshape(shape))


def sum_squares(a):
    return reduce_sum(square(a))


__all__ = [
    "ADValue", "add", "sub", "mul", "div", "neg", "matmul", "concat",
    "slice_", "embed", "reduce_mean", "reduce_sum", "square", "sqrt", "tanh",
    "sigmoid", "softplus", "relu", "clip", "layer_norm",
    "scatter_sum_by_index", "gather_by_index", "segment_mean", "reshape",
    "transpose", "broadcast_to", "sum_to", "sum_squares",
]
