"""Finite-difference oracles for checking reverse-mode gradients."""
import numpy as np

from adcore.tape import ADValue, grad, no_record


def numerical_grad(fn, x, h=1e-5):
    """Central differences of scalar `fn(array)` at `x`."""
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    result = out.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        upper = float(fn(x))
        flat[i] = saved - h
        lower = float(fn(x))
        flat[i] = saved
        result[i] = (upper - lower) / (2.0 * h)
    return out


def relative_error(actual, expected, floor=1e-8):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = max(np.max(np.abs(expected), initial=0.0),
                np.max(np.abs(actual), initial=0.0), floor)
    return float(np.max(np.abs(actual - expected), initial=0.0) / scale)


def check_gradient(build, x, h=1e-5):
    """Relative error between `grad` and central differences.

    `build` maps an ADValue to a scalar ADValue.
    """
    leaf = ADValue.leaf(x)
    (analytic,) = grad(build(leaf), [leaf])

    def scalar(array):
        with no_record():
            return build(ADValue.constant(array)).item()

    return relative_error(analytic, numerical_grad(scalar, x, h))


def check_hvp(build, x, v, h=1e-5):
    """Compare grad-of-grad Hessian-vector products with differences of
    first gradients along `v`."""
    v = np.asarray(v, dtype=np.float64)
    leaf = ADValue.leaf(x)
    (first,) = grad(build(leaf), [leaf], build_graph=True)
    from adcore import ops
    directional = ops.reduce_sum(ops.mul(first, v))
    (hvp,) = grad(directional, [leaf])

    def first_grad(array):
        point = ADValue.leaf(array)
        (g,) = grad(build(point), [point])
        return g

    x = np.asarray(x, dtype=np.float64)
    fd = (first_grad(x + h * v) - first_grad(x - h * v)) / (2.0 * h)
    return relative_error(hvp, fd)
