import math

import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from adcore import ops
from adcore.exceptions import NonFiniteError, ShapeError
from adcore.gradcheck import check_gradient
from adcore.tape import ADValue

GRAD_TOL = 1e-4


def _point(seed, shape, scale=1.0):
    return np.random.default_rng(seed).normal(scale=scale, size=shape)


class PrimitiveValueTest(SimpleTestCase):
    def test_softplus_at_zero(self):
        out = ops.softplus(ADValue.constant(0.0))
        self.assertAlmostEqual(out.item(), math.log(2.0), places=12)

    def test_layer_norm_constant_row_is_zero(self):
        """zero variance row: the eps guard keeps the output at zero"""
        out = ops.layer_norm(ADValue.constant([1.0, 1.0, 1.0]))
        np.testing.assert_array_equal(out.value, np.zeros(3))

    def test_layer_norm_epsilon(self):
        """variance 1e-6 plus eps 1e-6: 1e-3 / sqrt(2e-6)"""
        self.assertEqual(ops.LAYER_NORM_EPS, 1e-6)
        out = ops.layer_norm(ADValue.constant([0.0, 2e-3]))
        np.testing.assert_allclose(out.value, [-math.sqrt(0.5),
                                               math.sqrt(0.5)], rtol=1e-9)

    def test_matmul_counts(self):
        out = ops.matmul(np.ones((2, 3)), np.ones((3, 1)))
        np.testing.assert_array_equal(out.value, np.full((2, 1), 3.0))

    def test_scatter_and_gather(self):
        rows = ADValue.constant([[1.0], [2.0], [3.0]])
        summed = ops.scatter_sum_by_index(rows, [0, 1, 0], 2)
        np.testing.assert_array_equal(summed.value, [[4.0], [2.0]])
        picked = ops.gather_by_index(summed, [1, 1, 0])
        np.testing.assert_array_equal(picked.value, [[2.0], [2.0], [4.0]])

    def test_concat_and_slice(self):
        a = ADValue.constant(np.zeros((2, 2)))
        b = ADValue.constant(np.ones((2, 1)))
        joined = ops.concat([a, b], axis=1)
        self.assertEqual(joined.shape, (2, 3))
        np.testing.assert_array_equal(joined[:, 2:].value, np.ones((2, 1)))

    def test_reductions(self):
        x = ADValue.constant([[1.0, 2.0], [3.0, 4.0]])
        self.assertEqual(ops.reduce_sum(x).item(), 10.0)
        np.testing.assert_array_equal(
            ops.reduce_mean(x, axis=0).value, [2.0, 3.0])


class PrimitiveShapeErrorTest(SimpleTestCase):
    def test_add_mismatch_names_primitive_and_shapes(self):
        with self.assertRaises(ShapeError) as ctx:
            ops.add(np.zeros((2, 3)), np.zeros((4, 3)))
        self.assertIn("add", str(ctx.exception))
        self.assertIn("(2, 3)", str(ctx.exception))
        self.assertIn("(4, 3)", str(ctx.exception))

    def test_matmul_mismatch(self):
        with self.assertRaises(ShapeError) as ctx:
            ops.matmul(np.zeros((2, 3)), np.zeros((2, 3)))
        self.assertIn("matmul", str(ctx.exception))

    def test_gather_out_of_range(self):
        with self.assertRaises(ShapeError):
            ops.gather_by_index(np.zeros((2, 1)), [0, 2])

    @override_settings(CGNS_CHECK_FINITE=True)
    def test_finite_assertion_in_debug_mode(self):
        with self.assertRaises(NonFiniteError):
            ops.div(ADValue.constant(1.0), ADValue.constant(0.0))

    @override_settings(CGNS_CHECK_FINITE=False)
    def test_finite_assertion_skipped_in_release_mode(self):
        out = ops.div(ADValue.constant(1.0), ADValue.constant(0.0))
        self.assertTrue(np.isinf(out.item()))


class PrimitiveGradientTest(SimpleTestCase):
    """reverse-mode vs central differences for every primitive"""

    def assertGradient(self, build, x):
        self.assertLess(check_gradient(build, x), GRAD_TOL)

    def test_elementwise(self):
        x = _point(0, (3, 2))
        w = _point(1, (3, 2))
        cases = {
            "add": lambda v: ops.reduce_sum(ops.mul(ops.add(v, w), w)),
            "sub": lambda v: ops.reduce_sum(ops.mul(ops.sub(w, v), w)),
            "mul": lambda v: ops.reduce_sum(ops.mul(v, v)),
            "div": lambda v: ops.reduce_sum(ops.div(w, ops.add(
                ops.square(v), 1.0))),
            "square": lambda v: ops.reduce_sum(ops.square(v)),
            "sqrt": lambda v: ops.reduce_sum(ops.sqrt(ops.add(
                ops.square(v), 0.5))),
            "tanh": lambda v: ops.reduce_sum(ops.mul(ops.tanh(v), w)),
            "softplus": lambda v: ops.reduce_sum(ops.mul(ops.softplus(v), w)),
            "sigmoid": lambda v: ops.reduce_sum(ops.mul(ops.sigmoid(v), w)),
        }
        for name, build in cases.items():
            with self.subTest(primitive=name):
                self.assertGradient(build, x)

    def test_broadcasting(self):
        row = _point(2, (1, 4))
        mat = _point(3, (5, 4))
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.square(ops.add(mat, v))), row)
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.mul(v, row)), mat)

    def test_matmul(self):
        a = _point(4, (3, 4))
        b = _point(5, (4, 2))
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.square(ops.matmul(v, b))), a)
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.square(ops.matmul(a, v))), b)

    def test_structure(self):
        x = _point(6, (4, 3))
        other = _point(7, (4, 2))
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.square(ops.concat([v, other], 1))),
            x)
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.square(ops.slice_(
                v, (slice(1, 3), slice(None))))), x)
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.square(ops.reshape(v, (3, 4)))), x)

    def test_reductions(self):
        x = _point(8, (3, 5))
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.square(ops.reduce_mean(v, axis=1))),
            x)
        self.assertGradient(
            lambda v: ops.square(ops.reduce_sum(v)), x)

    def test_layer_norm(self):
        x = _point(9, (4, 6))
        w = _point(10, (4, 6))
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.mul(ops.layer_norm(v), w)), x)

    def test_scatter_gather(self):
        x = _point(11, (5, 3))
        index = [0, 2, 2, 1, 0]
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.square(
                ops.scatter_sum_by_index(v, index, 3))), x)
        self.assertGradient(
            lambda v: ops.reduce_sum(ops.square(
                ops.gather_by_index(v, [4, 4, 0, 3]))), x)

    @hyp_settings(max_examples=25, deadline=None, derandomize=True)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_random_points(self, seed):
        x = _point(seed, (2, 3), scale=2.0)
        self.assertGradient(
            lambda v: ops.reduce_mean(ops.square(ops.softplus(
                ops.layer_norm(ops.tanh(v))))), x)
