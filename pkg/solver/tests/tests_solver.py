from unittest.mock import Mock

import numpy as np
from django.test import SimpleTestCase, override_settings
from rest_framework.exceptions import ValidationError

from adcore import ops
from adcore.exceptions import DegenerateGradientError, NonFiniteError
from adcore.gradcheck import numerical_grad, relative_error
from adcore.tape import ADValue, grad
from graphs.structures import ContextWindow, Proposal, Statics
from solver.configs import SolverConfig
from solver.solvers import init_proposal, solve


def _quadratic(target):
    """f(Y) = mean((Y - Y*)^2)"""
    def constraint(context, y):
        return ops.reduce_mean(ops.square(ops.sub(y, target)))
    return constraint


def _window(latest, previous):
    positions = np.stack([np.zeros_like(latest), np.zeros_like(latest),
                          np.asarray(previous, dtype=np.float64),
                          np.asarray(latest, dtype=np.float64)])
    return ContextWindow(positions, Statics([0] * len(latest)))


class SolverConfigTest(SimpleTestCase):
    def test_defaults(self):
        cfg = SolverConfig()
        self.assertEqual((cfg.method, cfg.step_size, cfg.iterations),
                         ("gd", 0.001, 5))

    def test_invalid_values(self):
        with self.assertRaises(ValueError):
            SolverConfig(step_size=0.0)
        with self.assertRaises(ValueError):
            SolverConfig(iterations=-1)
        with self.assertRaises(ValidationError):
            SolverConfig.from_dict({"method": "newton"})
        with self.assertRaises(ValidationError):
            SolverConfig.from_dict({"step_size": -0.1})

    def test_from_dict(self):
        cfg = SolverConfig.from_dict({"method": "fp", "iterations": 3})
        self.assertEqual(cfg.method, "fp")
        self.assertEqual(cfg.iterations, 3)


class InitProposalTest(SimpleTestCase):
    def test_stationary_velocity_is_zero(self):
        window = _window(np.ones((2, 2)), np.ones((2, 2)))
        self.assertFalse(np.any(init_proposal(window, "velocity").y))

    def test_latest_velocity(self):
        window = _window([[1.0, 2.0]], [[0.0, 0.0]])
        np.testing.assert_array_equal(init_proposal(window, "velocity").y,
                                      [[1.0, 2.0]])

    def test_acceleration_is_zero(self):
        window = _window([[1.0, 2.0]], [[0.0, 0.5]])
        proposal = init_proposal(window, "acceleration")
        self.assertEqual(proposal.mode, "acceleration")
        np.testing.assert_array_equal(proposal.y, [[0.0, 0.0]])

    def test_position_is_euler_step(self):
        window = _window([[1.0, 2.0]], [[0.0, 0.5]])
        np.testing.assert_array_equal(init_proposal(window, "position").y,
                                      [[2.0, 3.5]])


class GradientDescentTest(SimpleTestCase):
    def test_single_step(self):
        """0 - 0.1 * (2 * (0 - 1)) = 0.2"""
        cfg = SolverConfig(step_size=0.1, iterations=1)
        out = solve(_quadratic(np.ones((1, 1))), None,
                    Proposal(np.zeros((1, 1))), cfg)
        self.assertAlmostEqual(out.y[0, 0], 0.2, places=15)

    def test_critical_point_is_kept(self):
        target = np.array([[0.5, -1.0], [2.0, 0.0]])
        out = solve(_quadratic(target), None, Proposal(target.copy()),
                    SolverConfig(step_size=0.1))
        np.testing.assert_array_equal(out.y, target)

    def test_descent_for_admissible_step(self):
        rng = np.random.default_rng(0)
        target = rng.normal(size=(3, 1))
        constraint = _quadratic(target)
        # L = 2/J for J=3, D=1
        cfg = SolverConfig(step_size=0.9 * 1.5, iterations=8,
                           record_trace=True)
        out = solve(constraint, None, Proposal(np.zeros((3, 1))), cfg)
        values = [constraint(None, ADValue.constant(y)).item()
                  for y in out.trace]
        for before, after in zip(values, values[1:]):
            self.assertLessEqual(after, before)

    def test_zero_iterations_is_identity(self):
        y0 = Proposal(np.array([[0.3, 0.4]]))
        out = solve(_quadratic(np.zeros((1, 2))), None, y0,
                    SolverConfig(iterations=0))
        np.testing.assert_array_equal(out.y, y0.y)

    def test_trace_holds_every_iterate(self):
        out = solve(_quadratic(np.ones((2, 2))), None,
                    Proposal(np.zeros((2, 2))),
                    SolverConfig(step_size=0.1, iterations=4,
                                 record_trace=True))
        self.assertEqual(len(out.trace), 5)
        np.testing.assert_array_equal(out.trace[-1], out.y)

    def test_fixed_rows_are_bitwise_unchanged(self):
        y0 = np.array([[0.1, -0.7], [0.3, 0.25], [1e-3, 5.0]])
        mask = np.array([True, False, True])
        for create_graph in (False, True):
            with self.subTest(create_graph=create_graph):
                out = solve(_quadratic(np.ones((3, 2))), None, Proposal(y0),
                            SolverConfig(step_size=0.2, iterations=5,
                                         record_trace=True),
                            fixed_mask=mask, create_graph=create_graph)
                values = [getattr(it, "value", it) for it in out.trace]
                for iterate in values:
                    self.assertEqual(iterate[mask].tobytes(),
                                     y0[mask].tobytes())
                self.assertFalse(np.array_equal(values[-1][1], y0[1]))

    def test_refresh_hook_sees_plain_arrays(self):
        hook = Mock(side_effect=lambda context, y: context)
        solve(_quadratic(np.ones((1, 2))), "ctx", Proposal(np.zeros((1, 2))),
              SolverConfig(iterations=3), refresh=hook)
        self.assertEqual(hook.call_count, 2)
        for call in hook.call_args_list:
            self.assertIsInstance(call.args[1], np.ndarray)

    @override_settings(CGNS_CHECK_FINITE=False)
    def test_non_finite_iterate(self):
        def exploding(context, y):
            return ops.mul(ops.reduce_sum(ops.square(y)), 1e308)

        with self.assertRaises(NonFiniteError) as ctx:
            with np.errstate(over="ignore", invalid="ignore"):
                solve(exploding, None, Proposal(np.full((1, 1), 2.0)),
                      SolverConfig(step_size=1.0, iterations=2))
        self.assertEqual(ctx.exception.step, 1)


class FastProjectionTest(SimpleTestCase):
    def test_linear_scalar(self):
        """f = Y, y0 = 2: step 2/1 lands exactly on zero"""
        def linear(context, y):
            return ops.reduce_sum(y)

        out = solve(linear, None, Proposal(np.array([[2.0]])),
                    SolverConfig(method="fp", iterations=1))
        self.assertEqual(out.y[0, 0], 0.0)

    def test_affine_constraint_in_one_step(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(4, 2))
        b = 0.75

        def affine(context, y):
            return ops.add(ops.reduce_sum(ops.mul(a, y)), b)

        out = solve(affine, None, Proposal(rng.normal(size=(4, 2))),
                    SolverConfig(method="fp", iterations=1))
        self.assertAlmostEqual(affine(None, out.y).item(), 0.0, delta=1e-12)

    def test_per_graph_steps(self):
        """two graphs in one batch are projected independently"""
        segments = np.array([0, 0, 1])

        def per_graph(context, y):
            rows = ops.reduce_sum(y, axis=1)
            return ops.add(ops.scatter_sum_by_index(rows, segments, 2),
                           np.array([1.0, -3.0]))

        out = solve(per_graph, None, Proposal(np.zeros((3, 2))),
                    SolverConfig(method="fp", iterations=1),
                    segment_ids=segments)
        np.testing.assert_allclose(per_graph(None, out.y).value, [0.0, 0.0],
                                   atol=1e-12)

    def test_fixed_rows_do_not_shorten_the_step(self):
        """linha fixa fica fora da norma: um passo zera a restricao afim"""
        a = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])

        def affine(context, y):
            return ops.sub(ops.reduce_sum(ops.mul(a, y)), 1.0)

        mask = np.array([True, False, False])
        for create_graph in (False, True):
            with self.subTest(create_graph=create_graph):
                out = solve(affine, None, Proposal(np.ones((3, 2))),
                            SolverConfig(method="fp", iterations=1),
                            fixed_mask=mask, create_graph=create_graph)
                y = getattr(out.y, "value", out.y)
                self.assertAlmostEqual(affine(None, y).item(), 0.0,
                                       delta=1e-12)
                np.testing.assert_array_equal(y[0], [1.0, 1.0])

    def test_only_fixed_rows_move_the_constraint(self):
        a = np.array([[1.0, 0.0], [0.0, 0.0]])

        def pinned(context, y):
            return ops.reduce_sum(ops.mul(a, y))

        with self.assertRaises(DegenerateGradientError):
            solve(pinned, None, Proposal(np.ones((2, 2))),
                  SolverConfig(method="fp", iterations=1),
                  fixed_mask=np.array([True, False]))

    def test_flat_constraint_is_degenerate(self):
        def flat(context, y):
            return ops.add(ops.mul(ops.reduce_sum(y), 0.0), 1.0)

        with self.assertRaises(DegenerateGradientError) as ctx:
            solve(flat, None, Proposal(np.zeros((2, 2))),
                  SolverConfig(method="fp", iterations=3))
        self.assertEqual(ctx.exception.iteration, 0)


class SolverDifferentiabilityTest(SimpleTestCase):
    """d(Y^N)/d(theta) through the recorded loop vs finite differences"""

    def setUp(self):
        rng = np.random.default_rng(21)
        self.theta = rng.normal(size=(2, 2))
        self.weights = rng.normal(size=(2, 2))
        self.y0 = rng.normal(scale=0.5, size=(2, 2))

    def _constraint(self, theta):
        def constraint(context, y):
            pull = ops.square(ops.sub(y, ops.tanh(theta)))
            spread = ops.mul(ops.softplus(theta), ops.square(y))
            return ops.reduce_mean(ops.add(pull, ops.mul(spread, 0.3)))
        return constraint

    def _level_set(self, theta):
        """sum(tanh(theta) * Y) + 0.2 |Y|^2 - 0.5, which has zeros"""
        def constraint(context, y):
            linear = ops.reduce_sum(ops.mul(ops.tanh(theta), y))
            return ops.sub(ops.add(linear,
                                   ops.mul(ops.reduce_sum(ops.square(y)),
                                           0.2)), 0.5)
        return constraint

    def _objective(self, method, build=None, fixed_mask=None):
        build = build or self._constraint
        cfg = SolverConfig(method=method, step_size=0.4,
                           iterations=5 if method == "gd" else 3)

        def value(theta_array):
            out = solve(build(ADValue.constant(theta_array)), None,
                        Proposal(self.y0), cfg, fixed_mask=fixed_mask)
            return float(np.sum(out.y * self.weights))

        theta = ADValue.leaf(self.theta)
        out = solve(build(theta), None, Proposal(self.y0), cfg,
                    fixed_mask=fixed_mask, create_graph=True)
        loss = ops.reduce_sum(ops.mul(out.y, self.weights))
        (analytic,) = grad(loss, [theta])
        return analytic, numerical_grad(value, self.theta)

    def test_fast_projection_unrolled(self):
        for mask in (None, np.array([True, False])):
            with self.subTest(fixed_mask=mask):
                analytic, fd = self._objective("fp", self._level_set, mask)
                self.assertTrue(np.any(analytic != 0.0))
                self.assertLess(relative_error(analytic, fd), 1e-3)

    def test_gradient_descent_unrolled(self):
        analytic, fd = self._objective("gd")
        self.assertTrue(np.any(analytic != 0.0))
        self.assertLess(relative_error(analytic, fd), 1e-3)

    def test_create_graph_matches_inference_values(self):
        cfg = SolverConfig(step_size=0.4, iterations=5)
        theta = ADValue.leaf(self.theta)
        traced = solve(self._constraint(theta), None, Proposal(self.y0), cfg,
                       create_graph=True)
        plain = solve(self._constraint(ADValue.constant(self.theta)), None,
                      Proposal(self.y0), cfg)
        np.testing.assert_allclose(traced.y.value, plain.y, rtol=0,
                                   atol=1e-14)
