import numpy as np
from django.test import SimpleTestCase
from rest_framework.exceptions import ValidationError

from adcore import ops
from adcore.tape import ADValue, grad, no_record
from data.generators import generate_bouncing_balls, generate_rope
from data.structures import NormStats
from graphs.structures import ContextWindow, Proposal, Statics
from sims.configs import VARIANTS, SimulatorSpec, build_spec
from sims.hand_constraints import HandConstraint, parse_hand_constraint
from sims.simulator import (compose_constraints, constant_velocity,
                            init_simulator_params, learned_constraint,
                            predict, predict_batch, prepare_batch, rollout,
                            updater)
from solver.configs import SolverConfig

SMALL_NET = {"latent_size": 8, "mlp_hidden_layers": 1,
             "mlp_hidden_units": 16, "mlp_constraint_layers": 1,
             "mlp_constraint_units": 16}


def _spec(variant, domain="rope", **kwargs):
    return build_spec(domain, variant, profile="desk",
                      net_overrides=SMALL_NET, **kwargs)


def _window(positions, fixed=()):
    positions = np.asarray(positions, dtype=np.float64)
    node_type = [1 if j in fixed else 0 for j in range(positions.shape[1])]
    return ContextWindow(positions, Statics(node_type))


class SimulatorSpecTest(SimpleTestCase):
    def test_forward_takes_no_solver(self):
        with self.assertRaises(ValueError):
            SimulatorSpec("rope", "forward", solver=SolverConfig())
        self.assertIsNone(_spec("forward").solver)

    def test_neural_projection_forces_positions(self):
        spec = _spec("neural_projection")
        self.assertEqual(spec.update_mode, "position")
        self.assertEqual(spec.solver.method, "fp")
        with self.assertRaises(ValueError):
            SimulatorSpec("rope", "neural_projection",
                          solver=SolverConfig(method="fp"))

    def test_aggregation_follows_solver(self):
        self.assertEqual(_spec("cgns_gd").aggregation, "mean_of_squares")
        self.assertEqual(_spec("cgns_fp").aggregation, "plain_sum")
        self.assertEqual(_spec("cmlp_fp").aggregation, "plain_sum")

    def test_domain_defaults(self):
        rope, balls = _spec("cgns_gd"), _spec("cgns_gd", "bouncing_balls")
        self.assertEqual(rope.net.num_message_passing, 2)
        self.assertEqual(balls.net.num_message_passing, 1)
        self.assertEqual(balls.features.connectivity, "fully_connected")
        self.assertEqual(balls.features.wall_clip, 2.0)
        self.assertIsNone(rope.features.wall_clip)

    def test_overrides(self):
        spec = _spec("cgns_gd", iterations=3, message_passing=0,
                     step_size=0.01)
        self.assertEqual(spec.solver.iterations, 3)
        self.assertEqual(spec.solver.step_size, 0.01)
        self.assertEqual(spec.net.num_message_passing, 0)

    def test_dict_round_trip(self):
        spec = _spec("cgns_fp", "bouncing_balls",
                     norm=NormStats.scaled(100.0))
        again = SimulatorSpec.from_dict(spec.as_dict())
        self.assertEqual(again.as_dict(), spec.as_dict())

    def test_invalid_document(self):
        document = _spec("forward").as_dict()
        document["solver"] = {"method": "gd"}
        with self.assertRaises(ValidationError):
            SimulatorSpec.from_dict(document)
        with self.assertRaises(ValidationError):
            SimulatorSpec.from_dict({"domain": "rope", "variant": "newton"})

    def test_unknown_profile(self):
        with self.assertRaises(ValueError):
            build_spec("rope", "cgns_gd", profile="cluster")


class UpdaterTest(SimpleTestCase):
    def test_velocity(self):
        window = _window([[[0.0, 0.0]]] * 4)
        state = updater(window, Proposal(np.array([[1.0, 2.0]])))
        np.testing.assert_array_equal(state.positions, [[1.0, 2.0]])

    def test_acceleration(self):
        """2 P_t - P_{t-1} + Y = (2, -1)"""
        window = _window([[[0.0, 0.0]], [[0.0, 0.0]], [[0.0, 0.0]],
                          [[1.0, 0.0]]])
        state = updater(window, Proposal(np.array([[0.0, -1.0]]),
                                         mode="acceleration"))
        np.testing.assert_array_equal(state.positions, [[2.0, -1.0]])

    def test_zero_velocity_keeps_position(self):
        window = _window(np.arange(16.0).reshape(4, 2, 2))
        state = updater(window, Proposal(np.zeros((2, 2))))
        np.testing.assert_array_equal(state.positions, window.latest)

    def test_position_is_identity(self):
        window = _window(np.zeros((4, 1, 2)))
        state = updater(window, Proposal(np.array([[3.0, 4.0]]),
                                         mode="position"))
        np.testing.assert_array_equal(state.positions, [[3.0, 4.0]])

    def test_fixed_override(self):
        window = _window(np.zeros((4, 2, 2)), fixed=(0,))
        proposal = Proposal(np.ones((2, 2)))
        pinned = updater(window, proposal)
        np.testing.assert_array_equal(pinned.positions, [[0, 0], [1, 1]])
        loose = updater(window, proposal, override_fixed=False)
        np.testing.assert_array_equal(loose.positions, np.ones((2, 2)))

    def test_denormalises(self):
        window = _window(np.zeros((4, 1, 2)))
        state = updater(window, Proposal(np.array([[1.3, 0.0]])),
                        NormStats.scaled(100.0))
        self.assertAlmostEqual(state.positions[0, 0], 0.013, places=15)


class PredictTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.rope = generate_rope(seed=0, n_traj=2, num_frames=10)
        cls.balls = generate_bouncing_balls(seed=0, n_traj=2, num_frames=10)

    def test_every_variant_predicts(self):
        for domain, trajectories in (("rope", self.rope),
                                     ("bouncing_balls", self.balls)):
            norm = NormStats.scaled(100.0) if domain == "bouncing_balls" \
                else None
            for variant in VARIANTS:
                with self.subTest(domain=domain, variant=variant):
                    spec = _spec(variant, domain, norm=norm, iterations=2)
                    params = init_simulator_params(spec, seed=1)
                    window = trajectories[0].window(5)
                    proposal = predict(spec, params, window)
                    self.assertEqual(proposal.y.shape,
                                     (window.num_nodes, 2))
                    self.assertTrue(np.all(np.isfinite(proposal.y)))

    def test_zero_iterations_is_constant_velocity(self):
        spec = _spec("cgns_gd", iterations=0)
        params = init_simulator_params(spec, seed=2)
        window = self.rope[0].window(6)
        state = updater(window, predict(spec, params, window))
        expected = window.latest + (window.latest - window.previous)
        np.testing.assert_array_equal(state.positions, expected)

    def test_iterative_without_iterations_is_init(self):
        spec = _spec("iterative", iterations=0)
        params = init_simulator_params(spec, seed=2)
        window = self.rope[1].window(4)
        proposal = predict(spec, params, window)
        np.testing.assert_array_equal(proposal.y,
                                      window.latest - window.previous)

    def test_forward_with_zero_decoder_stands_still(self):
        spec = _spec("forward")
        params = init_simulator_params(spec, seed=3)
        params = params.replace({name: np.zeros_like(params[name])
                                 for name in params
                                 if name.startswith("forward/decoder/")})
        window = self.rope[0].window(5)
        state = updater(window, predict(spec, params, window))
        np.testing.assert_array_equal(state.positions, window.latest)

    def test_batch_matches_single_windows(self):
        spec = _spec("cgns_gd", "bouncing_balls",
                     norm=NormStats.scaled(100.0), step_size=0.01)
        params = init_simulator_params(spec, seed=4)
        windows = [self.balls[0].window(3), self.balls[1].window(7)]
        batch = prepare_batch(spec, windows)
        joined = predict_batch(spec, params, batch)
        offset = 0
        for window in windows:
            single = predict(spec, params, window).y
            np.testing.assert_allclose(
                joined.y[offset:offset + window.num_nodes], single,
                rtol=0, atol=1e-12)
            offset += window.num_nodes

    def test_fixed_rows_untouched_by_solver(self):
        spec = _spec("cgns_gd", step_size=0.05)
        params = init_simulator_params(spec, seed=5)
        window = self.rope[0].window(6)
        proposal = predict(spec, params, window, record_trace=True)
        for iterate in proposal.trace:
            np.testing.assert_array_equal(iterate[0], proposal.trace[0][0])

    def test_neural_projection_ignores_older_history(self):
        spec = _spec("neural_projection", iterations=1)
        params = init_simulator_params(spec, seed=6)
        window = self.rope[0].window(6)
        positions = np.array(window.positions)
        positions[0] += 0.37
        positions[1] -= 0.21
        perturbed = ContextWindow(positions, window.statics)
        a = predict(spec, params, window).y
        b = predict(spec, params, perturbed).y
        self.assertEqual(a.tobytes(), b.tobytes())


class RolloutTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.rope = generate_rope(seed=8, n_traj=1, num_frames=16)[0]

    def test_single_step_is_predict_and_update(self):
        spec = _spec("cgns_gd", step_size=0.05)
        params = init_simulator_params(spec, seed=0)
        window = self.rope.window(3)
        out = rollout(spec, params, window, steps=1)
        state = updater(window, predict(spec, params, window))
        self.assertEqual(out.num_frames, 5)
        np.testing.assert_array_equal(out.positions[-1], state.positions)
        np.testing.assert_array_equal(out.positions[:4], window.positions)

    def test_pinned_node_never_moves(self):
        for variant in ("cgns_gd", "forward", "iterative"):
            with self.subTest(variant=variant):
                spec = _spec(variant, iterations=2, step_size=0.05)
                params = init_simulator_params(spec, seed=1)
                out = rollout(spec, params, self.rope.window(3), steps=6)
                pinned = out.positions[:, 0]
                self.assertTrue(np.all(pinned == pinned[0]))

    def test_ground_truth_replay(self):
        spec = _spec("cgns_gd")
        truth = self.rope.positions
        t0 = 3
        steps = iter(range(t0, self.rope.num_frames - 1))

        def replay(window):
            return Proposal(self.rope.target_update(next(steps), "velocity"))

        out = rollout(spec, None, self.rope.window(t0),
                      steps=self.rope.num_frames - 1 - t0, predictor=replay)
        np.testing.assert_allclose(out.positions, truth, rtol=0, atol=1e-12)

    def test_constant_velocity_predictor(self):
        spec = _spec("cgns_gd", iterations=0)
        params = init_simulator_params(spec, seed=2)
        window = self.rope.window(3)
        learned = rollout(spec, params, window, steps=4)
        baseline = rollout(spec, None, window, steps=4,
                           predictor=constant_velocity(spec))
        np.testing.assert_array_equal(learned.positions, baseline.positions)

    def test_steps_must_be_positive(self):
        with self.assertRaises(ValueError):
            rollout(_spec("cgns_gd"), None, self.rope.window(3), steps=0)


class HandConstraintTest(SimpleTestCase):
    def _penalty(self, extra, positions):
        positions = np.asarray(positions, dtype=np.float64)
        segments = np.zeros(len(positions), dtype=np.int64)
        return extra.penalty(positions, segments, 1).value[0]

    def test_wall_penalty_is_quadratic(self):
        wall = HandConstraint.wall_x(2.0, side="right", weight=10.0)
        self.assertAlmostEqual(self._penalty(wall, [[2.5, 0.0]]), 0.25)
        self.assertEqual(self._penalty(wall, [[1.5, 0.0]]), 0.0)

    def test_floor_and_disk(self):
        floor = HandConstraint.floor_y(0.0)
        self.assertAlmostEqual(self._penalty(floor, [[3.0, -0.5]]), 0.25)
        self.assertEqual(self._penalty(floor, [[3.0, 0.5]]), 0.0)
        disk = HandConstraint.disk((0.0, 0.0), 1.0)
        self.assertAlmostEqual(self._penalty(disk, [[0.5, 0.0]]), 0.25,
                               places=10)
        self.assertEqual(self._penalty(disk, [[2.0, 0.0]]), 0.0)

    def test_gradient_points_out_of_region(self):
        cases = [
            (HandConstraint.wall_x(2.0, "right"), [2.5, 1.0], 0, 1.0),
            (HandConstraint.wall_x(2.0, "left"), [1.5, 1.0], 0, -1.0),
            (HandConstraint.floor_y(0.0, "below"), [1.0, -0.5], 1, -1.0),
            (HandConstraint.floor_y(0.0, "above"), [1.0, 0.5], 1, 1.0),
        ]
        for extra, point, axis, sign in cases:
            with self.subTest(kind=extra.kind, side=extra.params["side"]):
                p = ADValue.leaf(np.array([point]))
                (g,) = grad(ops.reduce_sum(
                    extra.penalty(p, np.zeros(1, dtype=np.int64), 1)), [p])
                # descent direction -g leads back out
                self.assertEqual(np.sign(g[0, axis]), sign)
                self.assertEqual(g[0, 1 - axis], 0.0)

    def test_gradient_vanishes_outside(self):
        for extra in (HandConstraint.wall_x(2.0),
                      HandConstraint.floor_y(0.0),
                      HandConstraint.disk((0.0, 0.0), 0.5)):
            p = ADValue.leaf(np.array([[1.0, 1.0]]))
            (g,) = grad(ops.reduce_sum(
                extra.penalty(p, np.zeros(1, dtype=np.int64), 1)), [p])
            np.testing.assert_array_equal(g, 0.0)

    def test_length_preserve(self):
        seed = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
        edges = np.array([[0, 1], [1, 0], [1, 2], [2, 1]])
        links = HandConstraint.length_preserve().bound_to(seed, edges)
        self.assertEqual(self._penalty(links, seed), 0.0)
        stretched = seed.copy()
        stretched[2, 1] = 1.5
        self.assertAlmostEqual(self._penalty(links, stretched), 0.25)
        np.testing.assert_allclose(links.depths(stretched), [0.0, 0.5])
        with self.assertRaises(ValueError):
            HandConstraint.length_preserve().penalty(seed, np.zeros(3), 1)

    def test_length_preserve_coincident_nodes(self):
        """nos coincidentes: gradiente finito"""
        seed = np.array([[0.0, 0.0], [1.0, 0.0]])
        links = HandConstraint.length_preserve().bound_to(
            seed, np.array([[0, 1]]))
        p = ADValue.leaf(np.array([[0.5, 0.0], [0.5, 0.0]]))
        value = ops.reduce_sum(links.penalty(p, np.zeros(2, dtype=np.int64),
                                             1))
        (g,) = grad(value, [p])
        self.assertTrue(np.all(np.isfinite(g)))
        self.assertAlmostEqual(float(value.value), 1.0, places=5)

    def test_negative_weight_rejected(self):
        with self.assertRaises(ValueError):
            HandConstraint.wall_x(1.0, weight=-1.0)

    def test_parse_flags(self):
        wall = parse_hand_constraint("wall_x=2.0:side=right:w=10")
        self.assertEqual((wall.kind, wall.params["a"], wall.weight),
                         ("wall_x", 2.0, 10.0))
        floor = parse_hand_constraint("floor_y=0.5")
        self.assertEqual(floor.params["side"], "below")
        self.assertEqual(floor.weight, 1.0)
        disk = parse_hand_constraint("disk=2.5,1.0:r=0.5:w=3")
        self.assertEqual(disk.params["center"], (2.5, 1.0))
        self.assertEqual(disk.params["radius"], 0.5)
        links = parse_hand_constraint("length_preserve:w=5")
        self.assertEqual(links.weight, 5.0)

    def test_parse_rejects_bad_flags(self):
        for text in ("wall_x", "wall_x=2.0:side=below", "ceiling=1.0",
                     "wall_x=2.0:w=-1", "disk=1.0,2.0"):
            with self.subTest(text=text):
                with self.assertRaises(ValidationError):
                    parse_hand_constraint(text)
        with self.assertRaises(ValueError):
            parse_hand_constraint("wall_x=2.0:w")


class NoContextConstraintTest(SimpleTestCase):
    """f_C(Y) so enxerga as posicoes futuras implicadas por Y"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        rope = generate_rope(seed=3, n_traj=1, num_frames=8)[0]
        cls.window = rope.window(4)
        cls.target = cls.window.latest + 0.01

    def _value(self, spec, params, window):
        batch = prepare_batch(spec, [window])
        constraint, context = learned_constraint(spec, params, batch)
        with no_record():
            return float(constraint(context,
                                    self.target - window.latest).value[0])

    def test_depends_only_on_next_positions(self):
        rng = np.random.default_rng(0)
        moved = self.window.positions.copy()
        moved[-1] += rng.normal(scale=0.05, size=moved[-1].shape)
        other = ContextWindow(moved, self.window.statics, self.window.box)
        spec = _spec("cgns_gd_no_context")
        params = init_simulator_params(spec, seed=0)
        self.assertAlmostEqual(self._value(spec, params, self.window),
                               self._value(spec, params, other), delta=1e-12)

    def test_proposal_is_not_a_node_channel(self):
        spec = _spec("cgns_gd_no_context")
        batch = prepare_batch(spec, [self.window])
        self.assertEqual(batch.static_graph.node_features.shape[1],
                         spec.no_context_node_width())
        params = init_simulator_params(spec, seed=0)
        self.assertEqual(params["constraint/encoder/node/w0"].shape[0],
                         spec.no_context_node_width())


class ComposeConstraintsTest(SimpleTestCase):
    def setUp(self):
        self.latest = np.array([[2.0, 1.0], [0.0, 1.0]])
        self.segments = np.zeros(2, dtype=np.int64)

    def _learned(self, context, y):
        return ops.reshape(ops.reduce_mean(ops.square(y)), (1,))

    def _positions(self, y):
        return ops.add(self.latest, y)

    def test_empty_extras_is_identity(self):
        learned = self._learned
        self.assertIs(compose_constraints(learned, (), self._positions,
                                          self.segments, 1), learned)

    def test_wall_contribution(self):
        """peso * 0.5^2 somado a restricao aprendida"""
        wall = HandConstraint.wall_x(2.0, "right", weight=4.0)
        total = compose_constraints(self._learned, [wall], self._positions,
                                    self.segments, 1)
        y = np.array([[0.5, 0.0], [0.0, 0.0]])
        learned = self._learned(None, y).value[0]
        self.assertAlmostEqual(total(None, y).value[0],
                               learned + 4.0 * 0.25)

    def test_outside_regions_add_nothing(self):
        wall = HandConstraint.wall_x(5.0, weight=100.0)
        total = compose_constraints(self._learned, [wall], self._positions,
                                    self.segments, 1)
        y = np.array([[0.1, 0.0], [0.3, 0.0]])
        self.assertEqual(total(None, y).value[0],
                         self._learned(None, y).value[0])

    def test_constrained_rollout_stays_out_of_wall(self):
        rope = generate_rope(seed=2, n_traj=1, num_frames=12)[0]
        spec = _spec("cgns_gd", iterations=5, step_size=0.1)
        params = init_simulator_params(spec, seed=0)
        window = rope.window(3)
        plain = rollout(spec, params, window, steps=1)
        a = float(np.median(plain.positions[-1, :, 0]))
        wall = HandConstraint.wall_x(a, "right", weight=4.0)
        guarded = rollout(spec, params, window, steps=1, extras=[wall])
        self.assertLess(wall.depths(guarded.positions[-1]).max(),
                        wall.depths(plain.positions[-1]).max() + 1e-12)
