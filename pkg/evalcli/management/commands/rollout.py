from pathlib import Path

import numpy as np
from rest_framework.exceptions import ValidationError

from data.structures import Trajectory
from evalcli.cli import SimulatorCommand, load_split
from evalcli.experiments import constrained_rollout, depth_reduction
from evalcli.rendering import render_trajectory
from sims.hand_constraints import parse_hand_constraint
from train.loop import load_simulator


class Command(SimulatorCommand):
    help = ("Roll out one trajectory, optionally under hand-designed "
            "constraints, and render it next to the ground truth.")

    def add_arguments(self, parser):
        parser.add_argument("--ckpt", required=True)
        parser.add_argument("--data", required=True)
        parser.add_argument("--split", default="test")
        parser.add_argument("--traj-index", type=int, default=0)
        parser.add_argument("--steps", type=int)
        parser.add_argument("--n-test", type=int)
        parser.add_argument("--constraint", action="append", default=[],
                            help="e.g. wall_x=2.0:w=10 (repeatable)")
        parser.add_argument("--render")
        parser.add_argument("--report")

    def handle(self, *args, **options):
        spec, params, _ = load_simulator(options["ckpt"])
        _, trajectories = load_split(options["data"], options["split"])
        index = options["traj_index"]
        if not 0 <= index < len(trajectories):
            self.usage_error(f"--traj-index {index} out of range for "
                             f"{len(trajectories)} trajectories")
        extras = []
        for text in options["constraint"]:
            try:
                extras.append(parse_hand_constraint(text))
            except (ValueError, ValidationError) as exc:
                detail = getattr(exc, "detail", exc)
                self.usage_error(f"invalid --constraint {text!r}: {detail}")

        truth = trajectories[index]
        history = spec.features.history
        available = truth.num_frames - 1 - history
        steps = available if options["steps"] is None else options["steps"]
        if steps < 1:
            self.usage_error("--steps must be >= 1")
        window = truth.window(history, history)

        run = constrained_rollout(spec, params, window, extras, steps,
                                  iterations=options["n_test"])
        document = {"variant": spec.variant, "trajectory": index,
                    "steps": steps, "constraints": options["constraint"],
                    **run.as_dict()}

        compared = min(steps, available)
        if compared > 0:
            predicted = run.trajectory.positions[history + 1:
                                                 history + 1 + compared]
            expected = truth.positions[history + 1:history + 1 + compared]
            free = ~truth.statics.fixed_mask
            document["position_mse"] = float(np.mean(
                (predicted[:, free] - expected[:, free]) ** 2))

        if extras:
            reference = constrained_rollout(spec, params, window, [], steps,
                                            iterations=options["n_test"],
                                            report_extras=extras)
            document["unconstrained"] = reference.as_dict()
            document["depth_reduction"] = depth_reduction(run, reference)

        if options["render"]:
            out = Path(options["render"])
            connectivity = spec.features.connectivity
            shown = Trajectory(truth.positions[:history + 1 + compared],
                               truth.statics, truth.box)
            render_trajectory(shown, out, "gt", connectivity)
            render_trajectory(run.trajectory, out, "pred", connectivity)
            document["render"] = str(out)
        self.emit(document, options["report"])
