from pathlib import Path

import numpy as np

from evalcli.cli import SimulatorCommand, load_split
from evalcli.experiments import landscape
from evalcli.rendering import render_landscape
from train.losses import normalized_target
from train.loop import load_simulator


class Command(SimulatorCommand):
    help = ("Plot the learned constraint around one node's proposal with "
            "the solver iterates on top.")

    def add_arguments(self, parser):
        parser.add_argument("--ckpt", required=True)
        parser.add_argument("--data", required=True)
        parser.add_argument("--split", default="test")
        parser.add_argument("--traj-index", type=int, default=0)
        parser.add_argument("--frame", type=int)
        parser.add_argument("--node", type=int, required=True)
        parser.add_argument("--range", type=float, default=1.0,
                            dest="extent")
        parser.add_argument("--res", type=int, default=41)
        parser.add_argument("--out", default="landscape.png")

    def handle(self, *args, **options):
        if options["res"] < 1 or not options["extent"] > 0:
            self.usage_error("--res must be >= 1 and --range > 0")
        spec, params, _ = load_simulator(options["ckpt"])
        _, trajectories = load_split(options["data"], options["split"])
        index = options["traj_index"]
        if not 0 <= index < len(trajectories):
            self.usage_error(f"--traj-index {index} out of range")
        trajectory = trajectories[index]
        history = spec.features.history
        t = history if options["frame"] is None else options["frame"]
        if t not in trajectory.target_times(history):
            self.usage_error(f"--frame must lie in "
                             f"[{history}, {trajectory.num_frames - 2}]")
        if not 0 <= options["node"] < trajectory.num_nodes:
            self.usage_error(f"--node must lie in "
                             f"[0, {trajectory.num_nodes - 1}]")

        target = normalized_target(spec, trajectory, t)
        result = landscape(spec, params, trajectory.window(t, history),
                           options["node"], options["extent"],
                           options["res"], center=target[options["node"]])
        path = render_landscape(result, Path(options["out"]))
        self.emit({
            "variant": spec.variant, "trajectory": index, "frame": t,
            "node": options["node"], "image": str(path),
            "min": float(np.min(result.values)),
            "max": float(np.max(result.values)),
            "argmin": list(result.argmin),
            "solved": [float(v) for v in result.trace[-1]],
            "target": [float(v) for v in target[options["node"]]],
        })
