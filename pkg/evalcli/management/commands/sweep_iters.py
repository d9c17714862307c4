from pathlib import Path

from evalcli.cli import SimulatorCommand, load_split
from evalcli.experiments import generalization_split, iteration_sweep
from evalcli.rendering import render_curves
from train.loop import load_simulator


class Command(SimulatorCommand):
    help = ("Evaluate a checkpoint at several test-time iteration counts; "
            "optionally on longer generated ropes too.")

    def add_arguments(self, parser):
        parser.add_argument("--ckpt", required=True)
        parser.add_argument("--data")
        parser.add_argument("--split", default="test")
        parser.add_argument("--n-test-list", type=int, nargs="+",
                            default=list(range(0, 16)))
        parser.add_argument("--generalization-nodes", type=int)
        parser.add_argument("--generalization-count", type=int, default=10)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out")

    def handle(self, *args, **options):
        if not options["data"] and not options["generalization_nodes"]:
            self.usage_error("sweep-iters needs --data or "
                             "--generalization-nodes")
        spec, params, _ = load_simulator(options["ckpt"])

        sweeps = {}
        if options["data"]:
            _, trajectories = load_split(options["data"], options["split"])
            sweeps[options["split"]] = iteration_sweep(
                spec, params, trajectories, options["n_test_list"])
        if options["generalization_nodes"]:
            nodes = options["generalization_nodes"]
            ropes = generalization_split(nodes,
                                         options["generalization_count"],
                                         options["seed"])
            sweeps[f"ropes_{nodes}"] = iteration_sweep(
                spec, params, ropes, options["n_test_list"])

        document = {"variant": spec.variant, "checkpoint": options["ckpt"],
                    "sweeps": {}}
        for name, frame in sweeps.items():
            document["sweeps"][name] = {
                str(n): {k: float(v) for k, v in row.items()}
                for n, row in frame.iterrows()}
            if options["out"]:
                out = Path(options["out"])
                out.mkdir(parents=True, exist_ok=True)
                frame.to_csv(out / f"sweep_{name}.csv")
                render_curves(frame, out / f"sweep_{name}.svg")
        self.emit(document, Path(options["out"]) / "sweep.json"
                  if options["out"] else None)
