from evalcli.analytics import SeedAnalytics
from evalcli.cli import SimulatorCommand, load_split
from evalcli.metrics import evaluate
from sims.configs import build_spec
from sims.simulator import constant_velocity
from train.loop import load_simulator

BASELINES = ("constant_velocity",)


def baseline_runs(domain, trajectories):
    spec = build_spec(domain, "forward")
    metrics = evaluate(spec, None, trajectories,
                       predictor=constant_velocity(spec))
    return spec, [{"seed": 0, "checkpoint": None, "metrics": metrics}]


def checkpoint_runs(paths, trajectories, n_test):
    runs, first = [], None
    for path in paths:
        spec, params, checkpoint = load_simulator(path)
        first = first or spec
        if spec.variant != first.variant:
            raise ValueError(f"{path} holds {spec.variant}, expected "
                             f"{first.variant}")
        metrics = evaluate(spec, params, trajectories, iterations=n_test)
        runs.append({"seed": int(checkpoint.config.get("seed", len(runs))),
                     "checkpoint": str(path), "metrics": metrics})
    return first, runs


class Command(SimulatorCommand):
    help = ("Evaluate checkpoints (median over seeds) or a baseline on a "
            "dataset split.")

    def add_arguments(self, parser):
        parser.add_argument("--ckpt", action="append", default=[])
        parser.add_argument("--baseline", choices=BASELINES)
        parser.add_argument("--data", required=True)
        parser.add_argument("--split", default="test")
        parser.add_argument("--n-test", type=int)
        parser.add_argument("--report")

    def handle(self, *args, **options):
        if not options["ckpt"] and not options["baseline"]:
            self.usage_error("eval needs --ckpt FILE (repeatable) or "
                             "--baseline constant_velocity")
        if options["ckpt"] and options["baseline"]:
            self.usage_error("--ckpt and --baseline are exclusive")
        if options["n_test"] is not None and options["n_test"] < 0:
            self.usage_error("--n-test must be >= 0")

        manifest, trajectories = load_split(options["data"],
                                            options["split"])
        if options["baseline"]:
            spec, runs = baseline_runs(manifest.domain, trajectories)
            variant = options["baseline"]
        else:
            spec, runs = checkpoint_runs(options["ckpt"], trajectories,
                                         options["n_test"])
            variant = spec.variant

        report = SeedAnalytics(runs).report(
            variant, options["split"], n_test=options["n_test"],
            config={"data": str(options["data"]),
                    "domain": manifest.domain,
                    "spec": spec.as_dict()})
        self.emit(report.as_dict(), options["report"])
