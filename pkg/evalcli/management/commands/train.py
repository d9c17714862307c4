from django.conf import settings
from rest_framework.exceptions import ValidationError

from data.normalization import compute_norm_stats
from data.storage import load_manifest, read_dataset
from evalcli.cli import SimulatorCommand, read_json_document
from sims.configs import VARIANTS, build_spec
from train.configs import LossConfig, OptimConfig
from train.loop import train_loop
from train.serializers import TrainConfigSerializer


class Command(SimulatorCommand):
    help = "Train a simulator variant on a stored dataset."

    def add_arguments(self, parser):
        parser.add_argument("--data", required=True)
        parser.add_argument("--variant", required=True, choices=VARIANTS)
        parser.add_argument("--out", required=True)
        parser.add_argument("--config")
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--profile",
                            choices=sorted(settings.SIMULATOR_PROFILES))
        parser.add_argument("--iterations", type=int)
        parser.add_argument("--message-passing", type=int)
        parser.add_argument("--steps", type=int)
        parser.add_argument("--update-mode",
                            choices=("velocity", "acceleration"))
        parser.add_argument("--per-iteration", action="store_true")
        parser.add_argument("--alpha", type=float)
        parser.add_argument("--resume")

    def load_config(self, path):
        if not path:
            return {}
        serializer = TrainConfigSerializer(data=read_json_document(path))
        serializer.is_valid(raise_exception=True)
        return serializer.validated_data

    def handle(self, *args, **options):
        config = self.load_config(options["config"])
        profile = options["profile"] or settings.CGNS_PROFILE
        manifest = load_manifest(options["data"])
        train = read_dataset(options["data"], "train")
        val = read_dataset(options["data"], "val") \
            if "val" in manifest.splits else []

        solver = dict(config.get("solver", {}))
        iterations = options["iterations"]
        if iterations is None:
            iterations = solver.get("iterations")
        try:
            spec = build_spec(
                manifest.domain, options["variant"], profile=profile,
                update_mode=(options["update_mode"]
                             or config.get("update_mode", "velocity")),
                iterations=iterations,
                message_passing=options["message_passing"],
                step_size=solver.get("step_size"),
                net_overrides=config.get("net"))
        except TypeError as exc:
            raise ValidationError({"net": [str(exc)]}) from None
        spec = spec.with_norm(compute_norm_stats(train, manifest.domain,
                                                 spec.update_mode))

        optim = {**config.get("optim", {}), "seed": options["seed"]}
        if options["steps"] is not None:
            optim["total_steps"] = options["steps"]
        opt_cfg = OptimConfig.from_profile(profile, **optim)
        loss = dict(config.get("loss", {}))
        if options["per_iteration"]:
            loss["per_iteration"] = True
        if options["alpha"] is not None:
            loss["alpha"] = options["alpha"]
        loss_cfg = LossConfig(**loss)

        result = train_loop(spec, train, val, opt_cfg, loss_cfg,
                            options["out"], seed=options["seed"],
                            resume=options["resume"])
        self.emit({
            "variant": spec.variant,
            "best_checkpoint": str(result.best_checkpoint),
            "latest_checkpoint": str(result.latest_checkpoint),
            "metrics_log": str(result.metrics_log),
            "steps": len(result.history),
            "final_train_loss": result.history[-1] if result.history
            else None,
        })
