import numpy as np
from django.conf import settings

from data.generators import (generate_bouncing_balls, generate_rope,
                             generator_params)
from data.storage import write_dataset
from evalcli.cli import SimulatorCommand

DOMAIN_ALIASES = {"rope": "rope", "balls": "bouncing_balls",
                  "bouncing_balls": "bouncing_balls"}
SPLITS = ("train", "val", "test")


def split_seed(seed, split):
    """Independent generator seed per split of one dataset."""
    state = np.random.SeedSequence([int(seed), SPLITS.index(split)])
    return int(state.generate_state(1)[0])


class Command(SimulatorCommand):
    help = "Generate a rope or bouncing-balls dataset (train/val/test)."

    def add_arguments(self, parser):
        parser.add_argument("--domain", required=True,
                            choices=sorted(DOMAIN_ALIASES))
        parser.add_argument("--out", required=True)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--num-train", type=int)
        parser.add_argument("--num-val", type=int)
        parser.add_argument("--num-test", type=int)
        parser.add_argument("--gravity", choices=("on", "off"), default="on")
        parser.add_argument("--profile",
                            choices=sorted(settings.SIMULATOR_PROFILES))
        parser.add_argument("--name")

    def handle(self, *args, **options):
        domain = DOMAIN_ALIASES[options["domain"]]
        profile = options["profile"] or settings.CGNS_PROFILE
        counts = dict(settings.SIMULATOR_PROFILES[profile]["counts"])
        for split in SPLITS:
            value = options[f"num_{split}"]
            if value is not None:
                if value < 0:
                    self.usage_error(f"--num-{split} must be >= 0")
                counts[split] = value

        gravity = options["gravity"] == "on"
        seed = options["seed"]
        splits = {}
        for split in SPLITS:
            if counts[split] == 0:
                splits[split] = []
            elif domain == "rope":
                splits[split] = generate_rope(split_seed(seed, split),
                                              counts[split])
            else:
                splits[split] = generate_bouncing_balls(
                    split_seed(seed, split), counts[split],
                    gravity_on=gravity)

        params = generator_params(domain) if domain == "rope" \
            else generator_params(domain, gravity=gravity)
        manifest = write_dataset(
            splits, options["out"], options["name"] or domain, domain,
            params, seed, params["dt"] * params["substeps"])
        self.emit({"out": str(options["out"]), "domain": domain,
                   "counts": manifest.counts, "seed": seed})
