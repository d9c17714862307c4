from dataclasses import dataclass, field

from django.conf import settings

from data.structures import NormStats
from graphs.structures import NODE_TYPES, UPDATE_MODES, FeatureConfig
from nets.configs import NetConfig
from solver.configs import SolverConfig

VARIANTS = (
    "cgns_gd",
    "cgns_fp",
    "forward",
    "iterative",
    "cgns_gd_no_context",
    "neural_projection",
    "cmlp_gd",
    "cmlp_fp",
)

# variants whose prediction is the minimiser of a constraint
CONSTRAINT_VARIANTS = ("cgns_gd", "cgns_fp", "cgns_gd_no_context",
                       "neural_projection", "cmlp_gd", "cmlp_fp")
FP_VARIANTS = ("cgns_fp", "cmlp_fp", "neural_projection")
MLP_VARIANTS = ("neural_projection", "cmlp_gd", "cmlp_fp")

DEFAULT_MAX_NODES = 10


@dataclass(frozen=True, eq=False)
class SimulatorSpec:
    domain: str
    variant: str
    update_mode: str = "velocity"
    net: NetConfig = field(default_factory=NetConfig)
    solver: SolverConfig | None = None
    features: FeatureConfig = field(default_factory=FeatureConfig)
    max_nodes: int = DEFAULT_MAX_NODES
    norm: NormStats | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; "
                             f"expected one of {VARIANTS}")
        if self.update_mode not in UPDATE_MODES:
            raise ValueError(f"unknown update mode {self.update_mode!r}")
        if self.variant == "forward":
            if self.solver is not None:
                raise ValueError("the forward variant takes no solver config")
        elif self.solver is None:
            raise ValueError(f"variant {self.variant!r} needs a solver config")
        if self.variant == "neural_projection":
            if self.update_mode != "position" or self.solver.method != "fp":
                raise ValueError("neural_projection runs fast projection on "
                                 "positions")
        elif self.update_mode == "position":
            raise ValueError("position updates are reserved for "
                             "neural_projection")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")

    @property
    def is_constraint(self):
        return self.variant in CONSTRAINT_VARIANTS

    @property
    def aggregation(self):
        """Squares for descent, raw sums for zero finding."""
        if self.solver is not None and self.solver.method == "fp":
            return "plain_sum"
        return "mean_of_squares"

    @property
    def iterations(self):
        return 0 if self.solver is None else self.solver.iterations

    def no_context_node_width(self):
        # statics and walls only; the proposal enters through edges
        width = len(NODE_TYPES)
        if self.features.use_radius:
            width += 1
        if self.features.wall_clip is not None:
            width += 2 * self.features.dim
        return width

    def with_iterations(self, iterations):
        if self.solver is None:
            return self
        return self._replace(solver=self.solver.with_iterations(iterations))

    def with_norm(self, norm):
        return self._replace(norm=norm)

    def _replace(self, **changes):
        values = {name: getattr(self, name) for name in (
            "domain", "variant", "update_mode", "net", "solver", "features",
            "max_nodes", "norm")}
        values.update(changes)
        return SimulatorSpec(**values)

    def as_dict(self):
        return {
            "domain": self.domain,
            "variant": self.variant,
            "update_mode": self.update_mode,
            "net": self.net.as_dict(),
            "solver": None if self.solver is None else self.solver.as_dict(),
            "features": {
                "connectivity": self.features.connectivity,
                "radius": self.features.radius,
                "wall_clip": self.features.wall_clip,
                "use_radius": self.features.use_radius,
                "history": self.features.history,
                "dim": self.features.dim,
            },
            "max_nodes": self.max_nodes,
            "norm": None if self.norm is None else self.norm.as_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        from sims.serializers import SimulatorSpecSerializer
        serializer = SimulatorSpecSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        values = dict(serializer.validated_data)
        solver = values.get("solver")
        norm = values.get("norm")
        return cls(
            domain=values["domain"],
            variant=values["variant"],
            update_mode=values.get("update_mode", "velocity"),
            net=NetConfig(**values.get("net", {})),
            solver=None if solver is None else SolverConfig(**solver),
            features=FeatureConfig(**values.get("features", {})),
            max_nodes=values.get("max_nodes", DEFAULT_MAX_NODES),
            norm=None if norm is None else NormStats(**norm),
        )


def build_spec(domain, variant, profile=None, update_mode="velocity",
               iterations=None, message_passing=None, step_size=None,
               net_overrides=None, norm=None, max_nodes=None):
    """
    Simulator spec from the named profile and the domain defaults in
    settings; keyword arguments override single values.
    """
    profile = profile or settings.CGNS_PROFILE
    try:
        profile_cfg = settings.SIMULATOR_PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}") from None
    try:
        domain_cfg = settings.DOMAIN_DEFAULTS[domain]
    except KeyError:
        raise ValueError(f"unknown domain {domain!r}") from None

    net_values = {
        **profile_cfg["net"],
        "num_message_passing": domain_cfg["num_message_passing"],
        **(net_overrides or {}),
    }
    if message_passing is not None:
        net_values["num_message_passing"] = int(message_passing)

    solver = None
    if variant != "forward":
        solver_values = {
            "method": "fp" if variant in FP_VARIANTS else "gd",
            "iterations": 5 if iterations is None else int(iterations),
        }
        if step_size is not None:
            solver_values["step_size"] = float(step_size)
        solver = SolverConfig(**solver_values)
    if variant == "neural_projection":
        update_mode = "position"

    features = FeatureConfig(
        connectivity=domain_cfg["connectivity"],
        wall_clip=domain_cfg["wall_clip"],
        use_radius=domain_cfg["use_radius"],
    )
    return SimulatorSpec(
        domain=domain, variant=variant, update_mode=update_mode,
        net=NetConfig(**net_values), solver=solver, features=features,
        max_nodes=DEFAULT_MAX_NODES if max_nodes is None else int(max_nodes),
        norm=norm,
    )
