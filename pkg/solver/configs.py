from dataclasses import asdict, dataclass

SOLVER_METHODS = ("gd", "fp")

# below this squared gradient norm a fast-projection step is not taken
FP_MIN_NORM_SQ = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    method: str = "gd"
    step_size: float = 0.001
    iterations: int = 5
    record_trace: bool = False

    def __post_init__(self):
        if self.method not in SOLVER_METHODS:
            raise ValueError(f"unknown solver method {self.method!r}")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")

    def with_iterations(self, iterations):
        return SolverConfig(self.method, self.step_size, int(iterations),
                            self.record_trace)

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        from solver.serializers import SolverConfigSerializer
        serializer = SolverConfigSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        return cls(**serializer.validated_data)
