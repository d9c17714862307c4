from dataclasses import asdict, dataclass, field

from django.conf import settings


@dataclass(frozen=True)
class LossConfig:
    per_iteration: bool = False
    alpha: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        from train.serializers import LossConfigSerializer
        serializer = LossConfigSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        return cls(**serializer.validated_data)


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 1e-4
    decay_factor: float = 0.7
    decay_steps: tuple = (5_000, 10_000, 20_000, 40_000)
    batch_size: int = 16
    total_steps: int = 50_000
    validate_every: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "decay_steps",
                           tuple(int(s) for s in self.decay_steps))
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if any(b <= a for a, b in zip(self.decay_steps,
                                      self.decay_steps[1:])):
            raise ValueError("decay_steps must be strictly increasing")
        if self.batch_size < 1 or self.validate_every < 1:
            raise ValueError("batch_size and validate_every must be >= 1")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")

    def learning_rate_at(self, step):
        """Base rate times decay_factor per threshold already reached."""
        passed = sum(1 for threshold in self.decay_steps if step >= threshold)
        return self.learning_rate * self.decay_factor ** passed

    def as_dict(self):
        data = asdict(self)
        data["decay_steps"] = list(self.decay_steps)
        return data

    @classmethod
    def from_dict(cls, data):
        from train.serializers import OptimConfigSerializer
        serializer = OptimConfigSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        return cls(**serializer.validated_data)

    @classmethod
    def from_profile(cls, profile=None, **overrides):
        profile = profile or settings.CGNS_PROFILE
        try:
            values = dict(settings.SIMULATOR_PROFILES[profile]["optim"])
        except KeyError:
            raise ValueError(f"unknown profile {profile!r}") from None
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class TrainResult:
    best_checkpoint: object
    latest_checkpoint: object
    metrics_log: object
    history: list = field(default_factory=list)
