from dataclasses import asdict, dataclass

ACTIVATIONS = ("softplus", "tanh")
AGGREGATIONS = ("mean_of_squares", "plain_sum")


@dataclass(frozen=True)
class NetConfig:
    latent_size: int = 32
    mlp_hidden_layers: int = 3
    mlp_hidden_units: int = 256
    num_message_passing: int = 2
    activation: str = "softplus"
    use_layer_norm: bool = True
    # MLP-over-concatenation constraint
    mlp_constraint_layers: int = 5
    mlp_constraint_units: int = 256

    def __post_init__(self):
        for name in ("latent_size", "mlp_hidden_units",
                     "mlp_constraint_units"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mlp_hidden_layers < 0 or self.mlp_constraint_layers < 0:
            raise ValueError("hidden layer counts must be >= 0")
        if self.num_message_passing < 0:
            raise ValueError("num_message_passing must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def hidden_sizes(self):
        return [self.mlp_hidden_units] * self.mlp_hidden_layers

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        from nets.serializers import NetConfigSerializer
        serializer = NetConfigSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        return cls(**serializer.validated_data)
