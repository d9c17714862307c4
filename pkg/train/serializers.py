from rest_framework import serializers

from sims.serializers import SimulatorSpecSerializer


class LossConfigSerializer(serializers.Serializer):
    per_iteration = serializers.BooleanField(required=False)
    alpha = serializers.FloatField(required=False)

    def validate_alpha(self, value):
        if not 0.0 < value <= 1.0:
            raise serializers.ValidationError("alpha must be in (0, 1]")
        return value


class OptimConfigSerializer(serializers.Serializer):
    learning_rate = serializers.FloatField(required=False)
    decay_factor = serializers.FloatField(min_value=0.0, required=False)
    decay_steps = serializers.ListField(
        child=serializers.IntegerField(min_value=0), required=False)
    batch_size = serializers.IntegerField(min_value=1, required=False)
    total_steps = serializers.IntegerField(min_value=0, required=False)
    validate_every = serializers.IntegerField(min_value=1, required=False)
    beta1 = serializers.FloatField(min_value=0.0, max_value=1.0,
                                   required=False)
    beta2 = serializers.FloatField(min_value=0.0, max_value=1.0,
                                   required=False)
    eps = serializers.FloatField(min_value=0.0, required=False)
    seed = serializers.IntegerField(required=False)

    def validate_learning_rate(self, value):
        if not value > 0:
            raise serializers.ValidationError("learning rate must be > 0")
        return value

    def validate_decay_steps(self, value):
        if any(b <= a for a, b in zip(value, value[1:])):
            raise serializers.ValidationError(
                "decay steps must be strictly increasing")
        return value


class TrainConfigSerializer(serializers.Serializer):
    """The `train --config FILE` document; every section is optional."""
    optim = OptimConfigSerializer(required=False)
    loss = LossConfigSerializer(required=False)
    net = serializers.DictField(required=False)
    solver = serializers.DictField(required=False)
    update_mode = serializers.ChoiceField(
        choices=("velocity", "acceleration", "position"), required=False)


class CheckpointConfigSerializer(serializers.Serializer):
    """`config` member of a simulator checkpoint."""
    spec = SimulatorSpecSerializer()
    step = serializers.IntegerField(min_value=0)
    seed = serializers.IntegerField(required=False)
    optim = serializers.DictField(required=False)
    loss = serializers.DictField(required=False)
    val_1step_mse = serializers.FloatField(allow_null=True, required=False)
