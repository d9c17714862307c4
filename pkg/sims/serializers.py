from rest_framework import serializers

from data.serializers import NormStatsSerializer
from data.structures import DOMAINS
from graphs.services import CONNECTIVITY_KINDS
from graphs.structures import UPDATE_MODES
from nets.serializers import NetConfigSerializer
from sims.configs import VARIANTS
from sims.hand_constraints import HAND_CONSTRAINT_KINDS, SIDES
from solver.serializers import SolverConfigSerializer


class FeatureConfigSerializer(serializers.Serializer):
    connectivity = serializers.ChoiceField(choices=CONNECTIVITY_KINDS,
                                           required=False)
    radius = serializers.FloatField(min_value=0.0, allow_null=True,
                                    required=False)
    wall_clip = serializers.FloatField(min_value=0.0, allow_null=True,
                                       required=False)
    use_radius = serializers.BooleanField(required=False)
    history = serializers.IntegerField(min_value=1, required=False)
    dim = serializers.IntegerField(min_value=1, required=False)


class SimulatorSpecSerializer(serializers.Serializer):
    domain = serializers.ChoiceField(choices=DOMAINS)
    variant = serializers.ChoiceField(choices=VARIANTS)
    update_mode = serializers.ChoiceField(choices=UPDATE_MODES,
                                          required=False)
    net = NetConfigSerializer(required=False)
    solver = SolverConfigSerializer(allow_null=True, required=False)
    features = FeatureConfigSerializer(required=False)
    max_nodes = serializers.IntegerField(min_value=1, required=False)
    norm = NormStatsSerializer(allow_null=True, required=False)

    def validate(self, attrs):
        if attrs["variant"] == "forward" and attrs.get("solver"):
            raise serializers.ValidationError(
                {"solver": "the forward variant takes no solver config"})
        return attrs


class HandConstraintSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=HAND_CONSTRAINT_KINDS)
    weight = serializers.FloatField(min_value=0.0, required=False)
    a = serializers.FloatField(required=False)
    b = serializers.FloatField(required=False)
    side = serializers.ChoiceField(choices=SIDES, required=False)
    center = serializers.ListField(child=serializers.FloatField(),
                                   min_length=2, max_length=2,
                                   required=False)
    radius = serializers.FloatField(min_value=0.0, required=False)

    def validate(self, attrs):
        required = {"wall_x": ("a",), "floor_y": ("b",),
                    "disk": ("center", "radius"), "length_preserve": ()}
        missing = [name for name in required[attrs["kind"]]
                   if name not in attrs]
        if missing:
            raise serializers.ValidationError(
                f"{attrs['kind']} needs {', '.join(missing)}")
        side = attrs.get("side")
        allowed = {"wall_x": ("left", "right"), "floor_y": ("below", "above")}
        if side is not None and side not in allowed.get(attrs["kind"], ()):
            raise serializers.ValidationError(
                {"side": f"side {side!r} does not apply to {attrs['kind']}"})
        return attrs
