import numpy as np
from rest_framework import serializers

from data.structures import DOMAINS

DATASET_FORMAT = "cgns-data-v1"


class NormStatsSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(
        choices=("identity", "scale", "standardize"), required=False)
    input_mean = serializers.ListField(child=serializers.FloatField(),
                                       min_length=1)
    input_std = serializers.ListField(child=serializers.FloatField(),
                                      min_length=1)
    target_mean = serializers.ListField(child=serializers.FloatField(),
                                        min_length=1)
    target_std = serializers.ListField(child=serializers.FloatField(),
                                       min_length=1)

    def validate(self, attrs):
        widths = {len(attrs[name]) for name in
                  ("input_mean", "input_std", "target_mean", "target_std")}
        if len(widths) != 1:
            raise serializers.ValidationError(
                "normalisation channels must share one width")
        return attrs


class ManifestSerializer(serializers.Serializer):
    format = serializers.CharField()
    name = serializers.CharField()
    domain = serializers.ChoiceField(choices=DOMAINS)
    dt_record = serializers.FloatField(min_value=0.0)
    counts = serializers.DictField(
        child=serializers.IntegerField(min_value=0), allow_empty=False)
    generator = serializers.DictField()
    seed = serializers.IntegerField()

    def validate_format(self, value):
        if value != DATASET_FORMAT:
            raise serializers.ValidationError(
                f"unsupported dataset format {value!r}; "
                f"expected {DATASET_FORMAT!r}")
        return value


class StaticsSerializer(serializers.Serializer):
    node_type = serializers.ListField(
        child=serializers.IntegerField(min_value=0, max_value=1),
        min_length=1)
    radius = serializers.ListField(child=serializers.FloatField(min_value=0),
                                   required=False)
    rest_length = serializers.FloatField(required=False)

    def validate(self, attrs):
        radius = attrs.get("radius")
        if radius is not None and len(radius) != len(attrs["node_type"]):
            raise serializers.ValidationError(
                "radius needs one entry per node")
        return attrs


class TrajectoryRecordSerializer(serializers.Serializer):
    statics = StaticsSerializer()
    # validated as one array in validate_positions
    positions = serializers.ListField(min_length=1)

    def validate_positions(self, value):
        try:
            array = np.asarray(value, dtype=np.float64)
        except (TypeError, ValueError):
            raise serializers.ValidationError(
                "positions must be a rectangular T x J x D array") from None
        if array.ndim != 3 or 0 in array.shape:
            raise serializers.ValidationError(
                f"positions must be T x J x D, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise serializers.ValidationError("positions must be finite")
        return array

    def validate(self, attrs):
        num_nodes = len(attrs["statics"]["node_type"])
        if attrs["positions"].shape[1] != num_nodes:
            raise serializers.ValidationError(
                f"frames have {attrs['positions'].shape[1]} nodes, statics "
                f"list {num_nodes}")
        return attrs
