from rest_framework import serializers

from sims.configs import VARIANTS


class SeedMetricsSerializer(serializers.Serializer):
    seed = serializers.IntegerField()
    checkpoint = serializers.CharField(allow_null=True, required=False)
    metrics = serializers.DictField(child=serializers.FloatField(
        allow_null=True))


class EvalReportSerializer(serializers.Serializer):
    variant = serializers.CharField()
    checkpoint = serializers.JSONField(required=False, allow_null=True)
    split = serializers.CharField()
    n_test = serializers.IntegerField(min_value=0, allow_null=True,
                                      required=False)
    metrics = serializers.DictField(child=serializers.FloatField(
        allow_null=True))
    per_trajectory = serializers.ListField(child=serializers.DictField(),
                                           required=False)
    seeds = SeedMetricsSerializer(many=True, required=False)
    config = serializers.DictField(required=False)

    def validate_variant(self, value):
        if value not in VARIANTS + ("constant_velocity",):
            raise serializers.ValidationError(f"unknown variant {value!r}")
        return value

    def validate(self, attrs):
        attrs["seeds"] = [dict(seed) for seed in attrs.get("seeds", [])]
        return attrs
