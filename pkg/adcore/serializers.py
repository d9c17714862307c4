from rest_framework import serializers

CHECKPOINT_FORMAT = "cgns-ckpt-v1"


class DenseArraySerializer(serializers.Serializer):
    shape = serializers.ListField(child=serializers.IntegerField(min_value=0))
    data = serializers.ListField(child=serializers.FloatField())

    def validate(self, attrs):
        expected = 1
        for extent in attrs['shape']:
            expected *= extent
        if expected != len(attrs['data']):
            raise serializers.ValidationError(
                f"shape {attrs['shape']} needs {expected} values, "
                f"got {len(attrs['data'])}")
        return attrs


class CheckpointSerializer(serializers.Serializer):
    format = serializers.CharField()
    params = serializers.DictField(child=DenseArraySerializer())
    config = serializers.DictField()
    optimizer = serializers.DictField(required=False)

    def validate_format(self, value):
        if value != CHECKPOINT_FORMAT:
            raise serializers.ValidationError(
                f"unsupported checkpoint format {value!r}; "
                f"expected {CHECKPOINT_FORMAT!r}")
        return value
