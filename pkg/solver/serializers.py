from rest_framework import serializers

from solver.configs import SOLVER_METHODS


class SolverConfigSerializer(serializers.Serializer):
    method = serializers.ChoiceField(choices=SOLVER_METHODS, required=False)
    step_size = serializers.FloatField(required=False)
    iterations = serializers.IntegerField(min_value=0, required=False)
    record_trace = serializers.BooleanField(required=False)

    def validate_step_size(self, value):
        if not value > 0:
            raise serializers.ValidationError("step size must be positive")
        return value
