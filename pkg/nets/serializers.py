from rest_framework import serializers

from nets.configs import ACTIVATIONS


class NetConfigSerializer(serializers.Serializer):
    latent_size = serializers.IntegerField(min_value=1, required=False)
    mlp_hidden_layers = serializers.IntegerField(min_value=0, required=False)
    mlp_hidden_units = serializers.IntegerField(min_value=1, required=False)
    num_message_passing = serializers.IntegerField(min_value=0,
                                                   required=False)
    activation = serializers.ChoiceField(choices=ACTIVATIONS, required=False)
    use_layer_norm = serializers.BooleanField(required=False)
    mlp_constraint_layers = serializers.IntegerField(min_value=0,
                                                     required=False)
    mlp_constraint_units = serializers.IntegerField(min_value=1,
                                                    required=False)
