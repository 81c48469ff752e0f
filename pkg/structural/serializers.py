# structural/serializers.py
from rest_framework import serializers

from config.exceptions import ConfigurationError
from config.serializers import StrictSerializer
from economy.serializers import EconomyParamsSerializer
from structural.estimation import MIN_STARTS, ParamBox
from structural.moments import MomentVector
from structural.sweep import DEFAULT_BETA_L, DEFAULT_ETA_GRID, DEFAULT_EPS_GRID, DEFAULT_PHI1

DEFAULT_BOX = ParamBox()


def _pair(default):
    return serializers.ListField(
        child=serializers.FloatField(), min_length=2, max_length=2, default=lambda: list(default)
    )


class MomentVectorSerializer(StrictSerializer):
    beta_L = serializers.FloatField()
    beta_K = serializers.FloatField()
    beta_R = serializers.FloatField()
    vcov = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3),
        min_length=3,
        max_length=3,
    )

    def validate(self, attrs):
        try:
            MomentVector.from_dict(attrs)
        except ConfigurationError as exc:
            raise serializers.ValidationError({exc.key or "non_field_errors": [str(exc)]})
        return attrs


class ParamBoxSerializer(StrictSerializer):
    eps = _pair(DEFAULT_BOX.eps)
    eta = _pair(DEFAULT_BOX.eta)
    rho = _pair(DEFAULT_BOX.rho)

    def validate(self, attrs):
        try:
            ParamBox(**{k: tuple(v) for k, v in attrs.items()})
        except ConfigurationError as exc:
            raise serializers.ValidationError({(exc.key or "box").split(".")[-1]: [str(exc)]})
        return attrs


class TruthSerializer(StrictSerializer):
    eps = serializers.FloatField()
    eta = serializers.FloatField()
    rho = serializers.FloatField()


class CmdFitConfigSerializer(StrictSerializer):
    """
    Either empirical moments, or a truth to generate them from.

    With a truth, noise is the moment standard deviation as a fraction of
    each moment's magnitude; 0 means noiseless moments.
    """

    params = EconomyParamsSerializer(default=dict)
    moments = MomentVectorSerializer(required=False)
    truth = TruthSerializer(required=False)
    noise = serializers.FloatField(min_value=0.0, default=0.0)
    replications = serializers.IntegerField(min_value=1, default=1)
    phi1 = serializers.FloatField(default=DEFAULT_PHI1)
    phi2 = serializers.FloatField(default=0.0)
    box = ParamBoxSerializer(default=dict)
    starts = serializers.IntegerField(min_value=MIN_STARTS, default=MIN_STARTS)
    weight = serializers.ChoiceField(choices=(("inverse_vcov", "Inverse covariance"), ("identity", "Identity")), default="inverse_vcov")

    def validate(self, attrs):
        has_moments, has_truth = "moments" in attrs, "truth" in attrs
        if has_moments == has_truth:
            raise serializers.ValidationError({"moments": ["Provide exactly one of moments or truth."]})
        if has_moments and attrs["replications"] > 1:
            raise serializers.ValidationError({"replications": ["Replications need a truth to draw moments from."]})
        return attrs


class CmdSweepConfigSerializer(StrictSerializer):
    params = EconomyParamsSerializer(default=dict)
    beta_L = serializers.FloatField(default=DEFAULT_BETA_L)
    phi1 = serializers.FloatField(default=DEFAULT_PHI1)
    eps_grid = serializers.ListField(
        child=serializers.FloatField(), min_length=1, default=lambda: list(DEFAULT_EPS_GRID)
    )
    eta_grid = serializers.ListField(
        child=serializers.FloatField(), min_length=1, default=lambda: list(DEFAULT_ETA_GRID)
    )

    def validate_phi1(self, value):
        if value == 0:
            raise serializers.ValidationError("phi1 must be non-zero.")
        return value

    def validate_eps_grid(self, value):
        if any(v <= 0 for v in value):
            raise serializers.ValidationError("eps values must be positive.")
        return value

    def validate_eta_grid(self, value):
        if any(v <= 0 for v in value):
            raise serializers.ValidationError("eta values must be positive.")
        return value


class CmdResultSerializer(serializers.Serializer):
    eps_hat = serializers.FloatField(read_only=True)
    eta_hat = serializers.FloatField(read_only=True)
    rho_hat = serializers.FloatField(read_only=True)
    sigma_KL_hat = serializers.FloatField(read_only=True)
    objective_value = serializers.FloatField(read_only=True)
    converged = serializers.BooleanField(read_only=True)
    starts_tried = serializers.IntegerField(read_only=True)
    evaluations = serializers.IntegerField(read_only=True)
