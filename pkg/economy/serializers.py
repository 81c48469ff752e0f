# economy/serializers.py
from rest_framework import serializers

from config.exceptions import ConfigurationError
from config.serializers import StrictSerializer
from economy.elasticities import FD_STEP, METHOD_CHOICES, NUMERIC
from economy.params import MARKET_MODE_CHOICES, EconomyParams

DEFAULTS = EconomyParams()

REVENUE_SOURCE_CHOICES = (
    ("mixed", "Solver zeta, closed-form nu and xi"),
    ("numeric", "All from the solver"),
)


class EconomyParamsSerializer(StrictSerializer):
    s_L = serializers.FloatField(default=DEFAULTS.s_L)
    s_K = serializers.FloatField(default=DEFAULTS.s_K)
    rho = serializers.FloatField(default=DEFAULTS.rho)
    eps = serializers.FloatField(default=DEFAULTS.eps)
    eta = serializers.FloatField(default=DEFAULTS.eta)
    tau_rev = serializers.FloatField(default=DEFAULTS.tau_rev)
    theta = serializers.FloatField(default=DEFAULTS.theta)
    m = serializers.FloatField(default=DEFAULTS.m)
    w0 = serializers.FloatField(default=DEFAULTS.w0)
    r = serializers.FloatField(default=DEFAULTS.r)
    A = serializers.FloatField(default=DEFAULTS.A)
    market_mode = serializers.ChoiceField(choices=MARKET_MODE_CHOICES, default=DEFAULTS.market_mode)
    price = serializers.FloatField(required=False, allow_null=True, default=None)
    theta_control = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate(self, attrs):
        try:
            EconomyParams(**attrs)
        except ConfigurationError as exc:
            raise serializers.ValidationError({exc.key or "non_field_errors": [str(exc)]})
        return attrs

    def to_representation(self, instance):
        if isinstance(instance, EconomyParams):
            return instance.to_dict()
        return super().to_representation(instance)


def params_from(validated):
    return EconomyParams(**validated)


class FirmEquilibriumSerializer(serializers.Serializer):
    L = serializers.FloatField(read_only=True)
    K = serializers.FloatField(read_only=True)
    Q = serializers.FloatField(read_only=True)
    w = serializers.FloatField(read_only=True)
    p = serializers.FloatField(read_only=True)
    marginal_cost = serializers.FloatField(read_only=True)
    revenue = serializers.FloatField(read_only=True)
    profit = serializers.FloatField(read_only=True)
    cost = serializers.FloatField(read_only=True)
    labor_cost_share = serializers.FloatField(read_only=True)
    capital_cost_share = serializers.FloatField(read_only=True)
    markdown = serializers.FloatField(read_only=True)
    wage_bill = serializers.FloatField(read_only=True)
    theta = serializers.FloatField(read_only=True)
    tau_rev = serializers.FloatField(read_only=True)

    def to_representation(self, instance):
        data = super().to_representation(instance)
        data["lambda"] = data.pop("marginal_cost")
        return data


class IndustryEquilibriumSerializer(serializers.Serializer):
    treated = FirmEquilibriumSerializer(read_only=True)
    control = FirmEquilibriumSerializer(read_only=True)
    aggregate_Q = serializers.FloatField(read_only=True)
    p_index = serializers.FloatField(read_only=True)
    m = serializers.FloatField(read_only=True)
    iterations = serializers.IntegerField(read_only=True)
    foc_residual = serializers.FloatField(read_only=True)


class ElasticityReportSerializer(serializers.Serializer):
    method = serializers.CharField(read_only=True)
    params_snapshot = EconomyParamsSerializer(read_only=True)
    eps_L_theta = serializers.FloatField(read_only=True, allow_null=True)
    eps_K_theta = serializers.FloatField(read_only=True, allow_null=True)
    eps_R_theta = serializers.FloatField(read_only=True, allow_null=True)
    eps_lambda_theta = serializers.FloatField(read_only=True, allow_null=True)
    eps_Q_theta = serializers.FloatField(read_only=True, allow_null=True)
    eps_lambda_Q = serializers.FloatField(read_only=True, allow_null=True)
    nu = serializers.FloatField(read_only=True, allow_null=True)
    xi = serializers.FloatField(read_only=True, allow_null=True)
    zeta = serializers.FloatField(read_only=True, allow_null=True)
    eps_L_theta_inf = serializers.FloatField(read_only=True, allow_null=True)
    eps_K_theta_inf = serializers.FloatField(read_only=True, allow_null=True)
    labor_cost_share = serializers.FloatField(read_only=True, allow_null=True)


class ReformEffectSerializer(serializers.Serializer):
    beta_L = serializers.FloatField(read_only=True)
    beta_K = serializers.FloatField(read_only=True)
    beta_R = serializers.FloatField(read_only=True)
    phi1 = serializers.FloatField(read_only=True)
    phi2 = serializers.FloatField(read_only=True)
    payroll = serializers.DictField(child=serializers.FloatField(), read_only=True)
    revenue_tax = serializers.DictField(child=serializers.FloatField(), read_only=True)


class SolveConfigSerializer(StrictSerializer):
    params = EconomyParamsSerializer(default=dict)
    industry = serializers.BooleanField(default=False)


class ElasticityConfigSerializer(StrictSerializer):
    params = EconomyParamsSerializer(default=dict)
    method = serializers.ChoiceField(choices=METHOD_CHOICES, default=NUMERIC)
    step = serializers.FloatField(default=FD_STEP)
    richardson = serializers.BooleanField(default=False)
    phi1 = serializers.FloatField(default=-0.133)
    phi2 = serializers.FloatField(default=0.0)
    source = serializers.ChoiceField(choices=REVENUE_SOURCE_CHOICES, default="mixed")
    # one row per point; each entry overrides fields of params
    grid = serializers.ListField(child=serializers.DictField(), required=False, default=list)
    random_points = serializers.IntegerField(min_value=0, default=0)

    def validate_step(self, value):
        if value <= 0:
            raise serializers.ValidationError("Finite-difference step must be positive.")
        return value


class LimitsConfigSerializer(StrictSerializer):
    params = EconomyParamsSerializer(default=dict)
    eps = serializers.FloatField(default=1e5)
    rho_grid = serializers.ListField(child=serializers.FloatField(max_value=0.999), default=lambda: [-1.0, 0.0, 0.5])
    eta_grid = serializers.ListField(child=serializers.FloatField(min_value=0.0), default=lambda: [1.5, 3.0])

    def validate_eps(self, value):
        if value <= 0:
            raise serializers.ValidationError("eps must be positive.")
        return value
