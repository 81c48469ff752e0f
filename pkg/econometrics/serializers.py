# econometrics/serializers.py
from rest_framework import serializers

from config.serializers import StrictSerializer
from econometrics.event_study import ENDPOINTS, LEVELS
from econometrics.matching import MATCH_VARIABLES, PLACEBO_SHARE
from econometrics.specs import EVENT_WINDOW, REFERENCE_PERIOD


class EstimateConfigSerializer(StrictSerializer):
    """Keys shared by every estimate action; input may also come from --input."""

    input = serializers.CharField(required=False)
    level = serializers.ChoiceField(choices=sorted(LEVELS), default="firm")
    subsample = serializers.DictField(child=serializers.JSONField(), default=dict)


class FirmLevelMixin:
    def validate_level(self, value):
        if value != "firm":
            raise serializers.ValidationError("Only the firm panel is supported here.")
        return value


class DidConfigSerializer(EstimateConfigSerializer):
    outcomes = serializers.ListField(child=serializers.CharField(), required=False, min_length=1)
    labor_cost = serializers.BooleanField(default=True)


class EventStudyConfigSerializer(EstimateConfigSerializer):
    outcome = serializers.CharField(required=False)
    window = serializers.ListField(
        child=serializers.IntegerField(), min_length=2, max_length=2, default=lambda: list(EVENT_WINDOW)
    )
    endpoints = serializers.ChoiceField(choices=ENDPOINTS, default="trim")

    def validate_window(self, value):
        lo, hi = value
        if not lo < REFERENCE_PERIOD < hi:
            raise serializers.ValidationError(f"Window must contain k = {REFERENCE_PERIOD} strictly inside it.")
        return value


class MatchDidConfigSerializer(FirmLevelMixin, EstimateConfigSerializer):
    outcome = serializers.CharField(default="log_employment")
    variables = serializers.ListField(
        child=serializers.CharField(), min_length=1, default=lambda: list(MATCH_VARIABLES)
    )
    placebo = serializers.BooleanField(default=False)
    placebo_share = serializers.FloatField(default=PLACEBO_SHARE, min_value=0.0, max_value=1.0)


class BalanceConfigSerializer(FirmLevelMixin, EstimateConfigSerializer):
    covariates = serializers.ListField(
        child=serializers.CharField(), min_length=1, default=lambda: list(MATCH_VARIABLES)
    )
