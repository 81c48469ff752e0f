# panels/serializers.py
from rest_framework import serializers

from config.exceptions import ConfigurationError
from config.serializers import StrictSerializer
from panels.firms import AR1, IID, SIZE_CLASSES, FirmPanelConfig
from panels.sectors import SectorTreeConfig
from panels.workers import WorkerPanelConfig

SECTORS = SectorTreeConfig()
FIRMS = FirmPanelConfig()
WORKERS = WorkerPanelConfig()


class GeneratorConfigSerializer(StrictSerializer):
    """Validates by building config_class from the fields."""

    config_class = None

    def validate(self, attrs):
        try:
            self.config_class(**attrs)
        except ConfigurationError as exc:
            raise serializers.ValidationError({exc.key or "non_field_errors": [str(exc)]})
        return attrs


class SectorTreeConfigSerializer(GeneratorConfigSerializer):
    config_class = SectorTreeConfig

    sectors_1d = serializers.IntegerField(default=SECTORS.sectors_1d)
    sectors_5d = serializers.IntegerField(default=SECTORS.sectors_5d)
    sectors_7d = serializers.IntegerField(default=SECTORS.sectors_7d)
    states = serializers.IntegerField(default=SECTORS.states)
    eligible_share = serializers.FloatField(default=SECTORS.eligible_share)
    cohort_years = serializers.ListField(child=serializers.IntegerField(), default=lambda: list(SECTORS.cohort_years))
    confounding = serializers.BooleanField(default=SECTORS.confounding)
    trend_shift = serializers.FloatField(default=SECTORS.trend_shift)


class FirmPanelConfigSerializer(GeneratorConfigSerializer):
    config_class = FirmPanelConfig

    n_firms = serializers.IntegerField(default=FIRMS.n_firms)
    first_year = serializers.IntegerField(default=FIRMS.first_year)
    last_year = serializers.IntegerField(default=FIRMS.last_year)
    size_mu = serializers.FloatField(default=FIRMS.size_mu)
    size_sigma = serializers.FloatField(default=FIRMS.size_sigma)
    att_employment = serializers.FloatField(default=FIRMS.att_employment)
    att_by_size = serializers.DictField(child=serializers.FloatField(), default=dict)
    att_wage = serializers.FloatField(default=FIRMS.att_wage)
    p_take = serializers.FloatField(default=FIRMS.p_take)
    p_ncm = serializers.FloatField(default=FIRMS.p_ncm)
    error = serializers.ChoiceField(choices=((IID, "iid"), (AR1, "AR(1)")), default=FIRMS.error)
    serial_corr_rho = serializers.FloatField(default=FIRMS.serial_corr_rho)
    error_sd = serializers.FloatField(default=FIRMS.error_sd)
    year_sd = serializers.FloatField(default=FIRMS.year_sd)
    sector_year_sd = serializers.FloatField(default=FIRMS.sector_year_sd)
    wage_sd = serializers.FloatField(default=FIRMS.wage_sd)
    wage_error_sd = serializers.FloatField(default=FIRMS.wage_error_sd)
    hire_rate = serializers.FloatField(default=FIRMS.hire_rate)
    baseline_tax_rate = serializers.FloatField(default=FIRMS.baseline_tax_rate)
    tax_cut = serializers.FloatField(default=FIRMS.tax_cut)

    def validate_att_by_size(self, value):
        unknown = sorted(set(value) - set(SIZE_CLASSES))
        if unknown:
            raise serializers.ValidationError(f"Unknown size classes: {', '.join(unknown)}.")
        return value


class WorkerPanelConfigSerializer(GeneratorConfigSerializer):
    config_class = WorkerPanelConfig

    workers_per_firm = serializers.FloatField(default=WORKERS.workers_per_firm)
    base_first_year = serializers.IntegerField(default=WORKERS.base_first_year)
    base_last_year = serializers.IntegerField(default=WORKERS.base_last_year)
    min_tenure = serializers.IntegerField(default=WORKERS.min_tenure)
    mover_rate = serializers.FloatField(default=WORKERS.mover_rate)
    leader_share = serializers.FloatField(default=WORKERS.leader_share)
    leader_premium = serializers.FloatField(default=WORKERS.leader_premium)
    worker_fe_sd = serializers.FloatField(default=WORKERS.worker_fe_sd)
    error_sd = serializers.FloatField(default=WORKERS.error_sd)
    att_net_earnings = serializers.ListField(
        child=serializers.FloatField(), min_length=1, default=lambda: list(WORKERS.att_net_earnings)
    )


class PanelGenerateConfigSerializer(StrictSerializer):
    sectors = SectorTreeConfigSerializer(default=dict)
    firms = FirmPanelConfigSerializer(default=dict)
    workers = WorkerPanelConfigSerializer(default=dict)
    with_workers = serializers.BooleanField(default=True)
