# runs/serializers.py
from rest_framework import serializers

from config.serializers import StrictSerializer

from .models import RunRecord


class RunRecordSerializer(serializers.ModelSerializer):
    duration_seconds = serializers.SerializerMethodField(read_only=True)

    class Meta:
        model = RunRecord
        fields = [
            "id",
            "command",
            "argv",
            "seed",
            "workers",
            "config",
            "output_dir",
            "status",
            "exit_code",
            "message",
            "started_at",
            "finished_at",
            "duration_seconds",
        ]
        read_only_fields = fields

    def get_duration_seconds(self, obj):
        if obj.finished_at and obj.started_at:
            return (obj.finished_at - obj.started_at).total_seconds()
        return None


class ReportPlotConfigSerializer(StrictSerializer):
    input = serializers.CharField(required=False)
    title = serializers.CharField(default="Event study")
