from django.contrib import admin

from .models import RunRecord


@admin.register(RunRecord)
class RunRecordAdmin(admin.ModelAdmin):
    list_display = ("id", "command", "seed", "status", "exit_code", "started_at", "finished_at")
    list_filter = ("status", "command")
    search_fields = ("command", "output_dir", "message")
    readonly_fields = ("argv", "config", "started_at", "finished_at")
    ordering = ("-started_at",)
