from django.db import models
from django.utils import timezone


class RunRecord(models.Model):
    STATUS_CHOICES = (
        ("RUNNING", "Running"),
        ("SUCCEEDED", "Succeeded"),
        ("FAILED", "Failed"),
    )

    # e.g. "panel generate"
    command = models.CharField(max_length=64)
    argv = models.JSONField(default=list, blank=True)

    # u64 does not fit a signed bigint column
    seed = models.CharField(max_length=20, blank=True, default="")
    workers = models.PositiveIntegerField(default=1)
    config = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500)

    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default="RUNNING")
    exit_code = models.IntegerField(null=True, blank=True)
    message = models.TextField(blank=True, default="")

    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-started_at", "-id"]
        indexes = [
            models.Index(fields=["command"]),
            models.Index(fields=["status"]),
        ]

    def __str__(self):
        return f"{self.command} ({self.status})"

    def finish(self, exit_code, message=""):
        self.exit_code = exit_code
        self.status = "SUCCEEDED" if exit_code == 0 else "FAILED"
        self.message = message
        self.finished_at = timezone.now()
        self.save(update_fields=["exit_code", "status", "message", "finished_at"])
