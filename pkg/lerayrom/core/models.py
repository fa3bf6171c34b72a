from django.db import models
from django.utils import timezone


class PipelineRun(models.Model):
    """One invocation of ``offline``, ``online`` or ``compare`` against an output directory."""

    class Command(models.TextChoices):
        OFFLINE = "offline", "Offline"
        ONLINE = "online", "Online"
        COMPARE = "compare", "Compare"

    class Status(models.TextChoices):
        RUNNING = "running", "Running"
        SUCCEEDED = "succeeded", "Succeeded"
        FAILED = "failed", "Failed"

    command = models.CharField(max_length=16, choices=Command.choices)
    output_dir = models.CharField(
        max_length=512,
        help_text="Directory holding the artifacts of this run.",
    )
    config_hash = models.CharField(
        max_length=64,
        help_text="SHA-256 of the canonical run configuration.",
    )
    mode = models.CharField(
        max_length=8,
        blank=True,
        help_text="Stabilization mode for online runs.",
    )
    status = models.CharField(max_length=16, choices=Status.choices, default=Status.RUNNING)
    started_at = models.DateTimeField(default=timezone.now)
    finished_at = models.DateTimeField(null=True, blank=True)
    error = models.TextField(blank=True)

    class Meta:
        ordering = ["-started_at"]
        verbose_name = "Pipeline run"
        verbose_name_plural = "Pipeline runs"

    def __str__(self) -> str:
        label = f"{self.command} {self.mode}".strip()
        return f"{label} [{self.get_status_display()}] {self.config_hash[:12]}"

    def finish(self, status: str, error: str = "") -> None:
        self.status = status
        self.error = error
        self.finished_at = timezone.now()
        self.save(update_fields=["status", "error", "finished_at"])


class StageRecord(models.Model):
    """Audit entry for one pipeline stage execution, skipped stages included."""

    class Status(models.TextChoices):
        COMPLETED = "completed", "Completed"
        SKIPPED = "skipped", "Skipped (up to date)"
        FAILED = "failed", "Failed"

    run = models.ForeignKey(
        PipelineRun,
        on_delete=models.CASCADE,
        related_name="stages",
    )
    stage = models.CharField(max_length=32)
    status = models.CharField(max_length=16, choices=Status.choices)
    input_hash = models.CharField(
        max_length=64,
        help_text="Hash of the configuration sections and upstream outputs the stage read.",
    )
    outputs = models.JSONField(
        default=dict,
        blank=True,
        help_text="Relative output path to SHA-256 digest.",
    )
    duration = models.FloatField(
        default=0.0,
        help_text="Wall-clock seconds spent in the stage.",
    )
    metadata = models.JSONField(
        blank=True,
        null=True,
        help_text="Stage specific figures such as mode counts or the FOM wall time.",
    )
    created_at = models.DateTimeField(default=timezone.now)

    class Meta:
        ordering = ["-created_at"]
        indexes = [
            models.Index(
                fields=["stage", "created_at"],
                name="stagerecord_stage_created_idx",
            ),
        ]
        verbose_name = "Stage record"
        verbose_name_plural = "Stage records"

    def __str__(self) -> str:
        return f"{self.stage} {self.get_status_display()} ({self.duration:.1f} s)"
