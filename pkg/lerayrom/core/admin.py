from django.contrib import admin

from .models import PipelineRun, StageRecord


class StageRecordInline(admin.TabularInline):
    model = StageRecord
    extra = 0
    can_delete = False
    readonly_fields = ("stage", "status", "input_hash", "duration", "created_at")
    fields = readonly_fields


@admin.register(PipelineRun)
class PipelineRunAdmin(admin.ModelAdmin):
    list_display = ("started_at", "command", "mode", "status", "output_dir", "config_hash")
    list_filter = ("command", "status", "mode")
    search_fields = ("output_dir", "config_hash")
    readonly_fields = (
        "command",
        "output_dir",
        "config_hash",
        "mode",
        "status",
        "started_at",
        "finished_at",
        "error",
    )
    ordering = ("-started_at",)
    inlines = [StageRecordInline]


@admin.register(StageRecord)
class StageRecordAdmin(admin.ModelAdmin):
    """Expose the stage audit trail to administrators."""

    list_display = ("created_at", "run", "stage", "status", "duration")
    list_filter = ("stage", "status", "created_at")
    search_fields = ("stage", "input_hash")
    readonly_fields = (
        "run",
        "stage",
        "status",
        "input_hash",
        "outputs",
        "duration",
        "metadata",
        "created_at",
    )
    ordering = ("-created_at",)
