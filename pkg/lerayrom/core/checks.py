"""Django system checks for the pipeline app.

These checks surface directory problems that would otherwise only show up
when a stage tries to write its first artifact.
"""

from __future__ import annotations

import os
from pathlib import Path

from django.conf import settings
from django.core import checks


def _writable(path: Path) -> bool:
    while not path.exists():
        if path.parent == path:
            return False
        path = path.parent
    return path.is_dir() and os.access(path, os.W_OK)


@checks.register()
def output_directory_writable(app_configs, **kwargs):
    """Warn when ``LERAYROM_OUTPUT_DIR`` points somewhere we cannot write."""

    messages: list[checks.CheckMessage] = []
    output_dir = getattr(settings, "LERAYROM_OUTPUT_DIR", "")
    if output_dir and not _writable(Path(output_dir)):
        messages.append(
            checks.Warning(
                f"Output directory {output_dir} is not writable.",
                hint="Point LERAYROM_OUTPUT_DIR at a writable directory or unset it to use the config's output_dir.",
                id="lerayrom.W001",
            )
        )
    return messages


@checks.register()
def preset_directory_present(app_configs, **kwargs):
    messages: list[checks.CheckMessage] = []
    preset_dir = Path(getattr(settings, "LERAYROM_PRESET_DIR", ""))
    if not preset_dir.is_dir():
        messages.append(
            checks.Warning(
                f"Preset directory {preset_dir} does not exist.",
                hint="Set LERAYROM_PRESET_DIR to the directory holding paper.json and ci.json.",
                id="lerayrom.W002",
            )
        )
    return messages
