"""Validation of run configuration sections.

Every section of the JSON run configuration is checked by one form.  Rules
that span sections receive the already-cleaned upstream values through the
form constructor (``PhysicsForm`` feeds ``ScheduleForm``, the schedule length
feeds ``PodForm``).
"""

from __future__ import annotations

import math

from django import forms
from django.core.exceptions import ValidationError

from lerayrom.exceptions import MeshGenerationError
from lerayrom.mesh import ChannelGeometry
from lerayrom.rom import StabilizationMode

POD_FIELDS = ("v", "u", "q", "q_bar")
SUPREMIZER_COUNTS = ("sup1_s", "sup1_s_bar", "sup2_s", "sup2_s_bar")
# Relative slack when testing that one time is a whole multiple of another.
_MULTIPLE_TOLERANCE = 1e-6


def _positive(value: float) -> None:
    if not value > 0.0:
        raise ValidationError("Must be positive.")


def _whole_multiple(value: float, step: float) -> bool:
    ratio = value / step
    return abs(ratio - round(ratio)) <= _MULTIPLE_TOLERANCE * max(1.0, abs(ratio))


class MeshForm(forms.Form):
    SOURCES = (("generate", "Generate channel with cylinder"), ("file", "Load mesh file"))

    source = forms.ChoiceField(choices=SOURCES)
    path = forms.CharField(required=False, help_text="Mesh file, required when source is 'file'.")
    target_cells = forms.IntegerField(min_value=100)
    refinement_bias = forms.FloatField(min_value=1.0)
    length = forms.FloatField(validators=[_positive])
    height = forms.FloatField(validators=[_positive])
    centre_x = forms.FloatField()
    centre_y = forms.FloatField()
    radius = forms.FloatField(validators=[_positive])

    def clean(self):
        cleaned = super().clean()
        if cleaned.get("source") == "file" and not cleaned.get("path"):
            self.add_error("path", "A mesh path is required when source is 'file'.")
        geometry_keys = ("length", "height", "centre_x", "centre_y", "radius")
        if all(cleaned.get(key) is not None for key in geometry_keys):
            geometry = ChannelGeometry(
                cleaned["length"], cleaned["height"], (cleaned["centre_x"], cleaned["centre_y"]), cleaned["radius"]
            )
            try:
                geometry.collar_half_width()
            except MeshGenerationError as exc:
                raise ValidationError(str(exc))
        return cleaned


class PhysicsForm(forms.Form):
    rho = forms.FloatField(validators=[_positive])
    mu = forms.FloatField(validators=[_positive])
    alpha = forms.FloatField(min_value=0.0, help_text="Filter radius.")
    dt = forms.FloatField(validators=[_positive])
    t0 = forms.FloatField()
    t_end = forms.FloatField()

    def clean(self):
        cleaned = super().clean()
        t0, t_end, dt = cleaned.get("t0"), cleaned.get("t_end"), cleaned.get("dt")
        if None in (t0, t_end, dt):
            return cleaned
        if t_end <= t0:
            raise ValidationError("t_end must be later than t0.")
        if not _whole_multiple(t_end - t0, dt):
            raise ValidationError(f"dt={dt} does not divide the interval [{t0}, {t_end}].")
        return cleaned


class InletForm(forms.Form):
    amplitude = forms.FloatField(validators=[_positive], help_text="Mean inlet speed at the peak of the cycle.")
    period = forms.FloatField(
        required=False,
        validators=[_positive],
        help_text="Period of sin(pi t / period); leave empty for a steady inlet.",
    )


class ScheduleForm(forms.Form):
    start = forms.FloatField()
    stop = forms.FloatField()
    interval = forms.FloatField(validators=[_positive])

    def __init__(self, *args, physics: dict | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.physics = physics

    def clean(self):
        cleaned = super().clean()
        start, stop, interval = cleaned.get("start"), cleaned.get("stop"), cleaned.get("interval")
        if None in (start, stop, interval):
            return cleaned
        if stop < start:
            raise ValidationError("Schedule stop precedes start.")
        if not _whole_multiple(stop - start, interval):
            raise ValidationError("The sampling interval does not divide [start, stop].")
        if self.physics:
            dt, t0, t_end = self.physics["dt"], self.physics["t0"], self.physics["t_end"]
            if not _whole_multiple(interval, dt):
                raise ValidationError(f"dt={dt} does not divide the sampling interval {interval}.")
            if not _whole_multiple(start - t0, dt):
                raise ValidationError(f"First snapshot time {start} is not a multiple of dt={dt}.")
            if start <= t0 or stop > t_end + _MULTIPLE_TOLERANCE * dt:
                raise ValidationError(f"Snapshot times must lie in ({t0}, {t_end}].")
        return cleaned

    @property
    def n_snapshots(self) -> int:
        data = self.cleaned_data
        return int(round((data["stop"] - data["start"]) / data["interval"])) + 1


class PodForm(forms.Form):
    energy_target = forms.FloatField(
        required=False,
        help_text="Captured energy fraction in (0, 1]; fields without an explicit count use it.",
    )
    v = forms.IntegerField(required=False, min_value=1)
    u = forms.IntegerField(required=False, min_value=1)
    q = forms.IntegerField(required=False, min_value=1)
    q_bar = forms.IntegerField(required=False, min_value=1)
    sup1_s = forms.IntegerField(min_value=0)
    sup1_s_bar = forms.IntegerField(min_value=0)
    sup2_s = forms.IntegerField(min_value=0)
    sup2_s_bar = forms.IntegerField(min_value=0)

    def __init__(self, *args, n_snapshots: int | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.n_snapshots = n_snapshots

    def clean_energy_target(self):
        target = self.cleaned_data.get("energy_target")
        if target is not None and not (0.0 < target <= 1.0 and math.isfinite(target)):
            raise ValidationError("Energy target must lie in (0, 1].")
        return target

    def clean(self):
        cleaned = super().clean()
        if cleaned.get("energy_target") is None and "energy_target" not in self.errors:
            missing = [name for name in POD_FIELDS if cleaned.get(name) is None]
            if missing:
                raise ValidationError(f"Without an energy target, mode counts are required for {', '.join(missing)}.")
        if self.n_snapshots is not None:
            for name in POD_FIELDS + SUPREMIZER_COUNTS:
                count = cleaned.get(name)
                if count is not None and count > self.n_snapshots:
                    self.add_error(name, f"{count} modes exceed the {self.n_snapshots} scheduled snapshots.")
        return cleaned


class SolverForm(forms.Form):
    piso_correctors = forms.IntegerField(min_value=1)
    non_orthogonal_correctors = forms.IntegerField(min_value=0)
    simplec_max_iterations = forms.IntegerField(min_value=1)
    simplec_tolerance = forms.FloatField(min_value=0.0, max_value=1.0)
    pressure_tolerance = forms.FloatField(min_value=0.0, max_value=1.0)
    momentum_tolerance = forms.FloatField(min_value=0.0, max_value=1.0)

    def clean(self):
        cleaned = super().clean()
        for name in ("simplec_tolerance", "pressure_tolerance", "momentum_tolerance"):
            value = cleaned.get(name)
            if value is not None and not 0.0 < value < 1.0:
                self.add_error(name, "Tolerance must lie strictly between 0 and 1.")
        return cleaned


class RunForm(forms.Form):
    modes = forms.MultipleChoiceField(choices=[(mode.value, mode.name) for mode in StabilizationMode])
    output_dir = forms.CharField()

    def clean_modes(self):
        # Keep the canonical order regardless of how the file lists them.
        chosen = set(self.cleaned_data["modes"])
        return [mode.value for mode in StabilizationMode if mode.value in chosen]
