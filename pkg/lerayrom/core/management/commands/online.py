from django.core.management.base import BaseCommand

from lerayrom.core.mixins import PipelineCommandMixin
from lerayrom.core.pipeline import run_online
from lerayrom.rom import StabilizationMode


class Command(PipelineCommandMixin, BaseCommand):
    help = "Integrate one reduced model in time and reconstruct its fields at the snapshot times."

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        parser.add_argument(
            "--mode",
            required=True,
            choices=[mode.value for mode in StabilizationMode],
            help="Pressure stabilization of the reduced model.",
        )

    def handle(self, *args, **options):
        config = self.load_run_config(options)
        result = self.guarded(run_online, config, options["mode"])
        if result.diverged_at is not None:
            self.stdout.write(self.style.WARNING(f"{result.mode.value} ROM diverged at t={result.diverged_at:.6g}"))
        self.stdout.write(
            self.style.SUCCESS(f"{result.mode.value} online loop took {result.wall_time:.3f} s; outputs in {result.directory}")
        )
