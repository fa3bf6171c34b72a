from django.core.management.base import BaseCommand

from lerayrom.core.mixins import PipelineCommandMixin
from lerayrom.core.pipeline import run_compare


class Command(PipelineCommandMixin, BaseCommand):
    help = "Compare every configured reduced model against the FOM and write the error and timing tables."

    def add_arguments(self, parser):
        self.add_config_argument(parser)

    def handle(self, *args, **options):
        config = self.load_run_config(options)
        written = self.guarded(run_compare, config)
        for name, path in written.items():
            self.stdout.write(f"  {name}: {path}")
        self.stdout.write(self.style.SUCCESS(f"Comparison tables for {', '.join(config.modes)} written."))
