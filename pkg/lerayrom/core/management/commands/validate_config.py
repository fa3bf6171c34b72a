import json

from django.core.management.base import BaseCommand

from lerayrom.core.config import config_hash
from lerayrom.core.mixins import PipelineCommandMixin


class Command(PipelineCommandMixin, BaseCommand):
    help = "Validate a run configuration and print its normalized form."

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        parser.add_argument(
            "--print",
            action="store_true",
            dest="print_config",
            help="Print the normalized configuration as JSON.",
        )

    def handle(self, *args, **options):
        config = self.load_run_config(options)
        if options["print_config"]:
            self.stdout.write(json.dumps(config.to_dict(), sort_keys=True, indent=2))
        self.stdout.write(
            self.style.SUCCESS(
                f"Configuration is valid: {config.schedule.n_snapshots} snapshots, "
                f"{config.physics.n_steps} steps, modes {', '.join(config.modes)} (hash {config_hash(config)[:12]})"
            )
        )
