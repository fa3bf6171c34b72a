"""Management command that runs the offline stages of the reduced order pipeline."""

from django.core.management.base import BaseCommand

from lerayrom.core.mixins import PipelineCommandMixin
from lerayrom.core.pipeline import run_offline


class Command(PipelineCommandMixin, BaseCommand):
    help = "Generate the mesh, FOM snapshots, POD bases, supremizers and reduced operators."

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        parser.add_argument(
            "--force",
            action="store_true",
            help="Rerun every stage even when the manifest shows it is up to date.",
        )

    def handle(self, *args, **options):
        config = self.load_run_config(options)
        self.stdout.write(f"Offline pipeline into {config.output_path}")
        results = self.guarded(run_offline, config, force=options["force"])
        for result in results:
            if result.status == "skipped":
                self.stdout.write(self.style.WARNING(f"  {result.name}: up to date, skipped"))
            else:
                self.stdout.write(self.style.SUCCESS(f"  {result.name}: done in {result.duration:.1f} s"))
        pod = next((r for r in results if r.name == "pod"), None)
        if pod and "modes" in pod.metadata:
            counts = ", ".join(f"{name}={n}" for name, n in pod.metadata["modes"].items())
            self.stdout.write(f"POD modes: {counts}")
        self.stdout.write(self.style.SUCCESS("Offline artifacts are ready."))
