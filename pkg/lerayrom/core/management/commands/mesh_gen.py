"""Management command that generates (or checks) a mesh and prints its quality report."""

from pathlib import Path

from django.core.management.base import BaseCommand

from lerayrom.core.mixins import PipelineCommandMixin
from lerayrom.mesh import quality, save_mesh


class Command(PipelineCommandMixin, BaseCommand):
    help = "Build the mesh of a run configuration, print its quality metrics and optionally save it."

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        parser.add_argument("--target-cells", type=int, default=None, help="Override mesh.target_cells.")
        parser.add_argument("--bias", type=float, default=None, help="Override mesh.refinement_bias.")
        parser.add_argument("--output", default=None, help="Write the mesh file here.")

    def handle(self, *args, **options):
        config = self.load_run_config(options)
        overrides = {}
        if options["target_cells"] is not None:
            overrides["target_cells"] = options["target_cells"]
        if options["bias"] is not None:
            overrides["refinement_bias"] = options["bias"]
        if overrides:
            data = config.to_dict()
            data["mesh"].update(overrides)
            config = self.guarded(type(config).from_dict, data)

        mesh = self.guarded(config.mesh.build)
        self.guarded(config.boundaries().check, mesh)
        report = quality(mesh)
        for key, value in report.as_dict().items():
            self.stdout.write(f"{key:>24}: {value:.6g}" if isinstance(value, float) else f"{key:>24}: {value}")
        self.stdout.write(f"{'fingerprint':>24}: {mesh.fingerprint}")
        if options["output"]:
            path = save_mesh(mesh, Path(options["output"]))
            self.stdout.write(self.style.SUCCESS(f"Mesh written to {path}"))
