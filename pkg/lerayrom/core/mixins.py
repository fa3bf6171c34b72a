"""Reusable mixins shared by the pipeline management commands."""

from __future__ import annotations

import logging
from typing import Any, Callable

from django.core.management.base import CommandError

from lerayrom.exceptions import (
    ArtifactError,
    ConfigError,
    LerayRomError,
    MissingArtifactError,
    NumericalError,
    StageError,
)

from .config import RunConfig, load_config

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class PipelineCommandMixin:
    """Configuration loading and exit-code translation for ``BaseCommand`` subclasses.

    ``ConfigError`` exits with 2, numerical failures (directly or wrapped in a
    ``StageError``) with 3.  Missing artifacts name the command that produces
    them; every other pipeline error exits with 1.
    """

    def add_config_argument(self, parser) -> None:
        parser.add_argument(
            "--config",
            default=None,
            help="JSON run configuration file or bundled preset name (default: LERAYROM_DEFAULT_PRESET).",
        )

    def load_run_config(self, options: dict) -> RunConfig:
        return self.guarded(load_config, options.get("config"))

    def guarded(self, action: Callable[..., Any], *args, **kwargs) -> Any:
        try:
            return action(*args, **kwargs)
        except ConfigError as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG) from exc
        except StageError as exc:
            if isinstance(exc.cause, MissingArtifactError):
                raise CommandError(str(exc.cause)) from exc
            raise CommandError(str(exc), returncode=EXIT_NUMERICAL if exc.is_numerical else 1) from exc
        except NumericalError as exc:
            raise CommandError(str(exc), returncode=EXIT_NUMERICAL) from exc
        except MissingArtifactError as exc:
            raise CommandError(f"{exc.path} is missing. Run `{exc.hint}` first.") from exc
        except (ArtifactError, LerayRomError) as exc:
            raise CommandError(str(exc)) from exc
