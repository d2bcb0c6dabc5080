"""
Shared plumbing for the management commands: the --config/--seed/--out
options, ledger bookkeeping and the mapping from library errors to exit codes.
"""
import logging
from contextlib import contextmanager

from django.core.management.base import BaseCommand, CommandError

from dataio.exceptions import DatasetError
from network.checkpoint import CheckpointFormatError
from numkit.exceptions import ContractViolation, NumericalError

from .config import ConfigError, load_run_config
from .models import TrainingRun
from .utils import finish_run

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def exit_code_for(exc) -> int:
    if isinstance(exc, (ConfigError, ContractViolation)):
        return EXIT_CONFIG
    if isinstance(exc, NumericalError):
        return EXIT_NUMERIC
    if isinstance(exc, (DatasetError, CheckpointFormatError, OSError)):
        return EXIT_IO
    return None


@contextmanager
def command_errors(run=None):
    """Translate library errors into CommandError and mark the ledger run FAILED."""
    try:
        yield
    except CommandError:
        finish_run(run, status=TrainingRun.STATUS_FAILED)
        raise
    except Exception as exc:
        code = exit_code_for(exc)
        if code is None:
            raise
        finish_run(run, status=TrainingRun.STATUS_FAILED, final_metrics={"error": str(exc)})
        logger.error("command failed code=%d error=%s", code, exc)
        raise CommandError(str(exc), returncode=code) from exc


class RunCommand(BaseCommand):
    """Base for commands that read a run configuration file."""

    config_required = True

    def add_arguments(self, parser):
        parser.add_argument("--config", required=self.config_required, help="Run configuration (.ini)")
        parser.add_argument("--seed", type=int, default=None, help="Override [run] seed")
        parser.add_argument("--out", default=None, help="Override [run] output_dir")

    def load_config(self, options):
        with command_errors():
            return load_run_config(options["config"], seed=options.get("seed"), output_dir=options.get("out"))

    def parse_seeds(self, raw, default):
        if not raw:
            return [default]
        try:
            return [int(s) for s in raw.split(",") if s.strip()]
        except ValueError:
            raise CommandError(f"--seeds must be a comma-separated list of integers, got {raw!r}", returncode=EXIT_CONFIG)
