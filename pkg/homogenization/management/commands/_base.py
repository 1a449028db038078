# homogenization/management/commands/_base.py
"""Shared plumbing of the study commands: config loading, outputs, exit codes."""
import logging
import sys
from pathlib import Path
from typing import Any, Dict

from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from homogenization.config import (
    CONFIG_MODELS,
    ConfigError,
    dump_config,
    load_run_config,
    parse_value,
    scalar_fields,
)
from homogenization.engine.errors import InvalidGeometryError, RasterFormatError
from homogenization.models import StudyRun
from homogenization.reports import sanitize_for_json, write_csv, write_report
from homogenization.runners import EXIT_OK, EXIT_USAGE, RUNNERS, RunOutcome, StrictModeError

logger = logging.getLogger(__name__)

# flags handled explicitly rather than generated from the config model
_EXPLICIT_FIELDS = ('out', 'strict')


class StudyCommand(BaseCommand):
    """
    `manage.py <command> --config run.json [--strict] [--out report.json]
    [--<field> value ...] [--set dotted.key=value ...] [--record]`

    Exit codes: 0 success, 1 usage/config error or --strict failure,
    2 indefiniteness detected, 3 solver non-convergence, 4 ill-posed laminate.
    """

    command_name: str = ''
    requires_system_checks = []
    requires_migrations_checks = False

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._reached_handle = False

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Run configuration (JSON)')
        parser.add_argument('--strict', action='store_true', default=None,
                            help='Treat failing admissibility hypotheses as errors')
        parser.add_argument('--out', default=None, help='Report path (default: stdout)')
        parser.add_argument('--set', action='append', default=[], dest='overrides', metavar='KEY=VALUE',
                            help='Override any config entry by dotted key, e.g. solver.tol=1e-10')
        parser.add_argument('--record', action='store_true', help='Store the run as a StudyRun record')
        for name in scalar_fields(CONFIG_MODELS[self.command_name]):
            if name in _EXPLICIT_FIELDS:
                continue
            parser.add_argument(f"--{name.replace('_', '-')}", dest=f"field_{name}", default=None, metavar='VALUE')

    def run_from_argv(self, argv):
        try:
            super().run_from_argv(argv)
        except SystemExit as exc:
            # argparse exits with 2 on bad usage; 2 is reserved for indefiniteness
            if exc.code == 2 and not self._reached_handle:
                sys.exit(EXIT_USAGE)
            raise

    def collect_overrides(self, options: Dict[str, Any]) -> Dict[str, Any]:
        overrides: Dict[str, Any] = {}
        for item in options.get('overrides') or []:
            key, sep, value = item.partition('=')
            if not sep or not key:
                raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
            overrides[key] = parse_value(value)
        for name in scalar_fields(CONFIG_MODELS[self.command_name]):
            value = options.get(f"field_{name}")
            if value is not None:
                overrides[name] = parse_value(value)
        if options.get('out') is not None:
            overrides['out'] = options['out']
        if options.get('strict'):
            overrides['strict'] = True
        return overrides

    def handle(self, *args, **options):
        self._reached_handle = True
        config_path = Path(options['config'])
        try:
            config = load_run_config(self.command_name, config_path, self.collect_overrides(options))
        except ConfigError as e:
            raise CommandError(str(e), returncode=EXIT_USAGE) from e

        logger.info(f"🔄 Running {self.command_name} from {config_path}")
        try:
            outcome: RunOutcome = RUNNERS[self.command_name](config, base_dir=config_path.resolve().parent)
        except StrictModeError as e:
            self._record(options, dump_config(config), {}, EXIT_USAGE, str(e))
            raise CommandError(str(e), returncode=EXIT_USAGE) from e
        except (InvalidGeometryError, RasterFormatError) as e:
            self._record(options, dump_config(config), {}, EXIT_USAGE, str(e))
            raise CommandError(f"invalid microstructure: {e}", returncode=EXIT_USAGE) from e
        except ValueError as e:
            self._record(options, dump_config(config), {}, EXIT_USAGE, str(e))
            raise CommandError(f"invalid input: {e}", returncode=EXIT_USAGE) from e
        except Exception as e:
            logger.error(f"❌ {self.command_name} failed unexpectedly: {e}")
            raise RuntimeError(f"{self.command_name} failed: {e}") from e

        write_report(outcome.report, config.out, stream=self.stdout)
        for table in outcome.tables:
            write_csv(table.path, table.header, table.rows)
        self._record(options, dump_config(config), outcome.report, outcome.exit_code, outcome.message, config.out)

        if outcome.exit_code != EXIT_OK:
            raise CommandError(outcome.message, returncode=outcome.exit_code)

    def _record(self, options, config, report, exit_code, message='', out=None):
        if not options.get('record'):
            return
        try:
            run = StudyRun.objects.create(
                command=self.command_name,
                exit_code=exit_code,
                config=config,
                report=sanitize_for_json(report),
                output_path=out or '',
                error_message=message,
            )
            logger.info(f"📋 Recorded {run}")
        except DatabaseError as e:
            logger.warning(f"⚠️ Could not record run (did you run migrate?): {e}")
