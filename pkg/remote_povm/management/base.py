"""
Shared plumbing for the remote POVM management commands.

Flags are declared as plain strings and validated by CommandConfigForm, so a
missing or malformed value is reported as a usage error (exit code 1) instead
of argparse's own exit.
"""
import logging
import sys
from functools import partial
from typing import Any, Dict, Sequence

from django.core.management.base import BaseCommand, CommandError

from ..forms import CommandConfigForm
from ..models import CommandConfig
from ..services import (
    InvalidDocumentError,
    InvalidMeasurementError,
    LinalgError,
    NotOrthogonalEquivalentError,
    ProtocolError,
    ReportService,
)

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_INVALID_INPUT = 2
EXIT_INVARIANT_FAILURE = 3

FLAG_HELP = {
    'input': 'Path to a POVM/Kraus JSON document',
    'output': 'Write the JSON report to this path',
    'seed': 'Seed for sampled runs and random searches',
    'shots': 'Number of sampled shots',
    'mode': 'exact or sampled',
    'alpha': 'Amplitude of |0> in alpha|0> +/- beta|1>',
    'beta': 'Amplitude of |1> in alpha|0> +/- beta|1>',
    'n': 'Number of qubits (1 or 2)',
    'count': 'Number of cases or trials',
}


class PovmCommand(BaseCommand):
    """
    Base class: subclasses set command_name and flags and implement build_report.
    """

    command_name = ''
    flags: Sequence[str] = ()
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = partial(self._usage_error, parser)
        return parser

    @staticmethod
    def _usage_error(parser, message):
        """Parser errors (unknown flags, stray arguments) exit with EXIT_USAGE."""
        if parser.called_from_command_line:
            parser.print_usage(sys.stderr)
            parser.exit(EXIT_USAGE, f"{parser.prog}: error: {message}\n")
        raise CommandError(f"Usage error: {message}", returncode=EXIT_USAGE)

    def add_arguments(self, parser):
        for flag in self.flags:
            parser.add_argument(f'--{flag}', type=str, default=None, help=FLAG_HELP[flag])

    def build_config(self, options: Dict[str, Any]) -> CommandConfig:
        data = {'command': self.command_name}
        data.update({flag: options.get(flag) for flag in self.flags if options.get(flag) is not None})

        form = CommandConfigForm(data=data)
        if not form.is_valid():
            messages = '; '.join(str(m) for errors in form.errors.values() for m in errors)
            raise CommandError(f"Usage error: {messages}", returncode=EXIT_USAGE)
        return form.to_config()

    def build_report(self, config: CommandConfig) -> Dict[str, Any]:
        raise NotImplementedError

    def handle(self, *args, **options):
        config = self.build_config(options)

        try:
            report = self.build_report(config)
        except NotOrthogonalEquivalentError as e:
            raise CommandError(f"Invariant failure: {e}", returncode=EXIT_INVARIANT_FAILURE)
        except (InvalidDocumentError, InvalidMeasurementError, LinalgError, ProtocolError) as e:
            raise CommandError(f"Invalid input: {e}", returncode=EXIT_INVALID_INPUT)

        self.stdout.write(ReportService.render_table(report), ending='')
        if config.output:
            ReportService.write_json(report, config.output)
            logger.info(f"Report written to {config.output}")

        if not report.get('passed', True):
            raise CommandError("Invariant failure: see report", returncode=EXIT_INVARIANT_FAILURE)
