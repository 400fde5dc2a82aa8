"""
Classify a measurement document and report its entanglement cost.

Usage: python manage.py analyze --input povm.json [--output report.json]
"""
from remote_povm.management.base import PovmCommand
from remote_povm.services import ReportService


class Command(PovmCommand):
    help = 'OE verdict, resource coefficients and E_POVM of a POVM or Kraus document'

    command_name = 'analyze'
    flags = ('input', 'output')

    def build_report(self, config):
        kind, povm, ks, _ = ReportService.load_measurement(config.input)
        return ReportService.analyze(kind, povm, ks)
