"""
Property suite over seeded random POVMs.

Usage: python manage.py random_suite --n 1 --count 200 [--seed S] [--output suite.json]
"""
from remote_povm.management.base import PovmCommand
from remote_povm.services import ReportService


class Command(PovmCommand):
    help = 'OE, reconstruction and remote-vs-local checks on random POVMs'

    command_name = 'random_suite'
    flags = ('n', 'count', 'seed', 'output')

    def build_report(self, config):
        return ReportService.random_suite(config.n, config.count, config.seed)
