"""
Entanglement capability of a measurement document.

Usage: python manage.py capability --input povm.json [--count TRIALS] [--seed S]
"""
from django.conf import settings

from remote_povm.management.base import PovmCommand
from remote_povm.services import ReportService


class Command(PovmCommand):
    help = 'Compare E_POVM with the EPR experiment and a random-input capability search'

    command_name = 'capability'
    flags = ('input', 'output', 'count', 'seed')

    def build_report(self, config):
        _, povm, _, _ = ReportService.load_measurement(config.input)
        trials = config.count if config.count else settings.POVM_CAPABILITY_TRIALS
        return ReportService.capability(povm, trials, config.seed)
