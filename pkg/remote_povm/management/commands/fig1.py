"""
Scripted discrimination of alpha|0> +/- beta|1> with one bit in each direction.

Usage: python manage.py fig1 --alpha 0.6 --beta 0.8 [--mode exact] [--shots N --seed S]
"""
from remote_povm.management.base import PovmCommand
from remote_povm.services import ReportService


class Command(PovmCommand):
    help = 'Exact and sampled run of the two-party discrimination protocol'

    command_name = 'fig1'
    flags = ('alpha', 'beta', 'mode', 'shots', 'seed', 'output')

    def build_report(self, config):
        return ReportService.fig1(config.alpha, config.beta, config.mode, config.shots, config.seed)
