"""
Run a measurement document remotely and compare with the local Born rule.

Usage: python manage.py remote_run --input povm.json [--mode sampled --shots N --seed S]
"""
from remote_povm.management.base import PovmCommand
from remote_povm.services import ReportService


class Command(PovmCommand):
    help = 'Exact (and optionally sampled) remote implementation of a POVM document'

    command_name = 'remote_run'
    flags = ('input', 'output', 'mode', 'shots', 'seed')

    def build_report(self, config):
        _, povm, _, state = ReportService.load_measurement(config.input)
        psi = state if state is not None else ReportService.default_state(povm.n_qubits)
        return ReportService.remote_run(povm, psi, config.mode, config.shots, config.seed)
