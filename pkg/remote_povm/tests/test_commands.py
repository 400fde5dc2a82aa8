"""
End-to-end tests for the management commands.
"""
import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from remote_povm import fixtures
from remote_povm.services import NotOrthogonalEquivalentError, ReportService


class CommandTestCase(SimpleTestCase):

    def setUp(self):
        workdir = tempfile.TemporaryDirectory()
        self.addCleanup(workdir.cleanup)
        self.workdir = Path(workdir.name)

    def write_document(self, name, measurement, **extra):
        document = ReportService.measurement_document(measurement)
        document.update(extra)
        path = self.workdir / name
        path.write_text(json.dumps(document), encoding='utf-8')
        return str(path)

    def run_command(self, name, **options):
        output = self.workdir / f'{name}.json'
        stdout = StringIO()
        call_command(name, output=str(output), stdout=stdout, **options)
        return json.loads(output.read_text(encoding='utf-8')), stdout.getvalue()

    def assertExitCode(self, code, name, *args, **options):
        with self.assertRaises(CommandError) as cm:
            call_command(name, *args, stdout=StringIO(), **options)
        self.assertEqual(cm.exception.returncode, code)


# ─────────────────────────────────────────────────────────────
# ANALYZE
# ─────────────────────────────────────────────────────────────

class AnalyzeCommandTest(CommandTestCase):

    def test_projective_costs_one_ebit(self):
        report, stdout = self.run_command('analyze', input=self.write_document('b.json', fixtures.fixture_b()))
        self.assertEqual(report['oe_verdict'], 'OE')
        self.assertAlmostEqual(report['e_povm'], 1.0, places=9)
        self.assertIn('e_povm', stdout)

    def test_discrimination_cost(self):
        report, _ = self.run_command('analyze', input=self.write_document('a.json', fixtures.fixture_a()))
        self.assertAlmostEqual(report['e_povm'], 0.543564, delta=1e-6)
        self.assertEqual(report['retained_labels'], ['I', 'Z'])
        np.testing.assert_allclose(report['alphas_squared'], [0.875, 0, 0, 0.125], atol=1e-9)
        self.assertTrue(report['passed'])

    def test_kraus_set_without_orthogonal_equivalent(self):
        report, _ = self.run_command('analyze', input=self.write_document('d.json', fixtures.fixture_d()))
        self.assertEqual(report['kind'], 'kraus')
        self.assertEqual(report['oe_verdict'], 'not OE')
        self.assertEqual(report['roots_oe_verdict'], 'OE')
        self.assertAlmostEqual(report['e_povm'], 1.0, places=9)

    def test_entangled_basis_measurement(self):
        report, _ = self.run_command('analyze', input=self.write_document('bell.json', fixtures.entangled_basis_povm()))
        self.assertEqual(report['frame'], 'eigenbasis')
        self.assertAlmostEqual(report['e_povm'], 2.0, places=9)
        self.assertTrue(report['passed'])

    def test_invalid_json(self):
        path = self.workdir / 'broken.json'
        path.write_text('{"n_qubits": 1, "kind": ', encoding='utf-8')
        self.assertExitCode(2, 'analyze', input=str(path))

    def test_missing_file(self):
        self.assertExitCode(2, 'analyze', input=str(self.workdir / 'absent.json'))

    def test_non_psd_element(self):
        document = {
            'n_qubits': 1,
            'kind': 'povm',
            'operators': [
                [[[1.5, 0], [0, 0]], [[0, 0], [1, 0]]],
                [[[-0.5, 0], [0, 0]], [[0, 0], [0, 0]]],
            ],
        }
        path = self.workdir / 'negative.json'
        path.write_text(json.dumps(document), encoding='utf-8')
        self.assertExitCode(2, 'analyze', input=str(path))

    @patch('remote_povm.services.report_service.PovmService.oe_decompose')
    def test_no_orthogonal_form_exits_three(self, mock_decompose):
        mock_decompose.side_effect = NotOrthogonalEquivalentError('residual 1e-2')
        self.assertExitCode(3, 'analyze', input=self.write_document('b.json', fixtures.fixture_b()))

    def test_missing_input_flag(self):
        self.assertExitCode(1, 'analyze')


# ─────────────────────────────────────────────────────────────
# REMOTE RUN AND CAPABILITY
# ─────────────────────────────────────────────────────────────

class RemoteRunCommandTest(CommandTestCase):

    def test_state_from_document(self):
        path = self.write_document('a.json', fixtures.fixture_a(), state=[[0.6, 0.0], [0.8, 0.0]])
        report, _ = self.run_command('remote_run', input=path)
        np.testing.assert_allclose(report['remote_distribution'], [0.72, 0.28], atol=1e-9)
        self.assertEqual(report['bits_bob_to_alice'], 2)
        self.assertEqual(report['bits_alice_to_bob'], 1)
        self.assertTrue(report['passed'])

    def test_default_state_is_zero(self):
        report, _ = self.run_command('remote_run', input=self.write_document('b.json', fixtures.fixture_b()))
        np.testing.assert_allclose(report['local_distribution'], [1.0, 0.0], atol=1e-12)

    def test_sampled_mode(self):
        path = self.write_document('a.json', fixtures.fixture_a(), state=[[0.6, 0.0], [0.8, 0.0]])
        report, _ = self.run_command('remote_run', input=path, mode='sampled', shots='500', seed='12')
        self.assertEqual(report['mode'], 'sampled')
        self.assertEqual(sum(report['sampled']['counts']), 500)

    def test_unnormalized_state(self):
        path = self.write_document('a.json', fixtures.fixture_a(), state=[[1.0, 0.0], [1.0, 0.0]])
        self.assertExitCode(2, 'remote_run', input=path)


class CapabilityCommandTest(CommandTestCase):

    def test_chain_for_discrimination(self):
        path = self.write_document('a.json', fixtures.fixture_a())
        report, _ = self.run_command('capability', input=path, count='20', seed='1')
        self.assertAlmostEqual(report['capability_epr'], 0.543564, delta=1e-6)
        self.assertLessEqual(report['capability_search'], report['capability_epr'] + 1e-9)
        self.assertEqual(report['trials'], 20)
        self.assertTrue(report['passed'])

    @override_settings(POVM_CAPABILITY_TRIALS=1000)
    def test_default_trials_from_settings(self):
        report, _ = self.run_command('capability', input=self.write_document('b.json', fixtures.fixture_b()), seed='5')
        self.assertEqual(report['trials'], 1000)
        self.assertAlmostEqual(report['capability_epr'], 1.0, places=9)
        self.assertLessEqual(report['capability_search'], report['capability_epr'] + 1e-9)
        self.assertTrue(report['passed'])


# ─────────────────────────────────────────────────────────────
# FIG1
# ─────────────────────────────────────────────────────────────

class Fig1CommandTest(CommandTestCase):

    def test_exact_mode(self):
        report, _ = self.run_command('fig1', alpha='0.6', beta='0.8', mode='exact')
        self.assertAlmostEqual(report['outcome0_prob'], 0.72, places=9)
        self.assertAlmostEqual(report['success_given_outcome0'], 1.0, places=9)
        self.assertAlmostEqual(report['success_given_outcome0_minus'], 1.0, places=9)
        self.assertAlmostEqual(report['e_consumed'], 0.543564, delta=1e-6)
        self.assertNotIn('sampled', report)

    def test_sampled_mode(self):
        report, _ = self.run_command('fig1', alpha='0.6', beta='0.8', mode='sampled', shots='2000', seed='9')
        sampled = report['sampled']
        self.assertTrue(sampled['within_4_sigma'])
        self.assertEqual(sampled['bits_bob_to_alice'], 2000)
        self.assertEqual(sampled['bits_alice_to_bob'], 2000)

    @override_settings(POVM_DEFAULT_SHOTS=100000)
    def test_default_shots_sampled(self):
        report, _ = self.run_command('fig1', alpha='0.6', beta='0.8')
        sampled = report['sampled']
        self.assertEqual(report['mode'], 'sampled')
        self.assertTrue(sampled['within_4_sigma'])
        self.assertEqual(sampled['bits_bob_to_alice'], 100000)

    def test_rounded_equal_amplitudes_rescaled(self):
        report, _ = self.run_command('fig1', alpha='0.7071', beta='0.7071', mode='exact')
        self.assertAlmostEqual(report['e_consumed'], 0.0, places=9)
        self.assertAlmostEqual(report['outcome0_prob'], 1.0, places=9)

    def test_missing_beta(self):
        self.assertExitCode(1, 'fig1', alpha='0.6', mode='exact')

    def test_alpha_above_beta(self):
        self.assertExitCode(1, 'fig1', alpha='0.8', beta='0.6', mode='exact')

    def test_pair_far_from_unit_norm(self):
        self.assertExitCode(1, 'fig1', alpha='0.5', beta='0.5', mode='exact')

    def test_unknown_mode(self):
        self.assertExitCode(1, 'fig1', alpha='0.6', beta='0.8', mode='fast')


# ─────────────────────────────────────────────────────────────
# RANDOM SUITE
# ─────────────────────────────────────────────────────────────

class RandomSuiteCommandTest(CommandTestCase):

    def test_single_qubit_suite_passes(self):
        report, stdout = self.run_command('random_suite', n='1', count='20', seed='4')
        self.assertTrue(report['passed'])
        self.assertEqual(len(report['cases']), 20)
        self.assertEqual(report['failures'], [])
        self.assertIn('cases', stdout)

    def test_empty_suite(self):
        report, _ = self.run_command('random_suite', n='1', count='0', seed='4')
        self.assertTrue(report['passed'])
        self.assertEqual(report['cases'], [])

    def test_three_qubits_rejected(self):
        self.assertExitCode(1, 'random_suite', n='3', count='5')

    def test_identical_seeds_give_identical_reports(self):
        first = self.workdir / 'first.json'
        second = self.workdir / 'second.json'
        call_command('random_suite', n='1', count='5', seed='77', output=str(first), stdout=StringIO())
        call_command('random_suite', n='1', count='5', seed='77', output=str(second), stdout=StringIO())
        self.assertEqual(first.read_bytes(), second.read_bytes())

    @patch('remote_povm.services.ReportService.random_suite')
    def test_failing_case_exits_three(self, mock_suite):
        mock_suite.return_value = {'command': 'random_suite', 'failures': [3], 'passed': False}
        self.assertExitCode(3, 'random_suite', n='1', count='5')
        mock_suite.assert_called_once()


# ─────────────────────────────────────────────────────────────
# PARSER ERRORS
# ─────────────────────────────────────────────────────────────

class ParserErrorTest(CommandTestCase):

    def test_unknown_flag_is_usage_error(self):
        self.assertExitCode(1, 'fig1', '--alphaa', '0.6', '--beta', '0.8')

    def test_unknown_flag_from_command_line(self):
        from remote_povm.management.commands.fig1 import Command

        with patch('sys.stderr', new_callable=StringIO) as stderr:
            with self.assertRaises(SystemExit) as cm:
                Command().run_from_argv(['manage.py', 'fig1', '--alphaa', '0.6'])
        self.assertEqual(cm.exception.code, 1)
        self.assertIn('unrecognized arguments', stderr.getvalue())
