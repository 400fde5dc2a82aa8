"""
Tests for the compiled remote protocol, the one-bit discrimination protocol
and the capability experiments.
"""
import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from remote_povm import fixtures
from remote_povm.models import SimulationMode
from remote_povm.services import (
    InvalidMeasurementError,
    LinalgService,
    PovmService,
    ProtocolError,
    ProtocolService,
)

DISCRIMINATION_COST = 0.543564


def within_four_sigma(count, shots, probability):
    sigma = np.sqrt(probability * (1 - probability) / shots)
    return abs(count / shots - probability) <= 4 * sigma + 1e-12


# ─────────────────────────────────────────────────────────────
# COMPILATION
# ─────────────────────────────────────────────────────────────

class CompileRemotePovmTest(SimpleTestCase):

    def compile(self, povm):
        return ProtocolService.compile_remote_povm(PovmService.oe_decompose(povm))

    def test_discrimination_resource(self):
        program = self.compile(fixtures.fixture_a())
        coefficients = LinalgService.schmidt(program.resource, ['A']).coefficients
        assert_allclose(coefficients, [np.sqrt(0.875), np.sqrt(0.125)], atol=1e-9)
        self.assertEqual(program.retained, (0, 3))
        self.assertEqual(program.message_bits, 2)

    def test_projective_resource_is_one_ebit(self):
        program = self.compile(fixtures.fixture_b())
        coefficients = LinalgService.schmidt(program.resource, ['A']).coefficients
        assert_allclose(coefficients, [1 / np.sqrt(2)] * 2, atol=1e-9)

    def test_coupling_is_block_diagonal_frame(self):
        d = PovmService.oe_decompose(fixtures.fixture_a())
        program = ProtocolService.compile_remote_povm(d)
        self.assertEqual(program.bob_coupling.shape, (8, 8))
        self.assertTrue(LinalgService.is_unitary(program.bob_coupling))
        for index, tau in enumerate(d.frame):
            assert_allclose(program.bob_coupling[2 * index:2 * index + 2, 2 * index:2 * index + 2], tau)

    def test_alice_unitary_is_transpose(self):
        d = PovmService.oe_decompose(fixtures.fixture_a())
        program = ProtocolService.compile_remote_povm(d)
        assert_allclose(program.alice_unitary, d.unitary.T)

    def test_trivial_measurement_register_padded(self):
        program = self.compile(fixtures.fixture_c())
        self.assertEqual(program.ancilla_dim, 1)
        self.assertEqual(program.register_dim, 2)
        self.assertEqual(program.resource.layout, (('A', 2), ('b', 4)))

    def test_three_qubits_exceed_simulation_limit(self):
        d = PovmService.oe_decompose(fixtures.projective_z(3))
        with self.assertRaises(ProtocolError):
            ProtocolService.compile_remote_povm(d)

    def test_complementary_basis_signs(self):
        basis = ProtocolService.complementary_basis(1)
        self.assertTrue(LinalgService.is_unitary(basis))
        for eta in range(4):
            for mu in range(4):
                sign = (-1) ** bin(eta & mu).count('1')
                self.assertAlmostEqual(basis[mu, eta].real, sign / 2, places=12)

    def test_phase_correction_leaves_completion_levels(self):
        correction = ProtocolService.phase_correction(3, (0, 3), 3)
        assert_allclose(np.diag(correction), [1, 1, 1])
        correction = ProtocolService.phase_correction(1, (0, 3), 3)
        assert_allclose(np.diag(correction), [1, -1, 1])


# ─────────────────────────────────────────────────────────────
# REMOTE EXECUTION
# ─────────────────────────────────────────────────────────────

class RunRemotePovmTest(SimpleTestCase):

    def test_discrimination_on_plus_state(self):
        result = ProtocolService.run_remote_povm(fixtures.fixture_a(), fixtures.psi_pm(0.6, 0.8, 1))
        assert_allclose(result.outcome_distribution, [0.72, 0.28], atol=1e-9)
        self.assertAlmostEqual(result.entanglement_consumed, DISCRIMINATION_COST, delta=1e-6)

    def test_projective_on_plus(self):
        psi = fixtures.system_state([1, 1])
        result = ProtocolService.run_remote_povm(fixtures.fixture_b(), psi)
        assert_allclose(result.outcome_distribution, [0.5, 0.5], atol=1e-9)
        self.assertAlmostEqual(LinalgService.fidelity(result.post_states[0], fixtures.system_state([1, 0])), 1.0, places=9)
        self.assertAlmostEqual(LinalgService.fidelity(result.post_states[1], fixtures.system_state([0, 1])), 1.0, places=9)

    def test_projective_on_zero(self):
        result = ProtocolService.run_remote_povm(fixtures.fixture_b(), fixtures.system_state([1, 0]))
        assert_allclose(result.outcome_distribution, [1.0, 0.0], atol=1e-12)
        self.assertNotIn(1, result.post_states)

    def test_trivial_measurement_consumes_nothing(self):
        result = ProtocolService.run_remote_povm(fixtures.fixture_c(), fixtures.system_state([1, 1]))
        assert_allclose(result.outcome_distribution, [1.0], atol=1e-12)
        self.assertAlmostEqual(result.entanglement_consumed, 0.0, places=12)

    def test_message_widths(self):
        result = ProtocolService.run_remote_povm(fixtures.fixture_a(), fixtures.psi_pm())
        self.assertEqual(result.transcript.bits_bob_to_alice, 2)
        self.assertEqual(result.transcript.bits_alice_to_bob, 0)

        reported = ProtocolService.run_remote_povm(fixtures.fixture_a(), fixtures.psi_pm(), report_outcome=True)
        self.assertEqual(reported.transcript.bits_bob_to_alice, 2)
        self.assertEqual(reported.transcript.bits_alice_to_bob, 1)

    def test_two_qubit_message_width(self):
        psi = fixtures.system_state([1, 0, 0, 0], n=2)
        result = ProtocolService.run_remote_povm(fixtures.projective_z(2), psi)
        self.assertEqual(result.transcript.bits_bob_to_alice, 4)
        assert_allclose(result.outcome_distribution, [1, 0, 0, 0], atol=1e-12)

    def test_complementary_outcomes_uniform(self):
        result = ProtocolService.run_remote_povm(fixtures.fixture_a(), fixtures.psi_pm())
        self.assertEqual(sorted(result.eta_distribution), [0, 1, 2, 3])
        for probability in result.eta_distribution.values():
            self.assertAlmostEqual(probability, 0.25, places=10)

    def test_pauli_axes_matches_born_rule(self):
        psi = fixtures.system_state([0.3, 0.4 + 0.5j])
        distance = ProtocolService.compare_remote_vs_local(fixtures.pauli_axes_povm(), psi)
        self.assertLess(distance, 1e-9)

    def test_wrong_input_dimension(self):
        with self.assertRaises(ProtocolError):
            ProtocolService.run_remote_povm(fixtures.fixture_b(), fixtures.system_state([1, 0, 0, 0], n=2))

    def test_sampled_run_is_single_outcome(self):
        result = ProtocolService.run_remote_povm(
            fixtures.fixture_a(), fixtures.psi_pm(), mode=SimulationMode.SAMPLED, seed=4,
        )
        self.assertEqual(sorted(result.outcome_distribution.tolist()), [0.0, 1.0])


class RemoteMatchesLocalTest(SimpleTestCase):

    def check_random_cases(self, n, count, seed):
        rng = np.random.default_rng(seed)
        for case in range(count):
            povm = PovmService.random_povm(n, rng)
            psi = LinalgService.random_state((('B', 2 ** n),), rng)

            result = ProtocolService.run_remote_povm(povm, psi)
            local = PovmService.povm_distribution(povm, psi)
            self.assertLess(0.5 * np.sum(np.abs(result.outcome_distribution - local)), 1e-9, msg=f"case {case}")

            for outcome, fidelity in ProtocolService.post_state_fidelities(povm, psi, result).items():
                self.assertGreater(fidelity, 1 - 1e-9, msg=f"case {case}, outcome {outcome}")

    def test_random_single_qubit(self):
        self.check_random_cases(1, 50, seed=101)

    def test_random_two_qubit(self):
        self.check_random_cases(2, 10, seed=202)

    def test_entangled_basis_measurement(self):
        povm = fixtures.entangled_basis_povm()
        psi = LinalgService.random_state((('B', 4),), np.random.default_rng(303))
        result = ProtocolService.run_remote_povm(povm, psi)

        assert_allclose(result.outcome_distribution, PovmService.povm_distribution(povm, psi), atol=1e-9)
        self.assertAlmostEqual(result.entanglement_consumed, 2.0, places=9)
        self.assertEqual(result.transcript.bits_bob_to_alice, 4)
        for outcome, fidelity in ProtocolService.post_state_fidelities(povm, psi, result).items():
            self.assertGreater(fidelity, 1 - 1e-9, msg=f"outcome {outcome}")

    def test_local_reference_agrees(self):
        psi = fixtures.psi_pm()
        assert_allclose(ProtocolService.run_local_povm(fixtures.fixture_a(), psi), [0.72, 0.28], atol=1e-9)
        assert_allclose(ProtocolService.run_local_povm(fixtures.fixture_c(), psi), [1.0], atol=1e-12)

    def test_trivial_measurement_distance(self):
        psi = fixtures.system_state([1, 2j])
        self.assertLess(ProtocolService.compare_remote_vs_local(fixtures.fixture_c(), psi), 1e-12)


class SampledRemoteTest(SimpleTestCase):

    def test_frequencies_within_four_sigma(self):
        shots = 2000
        counts = ProtocolService.sample_remote_povm(fixtures.fixture_a(), fixtures.psi_pm(), shots, seed=31)
        self.assertEqual(counts.sum(), shots)
        self.assertTrue(within_four_sigma(counts[0], shots, 0.72))

    def test_hundred_thousand_shots(self):
        shots = 100000
        counts = ProtocolService.sample_remote_povm(fixtures.fixture_a(), fixtures.psi_pm(), shots, seed=20020313)
        self.assertEqual(counts.sum(), shots)
        self.assertTrue(within_four_sigma(counts[0], shots, 0.72))

    def test_reproducible(self):
        first = ProtocolService.sample_remote_povm(fixtures.fixture_b(), fixtures.system_state([1, 1]), 200, seed=8)
        second = ProtocolService.sample_remote_povm(fixtures.fixture_b(), fixtures.system_state([1, 1]), 200, seed=8)
        assert_allclose(first, second)


# ─────────────────────────────────────────────────────────────
# ONE-BIT DISCRIMINATION PROTOCOL
# ─────────────────────────────────────────────────────────────

class Fig1ProtocolTest(SimpleTestCase):

    def test_plus_state(self):
        result = ProtocolService.fig1_protocol(0.6, 0.8, 1)
        self.assertAlmostEqual(result.outcome0_prob, 0.72, places=9)
        self.assertAlmostEqual(result.bob_guess_correct_prob_given_outcome0, 1.0, places=9)
        self.assertAlmostEqual(result.e_consumed, DISCRIMINATION_COST, delta=1e-6)
        self.assertEqual(result.sigma_x_distribution, {0: 1.0})

    def test_minus_state(self):
        result = ProtocolService.fig1_protocol(0.6, 0.8, -1)
        self.assertAlmostEqual(result.outcome0_prob, 0.72, places=9)
        self.assertAlmostEqual(result.bob_guess_correct_prob_given_outcome0, 1.0, places=9)
        self.assertEqual(result.sigma_x_distribution, {1: 1.0})

    def test_one_bit_each_way(self):
        result = ProtocolService.fig1_protocol(0.6, 0.8, 1)
        self.assertEqual(result.transcript.bits_bob_to_alice, 1)
        self.assertEqual(result.transcript.bits_alice_to_bob, 1)

        leaves = {event['branch'] for event in result.transcript.events if event['branch'] != '*'}
        for leaf in leaves:
            path = result.transcript.bits_on_path(leaf)
            self.assertLessEqual(path['bob_to_alice'], 1)
            self.assertLessEqual(path['alice_to_bob'], 1)

    def test_bit_distributions(self):
        result = ProtocolService.fig1_protocol(0.6, 0.8, 1)
        self.assertAlmostEqual(result.bob_bit_distribution[0], 0.5, places=10)
        self.assertAlmostEqual(result.bob_bit_distribution[1], 0.5, places=10)
        self.assertAlmostEqual(result.alice_bit_distribution[0], 0.72, places=9)
        self.assertAlmostEqual(result.alice_bit_distribution[1], 0.28, places=9)

    def test_equal_amplitudes_need_no_entanglement(self):
        result = ProtocolService.fig1_protocol(1 / np.sqrt(2), 1 / np.sqrt(2), 1)
        self.assertAlmostEqual(result.outcome0_prob, 1.0, places=9)
        self.assertAlmostEqual(result.e_consumed, 0.0, places=9)
        self.assertAlmostEqual(result.bob_guess_correct_prob_given_outcome0, 1.0, places=9)

    def test_alpha_above_beta_rejected(self):
        with self.assertRaises(InvalidMeasurementError):
            ProtocolService.fig1_protocol(0.8, 0.6, 1)

    def test_bad_sign_rejected(self):
        with self.assertRaises(ProtocolError):
            ProtocolService.fig1_protocol(0.6, 0.8, 0)

    def test_cost_decreases_with_alpha(self):
        costs = [
            ProtocolService.fig1_protocol(alpha, np.sqrt(1 - alpha ** 2), 1).e_consumed
            for alpha in np.linspace(0.1, 0.7, 9)
        ]
        for previous, current in zip(costs, costs[1:]):
            self.assertLess(current, previous)

    def test_tiny_alpha_costs_almost_one_ebit(self):
        alpha = 1e-3
        result = ProtocolService.fig1_protocol(alpha, np.sqrt(1 - alpha ** 2), 1)
        self.assertGreater(result.e_consumed, 0.999)
        self.assertLessEqual(result.e_consumed, 1.0 + 1e-12)

    def test_cost_matches_oe_decomposition(self):
        d = PovmService.oe_decompose(fixtures.fixture_a())
        result = ProtocolService.fig1_protocol(0.6, 0.8, 1)
        self.assertAlmostEqual(result.e_consumed, PovmService.entanglement_cost(d), places=9)

    def test_sampled_counts(self):
        shots = 2000
        counts = ProtocolService.sample_fig1(0.6, 0.8, 1, shots, seed=17)
        self.assertTrue(within_four_sigma(counts['outcome0'], shots, 0.72))
        self.assertTrue(within_four_sigma(counts['bob_bit_ones'], shots, 0.5))
        self.assertEqual(counts['correct_guesses'], counts['outcome0'])
        self.assertEqual(counts['bits_bob_to_alice'], shots)
        self.assertEqual(counts['bits_alice_to_bob'], shots)

    def test_sampled_hundred_thousand_shots(self):
        shots = 100000
        counts = ProtocolService.sample_fig1(0.6, 0.8, 1, shots, seed=20020313)
        self.assertTrue(within_four_sigma(counts['outcome0'], shots, 0.72))
        self.assertEqual(counts['correct_guesses'], counts['outcome0'])
        self.assertEqual(counts['bits_bob_to_alice'], shots)
        self.assertEqual(counts['bits_alice_to_bob'], shots)

    def test_sampled_minus_guesses(self):
        counts = ProtocolService.sample_fig1(0.6, 0.8, -1, 500, seed=3)
        self.assertEqual(counts['correct_guesses'], counts['outcome0'])


# ─────────────────────────────────────────────────────────────
# ENTANGLEMENT CAPABILITY
# ─────────────────────────────────────────────────────────────

class CapabilityTest(SimpleTestCase):

    def test_epr_experiment_matches_cost(self):
        for povm, expected in (
            (fixtures.fixture_b(), 1.0),
            (fixtures.fixture_a(), DISCRIMINATION_COST),
            (fixtures.fixture_c(), 0.0),
        ):
            d = PovmService.oe_decompose(povm)
            self.assertAlmostEqual(ProtocolService.capability_epr_experiment(d), expected, delta=1e-6)

    def test_orthogonal_form_state_normalized(self):
        d = PovmService.oe_decompose(fixtures.pauli_axes_povm())
        state = ProtocolService.orthogonal_form_state(d, fixtures.system_state([0.6, 0.8j]))
        self.assertAlmostEqual(state.norm, 1.0, places=10)
        self.assertEqual(state.subsystems, ('A', 'B'))

    def test_search_bounded_by_epr(self):
        rng = np.random.default_rng(55)
        for case in range(25):
            d = PovmService.oe_decompose(PovmService.random_povm(1, rng))
            epr = ProtocolService.capability_epr_experiment(d)
            self.assertAlmostEqual(epr, PovmService.entanglement_cost(d), places=9, msg=f"case {case}")
            self.assertLessEqual(ProtocolService.capability_search(d, 20, seed=case), epr + 1e-9)

    def test_thousand_trial_search_on_fixtures(self):
        for name, povm in (('A', fixtures.fixture_a()), ('B', fixtures.fixture_b()), ('C', fixtures.fixture_c())):
            d = PovmService.oe_decompose(povm)
            epr = ProtocolService.capability_epr_experiment(d)
            search = ProtocolService.capability_search(d, 1000, seed=2024)
            self.assertLessEqual(search, epr + 1e-9, msg=f"fixture {name}")
            self.assertGreaterEqual(search, 0.0, msg=f"fixture {name}")

    def test_search_needs_a_trial(self):
        d = PovmService.oe_decompose(fixtures.fixture_b())
        with self.assertRaises(ProtocolError):
            ProtocolService.capability_search(d, 0)
