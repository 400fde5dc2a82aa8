"""
Remote POVM protocols built on the LOCC session engine.

Subsystems: A is Alice's ancilla register, b is Bob's half of the resource
(2n qubits, one Pauli index), B is Bob's n-qubit system.
"""
import logging
import math
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg

from ..conf import get_setting, get_tolerances
from ..models import (
    Fig1Result,
    OEDecomposition,
    Party,
    Povm,
    RemotePovmProgram,
    RemoteRunResult,
    SimulationMode,
    StateVector,
)
from .linalg_service import LinalgService
from .locc_service import ProtocolError, Session, bits_to_int, int_to_bits
from .povm_service import IDENTITY, SIGMA_Z, PovmService

logger = logging.getLogger(__name__)

CONTROLLED_Z = np.diag([1, 1, 1, -1]).astype(complex)
X_BASIS = scipy.linalg.hadamard(2).astype(complex) / np.sqrt(2)


class ProtocolService:
    """
    Service for compiling and running remote measurements between Alice and Bob.
    """

    @staticmethod
    def _max_simulation_qubits() -> int:
        return get_setting('POVM_MAX_SIMULATION_QUBITS', 2)

    @staticmethod
    def complementary_basis(n: int) -> np.ndarray:
        """Per-qubit X basis on 2n qubits; column eta has signs (-1)^popcount(eta & mu)."""
        size = 4 ** n
        return scipy.linalg.hadamard(size).astype(complex) / np.sqrt(size)

    @staticmethod
    def phase_correction(eta: int, retained, size: int) -> np.ndarray:
        """diag((-1)^(eta . r_j)) on Alice's register, +1 on completion levels."""
        signs = np.ones(size, dtype=complex)
        for j, index in enumerate(retained):
            if bin(eta & index).count('1') % 2:
                signs[j] = -1.0
        return np.diag(signs)

    @classmethod
    def compile_remote_povm(cls, d: OEDecomposition) -> RemotePovmProgram:
        """
        Turn an OE decomposition into the two-party program.

        Returns:
            RemotePovmProgram with resource sum_j alpha_{r_j} |j>_A |r_j>_b

        Raises:
            ProtocolError: If the joint state would exceed the simulation size
                or the decomposition is inconsistent
        """
        n = d.n_qubits
        if n > cls._max_simulation_qubits():
            raise ProtocolError(
                f"{n}-qubit programs exceed POVM_MAX_SIMULATION_QUBITS={cls._max_simulation_qubits()}"
            )
        if len(d.frame) != 4 ** n:
            raise ProtocolError(f"Frame of {len(d.frame)} operators does not match {n} qubits")
        if not LinalgService.is_unitary(d.unitary):
            raise ProtocolError("Decomposition unitary is not unitary")

        ancilla_dim = d.register_dim
        register_dim = max(ancilla_dim, 2)
        amplitudes = np.zeros((register_dim, 4 ** n), dtype=complex)
        for j, index in enumerate(d.retained):
            amplitudes[j, index] = d.alphas[index]
        resource = LinalgService.state(
            amplitudes.reshape(-1), (('A', register_dim), ('b', 4 ** n)), normalize=True,
        )

        coupling = scipy.linalg.block_diag(*d.frame)

        program = RemotePovmProgram(
            n_qubits=n,
            resource=resource,
            bob_coupling=coupling,
            alice_unitary=np.array(d.unitary.T),
            outcome_count=d.outcome_count,
            retained=d.retained,
        )
        logger.info(f"Compiled remote program: n={n}, K={d.outcome_count}, K'={ancilla_dim}")
        return program

    @classmethod
    def _alice_matrix(cls, program: RemotePovmProgram) -> np.ndarray:
        surplus = program.register_dim - program.ancilla_dim
        if surplus:
            return scipy.linalg.block_diag(program.alice_unitary, np.eye(surplus))
        return np.asarray(program.alice_unitary, dtype=complex)

    @classmethod
    def execute_program(
        cls,
        program: RemotePovmProgram,
        psi: StateVector,
        mode: SimulationMode = SimulationMode.EXACT,
        seed=None,
        report_outcome: bool = False,
    ) -> Session:
        """
        Run a compiled program on Bob's input state.

        Args:
            report_outcome: Also send Alice's outcome to Bob (ceil(log2 K) bits)

        Raises:
            ProtocolError: If psi does not live on n qubits
        """
        n = program.n_qubits
        if psi.dim != 2 ** n:
            raise ProtocolError(f"Input of dimension {psi.dim} does not match a {n}-qubit program")

        register_dim = program.register_dim
        width = program.message_bits
        session = Session.new_session(
            [
                ((('A', register_dim, Party.ALICE), ('b', 4 ** n, Party.BOB)), program.resource),
                ((('B', 2 ** n, Party.BOB),), psi.amplitudes),
            ],
            mode=mode,
            seed=seed,
        )

        session.local_unitary(Party.BOB, ['b', 'B'], program.bob_coupling, label='coupling')
        session.local_measure(Party.BOB, ['b'], cls.complementary_basis(n), label='eta')
        session.send_bits(Party.BOB, lambda branch: int_to_bits(branch.outcomes['eta'], width), label='eta')
        session.local_unitary(
            Party.ALICE,
            ['A'],
            lambda branch: cls.phase_correction(
                bits_to_int(branch.messages['eta']), program.retained, register_dim,
            ),
            label='phase_correction',
        )
        session.local_unitary(Party.ALICE, ['A'], cls._alice_matrix(program), label='alice_unitary')
        session.local_measure(Party.ALICE, ['A'], np.eye(register_dim), label='outcome')

        if report_outcome:
            outcome_width = math.ceil(math.log2(program.outcome_count)) if program.outcome_count > 1 else 0
            session.send_bits(
                Party.ALICE,
                lambda branch: int_to_bits(branch.outcomes['outcome'], outcome_width),
                label='outcome_report',
            )
        return session

    @staticmethod
    def bob_state(state: StateVector) -> StateVector:
        """Bob's system state on a collapsed branch (product across B | rest)."""
        decomposition = LinalgService.schmidt(state, ['B'])
        return LinalgService.state(decomposition.left_basis[:, 0], (('B', state.dim_of(['B'])),))

    @classmethod
    def run_remote_povm(
        cls,
        p: Povm,
        psi: StateVector,
        mode: SimulationMode = SimulationMode.EXACT,
        seed=None,
        report_outcome: bool = False,
    ) -> RemoteRunResult:
        """
        Implement p on Bob's state remotely, from Alice's side.

        Returns:
            RemoteRunResult; in sampled mode the distribution is the indicator
            of the drawn outcome

        Raises:
            ProtocolError: If surplus ancilla outcomes carry probability
        """
        tolerances = get_tolerances()
        d = PovmService.oe_decompose(p)
        program = cls.compile_remote_povm(d)
        session = cls.execute_program(program, psi, mode, seed, report_outcome)

        distribution = np.zeros(program.outcome_count)
        post_states: Dict[int, StateVector] = {}
        eta_distribution: Dict[int, float] = {}

        for branch in session.branches:
            outcome = branch.outcomes['outcome']
            if outcome >= program.outcome_count:
                if branch.probability > tolerances.probability:
                    raise ProtocolError(f"Completion outcome {outcome} has probability {branch.probability:.3e}")
                continue
            distribution[outcome] += branch.probability
            eta = branch.outcomes['eta']
            eta_distribution[eta] = eta_distribution.get(eta, 0.0) + branch.probability
            if outcome not in post_states:
                post_states[outcome] = cls.bob_state(branch.state)

        result = RemoteRunResult(
            outcome_distribution=distribution,
            post_states=post_states,
            entanglement_consumed=PovmService.entanglement_cost(d),
            transcript=session.transcript,
            eta_distribution=dict(sorted(eta_distribution.items())),
        )
        logger.info(
            f"Remote run ({SimulationMode(mode).value}): {session.transcript.bits_bob_to_alice} bits Bob->Alice, "
            f"{session.transcript.bits_alice_to_bob} bits Alice->Bob"
        )
        return result

    @staticmethod
    def sample_leaves(session: Session, shots: int, seed: int) -> List[tuple]:
        """
        Draw shots histories from an exact session in one generator stream.

        Returns:
            (branch, hits) pairs in branch order, hits summing to shots
        """
        leaves = list(session.branches)
        probabilities = np.array([branch.probability for branch in leaves])
        probabilities /= probabilities.sum()
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        draws = rng.choice(len(leaves), size=shots, p=probabilities)
        hits = np.bincount(draws, minlength=len(leaves))
        return list(zip(leaves, (int(h) for h in hits)))

    @classmethod
    def sample_remote_povm(cls, p: Povm, psi: StateVector, shots: int, seed: int) -> np.ndarray:
        """Outcome counts over shots runs of the program, compiled and branched once."""
        program = cls.compile_remote_povm(PovmService.oe_decompose(p))
        session = cls.execute_program(program, psi, SimulationMode.EXACT)
        counts = np.zeros(program.outcome_count, dtype=int)
        for branch, hits in cls.sample_leaves(session, shots, seed):
            outcome = branch.outcomes['outcome']
            if outcome < program.outcome_count:
                counts[outcome] += hits
        logger.info(f"Sampled {shots} remote runs over {len(session.branches)} histories")
        return counts

    @classmethod
    def run_local_povm(
        cls,
        p: Povm,
        psi: StateVector,
        mode: SimulationMode = SimulationMode.EXACT,
        seed=None,
    ) -> np.ndarray:
        """
        Reference implementation: Bob couples a private ancilla through the
        dilation of the hermitian roots and measures it himself.
        """
        roots = PovmService.hermitian_roots(p)
        operators = list(roots.operators)
        if len(operators) == 1:
            operators.append(np.zeros_like(operators[0]))
        dilation = PovmService.ancilla_dilation(PovmService.make_kraus_set(operators, p.n_qubits))

        ancilla_dim = len(operators)
        ancilla = np.zeros(ancilla_dim, dtype=complex)
        ancilla[0] = 1.0
        session = Session.new_session(
            [
                ((('A', ancilla_dim, Party.BOB),), ancilla),
                ((('B', p.dim, Party.BOB),), psi.amplitudes),
            ],
            mode=mode,
            seed=seed,
        )
        session.local_unitary(Party.BOB, ['A', 'B'], dilation, label='dilation')
        session.local_measure(Party.BOB, ['A'], np.eye(ancilla_dim), label='outcome')

        distribution = np.zeros(p.count)
        for branch in session.branches:
            outcome = branch.outcomes['outcome']
            if outcome < p.count:
                distribution[outcome] += branch.probability
        return distribution

    @staticmethod
    def expected_post_state(p: Povm, psi: StateVector, outcome: int) -> StateVector:
        """sqrt(F_mu)|psi> normalized."""
        root = LinalgService.psd_sqrt(p.elements[outcome])
        return LinalgService.state(root @ psi.amplitudes, (('B', p.dim),), normalize=True)

    @classmethod
    def post_state_fidelities(cls, p: Povm, psi: StateVector, result: RemoteRunResult) -> Dict[int, float]:
        """Fidelity of each reported Bob state with its local counterpart."""
        fidelities = {}
        for outcome, state in result.post_states.items():
            if result.outcome_distribution[outcome] <= 1e-12:
                continue
            fidelities[outcome] = LinalgService.fidelity(state, cls.expected_post_state(p, psi, outcome))
        return fidelities

    @classmethod
    def compare_remote_vs_local(cls, p: Povm, psi: StateVector) -> float:
        """Total-variation distance between the remote exact run and the Born rule."""
        remote = cls.run_remote_povm(p, psi).outcome_distribution
        local = PovmService.povm_distribution(p, psi)
        return float(0.5 * np.sum(np.abs(remote - local)))

    @staticmethod
    def fig1_angle(alpha: float, beta: float) -> float:
        """phi with cos^2 phi = (1 + alpha/beta) / 2."""
        ratio = min(alpha / beta, 1.0)
        return float(np.arccos(np.sqrt(0.5 * (1 + ratio))))

    @classmethod
    def _fig1_session(cls, alpha: float, beta: float, sign: int, mode: SimulationMode, seed) -> Session:
        PovmService.fig1_povm(alpha, beta)
        if sign not in (1, -1):
            raise ProtocolError(f"sign must be +1 or -1, got {sign}")

        phi = cls.fig1_angle(alpha, beta)
        cos_phi, sin_phi = np.cos(phi), np.sin(phi)
        rotation = np.array([[cos_phi, sin_phi], [-sin_phi, cos_phi]], dtype=complex)

        session = Session.new_session(
            [
                ((('A', 2, Party.ALICE), ('b', 2, Party.BOB)), [cos_phi, 0, 0, sin_phi]),
                ((('B', 2, Party.BOB),), [alpha, sign * beta]),
            ],
            mode=mode,
            seed=seed,
        )

        session.local_unitary(Party.BOB, ['b', 'B'], CONTROLLED_Z, label='controlled_z')
        session.local_measure(Party.BOB, ['b'], X_BASIS, label='bob_x')
        session.send_bits(Party.BOB, lambda branch: (branch.outcomes['bob_x'],), label='bob_bit')
        session.local_unitary(
            Party.ALICE,
            ['A'],
            lambda branch: SIGMA_Z if branch.messages['bob_bit'][0] else IDENTITY,
            label='z_correction',
        )
        session.local_unitary(Party.ALICE, ['A'], rotation, label='rotation')
        session.local_measure(Party.ALICE, ['A'], np.eye(2), label='alice_outcome')
        session.send_bits(Party.ALICE, lambda branch: (branch.outcomes['alice_outcome'],), label='alice_bit')
        session.local_measure(
            Party.BOB,
            ['B'],
            X_BASIS,
            label='bob_sigma_x',
            when=lambda branch: branch.messages['alice_bit'][0] == 0,
        )
        return session

    @classmethod
    def fig1_protocol(cls, alpha: float, beta: float, sign: int = 1) -> Fig1Result:
        """
        Scripted discrimination of alpha|0> +/- beta|1> with one bit each way.

        Bob guesses '+' on sigma_x outcome 0 and '-' on outcome 1, and only
        when Alice reports outcome 0.

        Raises:
            InvalidMeasurementError: If alpha > beta or the pair is not normalized
        """
        session = cls._fig1_session(alpha, beta, sign, SimulationMode.EXACT, None)

        alice_bits = session.branch_distribution('alice_bit')
        outcome0 = alice_bits.get(0, 0.0)
        sigma_x = session.branch_distribution('bob_sigma_x') if outcome0 > 0 else {}
        expected = 0 if sign == 1 else 1

        phi = cls.fig1_angle(alpha, beta)
        consumed = LinalgService.entropy_base2([np.cos(phi), np.sin(phi)])

        logger.info(f"Discrimination run alpha={alpha}, beta={beta}, sign={sign:+d}: P(0)={outcome0:.6f}, E={consumed:.6f}")
        return Fig1Result(
            bob_guess_correct_prob_given_outcome0=sigma_x.get(expected, 0.0),
            outcome0_prob=outcome0,
            e_consumed=consumed,
            transcript=session.transcript,
            bob_bit_distribution=session.branch_distribution('bob_bit'),
            alice_bit_distribution=alice_bits,
            sigma_x_distribution=sigma_x,
        )

    @classmethod
    def sample_fig1(cls, alpha: float, beta: float, sign: int, shots: int, seed: int) -> Dict[str, int]:
        """
        Counts over sampled discrimination runs.

        Returns:
            outcome0, correct_guesses, bob_bit_ones, bits_alice_to_bob, bits_bob_to_alice
        """
        counts = {'outcome0': 0, 'correct_guesses': 0, 'bob_bit_ones': 0, 'bits_alice_to_bob': 0, 'bits_bob_to_alice': 0}
        expected = 0 if sign == 1 else 1
        session = cls._fig1_session(alpha, beta, sign, SimulationMode.EXACT, None)
        for branch, hits in cls.sample_leaves(session, shots, seed):
            path_bits = session.transcript.bits_on_path(branch.branch_id)
            counts['bob_bit_ones'] += hits * branch.value('bob_bit')
            counts['bits_alice_to_bob'] += hits * path_bits['alice_to_bob']
            counts['bits_bob_to_alice'] += hits * path_bits['bob_to_alice']
            if branch.outcomes['alice_outcome'] == 0:
                counts['outcome0'] += hits
                if branch.outcomes.get('bob_sigma_x') == expected:
                    counts['correct_guesses'] += hits
        return counts

    @classmethod
    def orthogonal_form_state(cls, d: OEDecomposition, psi: StateVector) -> StateVector:
        """
        sum_mu alpha_mu |mu>_A tau_mu |psi> with tau acting on psi's 'B' subsystem.

        Raises:
            LinalgError: If psi has no 'B' subsystem of dimension 2^n
        """
        blocks: List[np.ndarray] = []
        for index, alpha in enumerate(d.alphas):
            if alpha == 0.0:
                blocks.append(np.zeros(psi.dim, dtype=complex))
                continue
            blocks.append(alpha * LinalgService.apply_on_subsystems(d.frame[index], psi, ['B']).amplitudes)
        return LinalgService.state(np.concatenate(blocks), (('A', len(d.alphas)),) + psi.layout)

    @classmethod
    def capability_epr_experiment(cls, d: OEDecomposition) -> float:
        """
        Entanglement the orthogonal-form operation creates across A | (B, R)
        when Bob's system starts maximally entangled with a reference R.
        """
        dim = 2 ** d.n_qubits
        epr = LinalgService.state(np.eye(dim).reshape(-1), (('B', dim), ('R', dim)), normalize=True)
        created = LinalgService.entanglement_entropy(cls.orthogonal_form_state(d, epr), ['A'])
        logger.debug(f"EPR capability experiment: {created:.9f} ebits")
        return created

    @classmethod
    def capability_search(cls, d: OEDecomposition, trials: int, seed: Optional[int] = None) -> float:
        """
        Best A | B entanglement over Haar-random pure inputs, without a reference.

        Raises:
            ProtocolError: If trials < 1
        """
        if trials < 1:
            raise ProtocolError("capability_search needs at least one trial")
        seed = get_setting('POVM_DEFAULT_SEED', 0) if seed is None else seed
        rng = np.random.default_rng(seed)
        layout = (('B', 2 ** d.n_qubits),)

        best = 0.0
        for _ in range(trials):
            psi = LinalgService.random_state(layout, rng)
            best = max(best, LinalgService.entanglement_entropy(cls.orthogonal_form_state(d, psi), ['A']))
        return best
