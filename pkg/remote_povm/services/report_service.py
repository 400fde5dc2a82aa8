"""
Report assembly for the management commands: document loading, POVM digests,
analysis/simulation summaries and the random property suite.
"""
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..conf import get_tolerances
from ..models import KrausSet, Povm, SimulationMode, StateVector
from .linalg_service import LinalgService, RemotePovmError
from .povm_service import NotOrthogonalEquivalentError, PovmService
from .protocol_service import ProtocolService

logger = logging.getLogger(__name__)

Measurement = Union[Povm, KrausSet]

# Thresholds of the random property suite
SUITE_LIMITS = {
    'oe_residual': 1e-7,
    'reconstruction_error': 1e-8,
    'tv_distance': 1e-9,
    'fidelity_loss': 1e-9,
    'eta_deviation': 1e-10,
    'imag_residual': 1e-10,
    'capability_gap': 1e-9,
}


class InvalidDocumentError(RemotePovmError):
    """Custom exception for unreadable or malformed measurement documents."""
    pass


def jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays (recursively) into plain JSON types."""
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _pair(value: complex, digits: Optional[int] = None) -> List[float]:
    re, im = float(np.real(value)), float(np.imag(value))
    if digits is not None:
        re, im = round(re, digits) + 0.0, round(im, digits) + 0.0
    return [re, im]


class ReportService:
    """
    Service building the JSON reports and text tables printed by the CLI.
    """

    @staticmethod
    def measurement_document(m: Measurement, digits: Optional[int] = None) -> Dict[str, Any]:
        """Schema document {n_qubits, kind, operators} for a POVM or Kraus set."""
        kind = 'povm' if isinstance(m, Povm) else 'kraus'
        operators = m.elements if kind == 'povm' else m.operators
        return {
            'n_qubits': m.n_qubits,
            'kind': kind,
            'operators': [[[_pair(x, digits) for x in row] for row in op] for op in operators],
        }

    @classmethod
    def povm_digest(cls, m: Measurement) -> str:
        """SHA-256 of the canonical document rounded to 12 decimals."""
        canonical = json.dumps(cls.measurement_document(m, digits=12), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    @classmethod
    def load_measurement(cls, path: str) -> Tuple[str, Povm, Optional[KrausSet], Optional[StateVector]]:
        """
        Read a measurement document.

        Returns:
            (kind, povm, kraus set or None, optional input state)

        Raises:
            InvalidDocumentError: If the file cannot be read or fails validation
            InvalidMeasurementError: If the operators violate POVM/Kraus invariants
        """
        from ..forms import MeasurementDocumentForm

        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as e:
            raise InvalidDocumentError(f"Cannot read {path}: {e}")

        form = MeasurementDocumentForm(data={'document': text})
        if not form.is_valid():
            messages = '; '.join(str(m) for errors in form.errors.values() for m in errors)
            logger.error(f"Invalid measurement document {path}: {messages}")
            raise InvalidDocumentError(messages)

        parsed = form.cleaned_data['document']
        n = parsed['n_qubits']
        if parsed['kind'] == 'kraus':
            ks = PovmService.make_kraus_set(parsed['operators'], n)
            povm = PovmService.povm_from_kraus(ks)
        else:
            ks = None
            povm = PovmService.make_povm(parsed['operators'], n)

        state = None
        if parsed.get('state') is not None:
            state = LinalgService.state(parsed['state'], (('B', 2 ** n),))
        return parsed['kind'], povm, ks, state

    @staticmethod
    def default_state(n: int) -> StateVector:
        return LinalgService.basis_state(0, (('B', 2 ** n),))

    @classmethod
    def analyze(cls, kind: str, povm: Povm, ks: Optional[KrausSet] = None) -> Dict[str, Any]:
        """
        OE analysis of a measurement.

        Raises:
            NotOrthogonalEquivalentError: If the hermitian roots admit no OE form
        """
        d = PovmService.oe_decompose(povm)
        roots_oe = PovmService.oe_residual(d.coefficients) < get_tolerances().oe_offdiag
        input_oe = PovmService.is_oe(ks) if ks is not None else roots_oe
        unitary = d.unitary
        unitary_residual = float(np.max(np.abs(LinalgService.dagger(unitary) @ unitary - np.eye(unitary.shape[0]))))

        labels = [
            PovmService.pauli_label(index, povm.n_qubits) if d.frame_kind == 'pauli' else str(index)
            for index in d.retained
        ]

        return {
            'command': 'analyze',
            'povm_digest': cls.povm_digest(ks if ks is not None else povm),
            'kind': kind,
            'n_qubits': povm.n_qubits,
            'outcome_count': povm.count,
            'oe_verdict': 'OE' if input_oe else 'not OE',
            'roots_oe_verdict': 'OE' if roots_oe else 'not OE',
            'frame': d.frame_kind,
            'alphas_squared': d.weights,
            'retained': list(d.retained),
            'retained_labels': labels,
            'e_povm': PovmService.entanglement_cost(d),
            'unitary_residual': unitary_residual,
            'reconstruction_error': PovmService.reconstruction_error(d),
            'passed': True,
        }

    @classmethod
    def remote_run(
        cls,
        povm: Povm,
        psi: StateVector,
        mode: SimulationMode = SimulationMode.EXACT,
        shots: int = 0,
        seed: int = 0,
    ) -> Dict[str, Any]:
        """Remote-vs-local comparison, with sampled frequencies in sampled mode."""
        result = ProtocolService.run_remote_povm(povm, psi, report_outcome=True)
        local = PovmService.povm_distribution(povm, psi)
        tv = float(0.5 * np.sum(np.abs(result.outcome_distribution - local)))
        fidelities = ProtocolService.post_state_fidelities(povm, psi, result)
        min_fidelity = min(fidelities.values()) if fidelities else 1.0
        eta_deviation = cls._eta_deviation(result.eta_distribution, povm.n_qubits)

        report = {
            'command': 'remote_run',
            'povm_digest': cls.povm_digest(povm),
            'n_qubits': povm.n_qubits,
            'mode': SimulationMode(mode).value,
            'remote_distribution': result.outcome_distribution,
            'local_distribution': local,
            'tv_distance': tv,
            'min_fidelity': min_fidelity,
            'eta_deviation': eta_deviation,
            'e_consumed': result.entanglement_consumed,
            'bits_bob_to_alice': result.transcript.bits_bob_to_alice,
            'bits_alice_to_bob': result.transcript.bits_alice_to_bob,
        }
        passed = (
            tv < SUITE_LIMITS['tv_distance']
            and 1.0 - min_fidelity < SUITE_LIMITS['fidelity_loss']
            and eta_deviation < SUITE_LIMITS['eta_deviation']
        )

        if SimulationMode(mode) is SimulationMode.SAMPLED:
            counts = ProtocolService.sample_remote_povm(povm, psi, shots, seed)
            sampled = cls._sampled_summary(counts, result.outcome_distribution, shots)
            report.update({'shots': shots, 'seed': seed, 'sampled': sampled})
            passed = passed and sampled['within_4_sigma']

        report['passed'] = bool(passed)
        return report

    @staticmethod
    def _eta_deviation(eta_distribution: Dict[int, float], n: int) -> float:
        expected = 4.0 ** (-n)
        return max(abs(eta_distribution.get(eta, 0.0) - expected) for eta in range(4 ** n))

    @staticmethod
    def _within_sigma(count: int, shots: int, probability: float, sigmas: float = 4.0) -> bool:
        error = math.sqrt(probability * (1 - probability) / shots)
        # a zero-variance outcome must match exactly
        return abs(count / shots - probability) <= max(sigmas * error, 1e-12)

    @classmethod
    def _sampled_summary(cls, counts: np.ndarray, exact: np.ndarray, shots: int) -> Dict[str, Any]:
        frequencies = counts / shots
        within = all(cls._within_sigma(int(c), shots, float(p)) for c, p in zip(counts, exact))
        return {'counts': counts, 'frequencies': frequencies, 'within_4_sigma': within}

    @classmethod
    def capability(cls, povm: Povm, trials: int, seed: int) -> Dict[str, Any]:
        """Capability chain: search <= EPR experiment = entanglement cost."""
        d = PovmService.oe_decompose(povm)
        cost = PovmService.entanglement_cost(d)
        epr = ProtocolService.capability_epr_experiment(d)
        search = ProtocolService.capability_search(d, trials, seed)
        gap = abs(epr - cost)
        return {
            'command': 'capability',
            'povm_digest': cls.povm_digest(povm),
            'n_qubits': povm.n_qubits,
            'e_povm': cost,
            'capability_epr': epr,
            'capability_search': search,
            'trials': trials,
            'seed': seed,
            'capability_gap': gap,
            'passed': bool(gap < SUITE_LIMITS['capability_gap'] and search <= epr + 1e-9),
        }

    @classmethod
    def fig1(
        cls,
        alpha: float,
        beta: float,
        mode: SimulationMode = SimulationMode.SAMPLED,
        shots: int = 0,
        seed: int = 0,
    ) -> Dict[str, Any]:
        """Exact discrimination figures for both signs, plus sampled frequencies for '+'."""
        plus = ProtocolService.fig1_protocol(alpha, beta, 1)
        minus = ProtocolService.fig1_protocol(alpha, beta, -1)

        report = {
            'command': 'fig1',
            'alpha': alpha,
            'beta': beta,
            'mode': SimulationMode(mode).value,
            'outcome0_prob': plus.outcome0_prob,
            'success_given_outcome0': plus.bob_guess_correct_prob_given_outcome0,
            'success_given_outcome0_minus': minus.bob_guess_correct_prob_given_outcome0,
            'e_consumed': plus.e_consumed,
            'bob_bit_distribution': plus.bob_bit_distribution,
            'alice_bit_distribution': plus.alice_bit_distribution,
            'bits_bob_to_alice': plus.transcript.bits_bob_to_alice,
            'bits_alice_to_bob': plus.transcript.bits_alice_to_bob,
        }
        passed = (
            plus.transcript.bits_bob_to_alice == 1
            and plus.transcript.bits_alice_to_bob == 1
            and abs(plus.bob_guess_correct_prob_given_outcome0 - 1.0) < get_tolerances().probability
        )

        if SimulationMode(mode) is SimulationMode.SAMPLED:
            counts = ProtocolService.sample_fig1(alpha, beta, 1, shots, seed)
            within = cls._within_sigma(counts['outcome0'], shots, plus.outcome0_prob)
            report.update({
                'shots': shots,
                'seed': seed,
                'sampled': {
                    'outcome0_frequency': counts['outcome0'] / shots,
                    'correct_guesses': counts['correct_guesses'],
                    'bob_bit_one_frequency': counts['bob_bit_ones'] / shots,
                    'bits_bob_to_alice': counts['bits_bob_to_alice'],
                    'bits_alice_to_bob': counts['bits_alice_to_bob'],
                    'within_4_sigma': within,
                },
            })
            passed = passed and within and counts['correct_guesses'] == counts['outcome0']

        report['passed'] = bool(passed)
        return report

    @classmethod
    def random_case(cls, n: int, seed_sequence: np.random.SeedSequence, index: int) -> Dict[str, Any]:
        """One random (POVM, state) case of the property suite."""
        rng = np.random.default_rng(seed_sequence)
        povm = PovmService.random_povm(n, rng)
        psi = LinalgService.random_state((('B', 2 ** n),), rng)
        case: Dict[str, Any] = {'index': index, 'outcome_count': povm.count, 'povm_digest': cls.povm_digest(povm)}

        try:
            d = PovmService.oe_decompose(povm)
        except NotOrthogonalEquivalentError as e:
            logger.error(f"Case {index}: {e}")
            case.update({'error': str(e), 'passed': False})
            return case

        result = ProtocolService.run_remote_povm(povm, psi)
        fidelities = ProtocolService.post_state_fidelities(povm, psi, result)
        cost = PovmService.entanglement_cost(d)

        residuals = {
            'oe_residual': PovmService.oe_residual(d.coefficients),
            'reconstruction_error': PovmService.reconstruction_error(d),
            'tv_distance': float(0.5 * np.sum(np.abs(
                result.outcome_distribution - PovmService.povm_distribution(povm, psi)
            ))),
            'fidelity_loss': 1.0 - min(fidelities.values()) if fidelities else 0.0,
            'eta_deviation': cls._eta_deviation(result.eta_distribution, n),
            'imag_residual': float(np.max(np.abs(np.imag(d.coefficients)))),
            'capability_gap': abs(ProtocolService.capability_epr_experiment(d) - cost),
        }
        passed = all(residuals[key] < limit for key, limit in SUITE_LIMITS.items())
        passed = passed and -1e-12 <= cost <= 2 * n + 1e-12

        case.update(residuals)
        case.update({'frame': d.frame_kind, 'e_povm': cost, 'passed': bool(passed)})
        return case

    @classmethod
    def random_suite(cls, n: int, count: int, seed: int) -> Dict[str, Any]:
        """
        Property suite over seeded random POVMs; cases run in index order and
        each owns its sub-seed, so any slice of the suite can be rerun alone.
        """
        cases = [cls.random_case(n, child, index) for index, child in enumerate(np.random.SeedSequence(seed).spawn(count))]

        worst = {
            key: max((case[key] for case in cases if key in case), default=0.0)
            for key in SUITE_LIMITS
        }
        failures = [case['index'] for case in cases if not case['passed']]
        if failures:
            logger.error(f"Random suite: {len(failures)} failing case(s): {failures}")

        return {
            'command': 'random_suite',
            'n_qubits': n,
            'count': count,
            'seed': seed,
            'worst': worst,
            'limits': dict(SUITE_LIMITS),
            'failures': failures,
            'cases': cases,
            'passed': not failures,
        }

    @staticmethod
    def to_json(report: Dict[str, Any]) -> str:
        return json.dumps(jsonable(report), indent=2, sort_keys=True) + '\n'

    @classmethod
    def write_json(cls, report: Dict[str, Any], path: str) -> None:
        Path(path).write_text(cls.to_json(report), encoding='utf-8')

    @staticmethod
    def _format(value: Any) -> str:
        if isinstance(value, float):
            return f"{value:.6f}" if abs(value) >= 1e-4 or value == 0.0 else f"{value:.3e}"
        if isinstance(value, list):
            return '[' + ', '.join(ReportService._format(v) for v in value) + ']'
        if isinstance(value, dict):
            return '{' + ', '.join(f"{k}: {ReportService._format(v)}" for k, v in value.items()) + '}'
        return str(value)

    @classmethod
    def render_table(cls, report: Dict[str, Any]) -> str:
        """Two-column text table of the scalar report fields (cases are summarized)."""
        data = jsonable(report)
        rows = []
        for key in sorted(data):
            if key == 'cases':
                rows.append(('cases', str(len(data['cases']))))
                continue
            rows.append((key, cls._format(data[key])))

        width = max((len(key) for key, _ in rows), default=0)
        return '\n'.join(f"{key.ljust(width)}  {value}" for key, value in rows) + '\n'
