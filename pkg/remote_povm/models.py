"""
Domain models for the remote POVM lab.

These are immutable value records, not database tables: every computation in
the services layer consumes and produces them.
"""
from dataclasses import dataclass, field
from enum import Enum
from math import prod
from typing import TYPE_CHECKING, Dict, Optional, Sequence, Tuple

import numpy as np

if TYPE_CHECKING:
    from .services.locc_service import Transcript


class Party(str, Enum):
    """The two LOCC parties."""
    ALICE = 'alice'
    BOB = 'bob'


class SimulationMode(str, Enum):
    """How measurements are resolved in a session."""
    EXACT = 'exact'
    SAMPLED = 'sampled'


def _frozen_array(values, dtype=complex) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """
    Pure joint state over an ordered list of subsystems.

    The first subsystem in the layout is the slowest-varying index.
    """
    amplitudes: np.ndarray
    layout: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        object.__setattr__(self, 'amplitudes', _frozen_array(self.amplitudes).reshape(-1))
        object.__setattr__(self, 'layout', tuple((str(name), int(dim)) for name, dim in self.layout))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def subsystems(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.layout)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(dim for _, dim in self.layout)

    def index_of(self, subsystem: str) -> int:
        return self.subsystems.index(subsystem)

    def dim_of(self, subsystems: Sequence[str]) -> int:
        lookup = dict(self.layout)
        return prod(lookup[name] for name in subsystems)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __str__(self):
        return f"StateVector(dim={self.dim}, layout={self.layout})"


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """Schmidt coefficients (descending) with matching basis vectors as columns."""
    coefficients: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.coefficients)


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Measurement given by Kraus operators M_mu with sum M^dagger M = I."""
    n_qubits: int
    operators: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, 'operators', tuple(_frozen_array(op) for op in self.operators))

    @property
    def count(self) -> int:
        return len(self.operators)

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def elements(self) -> Tuple[np.ndarray, ...]:
        """POVM elements F_mu = M_mu^dagger M_mu."""
        return tuple(op.conj().T @ op for op in self.operators)


@dataclass(frozen=True, eq=False)
class Povm:
    """Measurement given by PSD elements F_mu summing to the identity."""
    n_qubits: int
    elements: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, 'elements', tuple(_frozen_array(el) for el in self.elements))

    @property
    def count(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits


@dataclass(frozen=True, eq=False)
class OEDecomposition:
    """
    Orthogonal-equivalent form of a POVM's hermitian roots.

    sqrt(F_nu) = sum over retained j of unitary[j, nu] * alphas[retained[j]] * frame[retained[j]]
    """
    alphas: np.ndarray
    unitary: np.ndarray
    retained: Tuple[int, ...]
    source_roots: KrausSet
    coefficients: np.ndarray
    frame: Tuple[np.ndarray, ...]
    frame_kind: str = 'pauli'

    @property
    def n_qubits(self) -> int:
        return self.source_roots.n_qubits

    @property
    def outcome_count(self) -> int:
        return self.source_roots.count

    @property
    def register_dim(self) -> int:
        """Alice's ancilla dimension K' = max(K, |retained|)."""
        return self.unitary.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """Schmidt weights alpha^2 of the required resource."""
        return self.alphas ** 2


@dataclass(frozen=True, eq=False)
class RemotePovmProgram:
    """
    Compiled two-party program realising a POVM from its OE decomposition.

    resource lives on (A, b); bob_coupling acts on (b, B); alice_unitary is the
    matrix Alice applies to A after the phase correction, i.e. the transpose of
    the decomposition's U, so that <nu|W|j> = U[j, nu].
    """
    n_qubits: int
    resource: StateVector
    bob_coupling: np.ndarray
    alice_unitary: np.ndarray
    outcome_count: int
    retained: Tuple[int, ...]

    @property
    def ancilla_dim(self) -> int:
        """K' = max(K, |retained|)."""
        return self.alice_unitary.shape[0]

    @property
    def register_dim(self) -> int:
        """Dimension of Alice's register A; a one-level ancilla is padded to a qubit."""
        return max(self.ancilla_dim, 2)

    @property
    def message_bits(self) -> int:
        """Width of Bob's complementary-basis report."""
        return 2 * self.n_qubits


@dataclass(frozen=True, eq=False)
class RemoteRunResult:
    outcome_distribution: np.ndarray
    post_states: Dict[int, StateVector]
    entanglement_consumed: float
    transcript: 'Transcript'
    eta_distribution: Dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Fig1Result:
    """Outcome of the scripted discrimination protocol."""
    bob_guess_correct_prob_given_outcome0: float
    outcome0_prob: float
    e_consumed: float
    transcript: 'Transcript'
    bob_bit_distribution: Dict[int, float] = field(default_factory=dict)
    alice_bit_distribution: Dict[int, float] = field(default_factory=dict)
    sigma_x_distribution: Dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class CommandConfig:
    """Validated command-line configuration."""
    command: str
    mode: SimulationMode = SimulationMode.EXACT
    input: Optional[str] = None
    output: Optional[str] = None
    seed: Optional[int] = None
    shots: Optional[int] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    n: Optional[int] = None
    count: Optional[int] = None
