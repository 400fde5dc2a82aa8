"""
Two-party LOCC substrate: a joint pure state with subsystem ownership,
locality-checked operations, projective measurements and a classical channel.

Exact mode keeps every measurement branch with its probability; sampled mode
follows a single branch drawn from the Born distribution.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..conf import get_setting, get_tolerances
from ..models import Party, SimulationMode, StateVector
from .linalg_service import LinalgError, LinalgService, RemotePovmError

logger = logging.getLogger(__name__)


class ProtocolError(RemotePovmError):
    """Custom exception for session misuse."""
    pass


class LocalityViolation(ProtocolError):
    """Raised when a party touches a subsystem owned by the other party."""
    pass


@dataclass
class Branch:
    """One measurement history with its probability and normalized state."""
    branch_id: str
    probability: float
    state: StateVector
    outcomes: Dict[str, int] = field(default_factory=dict)
    messages: Dict[str, Tuple[int, ...]] = field(default_factory=dict)

    def value(self, label: str) -> int:
        if label in self.outcomes:
            return self.outcomes[label]
        if label in self.messages:
            return bits_to_int(self.messages[label])
        raise ProtocolError(f"Branch {self.branch_id} has no record labelled '{label}'")


BranchDependent = Union[np.ndarray, Callable[[Branch], np.ndarray]]
BitsDependent = Union[Sequence[int], Callable[[Branch], Sequence[int]]]


def bits_to_int(bits: Sequence[int]) -> int:
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value


def int_to_bits(value: int, width: int) -> Tuple[int, ...]:
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


class Transcript:
    """
    Ordered log of local operations, measurement outcomes and messages,
    with classical bit counters per direction.
    """

    def __init__(self):
        self.events: List[Dict[str, Any]] = []
        self.bits_alice_to_bob = 0
        self.bits_bob_to_alice = 0

    def record(self, party: Party, kind: str, label: str, targets=(), payload=None, branch: str = '*', **extra):
        event = {
            'seq': len(self.events),
            'party': party.value,
            'kind': kind,
            'label': label,
            'targets': list(targets),
            'payload': payload,
            'branch': branch,
        }
        event.update(extra)
        self.events.append(event)

    def count_bits(self, sender: Party, width: int) -> None:
        if sender is Party.ALICE:
            self.bits_alice_to_bob += width
        else:
            self.bits_bob_to_alice += width

    def bits_on_path(self, branch_id: str) -> Dict[str, int]:
        """Message bits sent along the history ending in branch_id."""
        totals = {'alice_to_bob': 0, 'bob_to_alice': 0}
        for event in self.events:
            if event['kind'] != 'message':
                continue
            owner = event['branch']
            if owner == branch_id or branch_id.startswith(owner + '.'):
                key = 'alice_to_bob' if event['party'] == Party.ALICE.value else 'bob_to_alice'
                totals[key] += len(event['payload'])
        return totals

    def to_json_lines(self) -> str:
        """One event per line with sorted keys, for diff-based regression tests."""
        return ''.join(json.dumps(event, sort_keys=True) + '\n' for event in self.events)


class BranchSet:
    """The live branches of a session."""

    def __init__(self, branches: List[Branch]):
        self.branches = branches

    def __iter__(self):
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)

    @property
    def total_probability(self) -> float:
        return float(sum(branch.probability for branch in self.branches))

    def distribution(self, label: str) -> Dict[int, float]:
        """
        Marginal distribution of one recorded outcome or message, conditioned
        on the branches where label was recorded.
        """
        result: Dict[int, float] = {}
        for branch in self.branches:
            if label not in branch.outcomes and label not in branch.messages:
                continue
            value = branch.value(label)
            result[value] = result.get(value, 0.0) + branch.probability
        if not result:
            raise ProtocolError(f"No branch recorded '{label}'")

        total = sum(result.values())
        return {value: probability / total for value, probability in sorted(result.items())}


class Session:
    """
    A single protocol run between Alice and Bob.

    Sessions are single-threaded; distinct sessions share no state.
    """

    def __init__(
        self,
        state: StateVector,
        ownership: Dict[str, Party],
        mode: SimulationMode = SimulationMode.EXACT,
        seed: Optional[int] = None,
    ):
        missing = set(state.subsystems) - set(ownership)
        if missing:
            raise ProtocolError(f"Subsystems without owner: {sorted(missing)}")

        self.mode = SimulationMode(mode)
        self.ownership = dict(ownership)
        self.transcript = Transcript()
        self.seed = get_setting('POVM_DEFAULT_SEED', 0) if seed is None else seed
        self.rng = np.random.default_rng(self.seed)
        self.branch_set = BranchSet([Branch('0', 1.0, state)])

    @classmethod
    def new_session(
        cls,
        groups: Sequence[Tuple[Sequence[Tuple[str, int, Party]], Any]],
        mode: SimulationMode = SimulationMode.EXACT,
        seed: Optional[int] = None,
    ) -> 'Session':
        """
        Prepare a session from state groups.

        Args:
            groups: (registers, amplitudes) pairs; registers are (id, dimension, owner)
                and a group may span both owners (a shared entangled resource)
            mode: Exact branch enumeration or sampled single-branch run
            seed: Seed for the sampled-mode generator

        Raises:
            ProtocolError: On non-normalized inputs, tiny registers or repeated ids
        """
        tolerance = get_tolerances().normalization
        joint = None
        ownership: Dict[str, Party] = {}

        for registers, amplitudes in groups:
            layout = []
            for name, dim, owner in registers:
                if int(dim) < 2:
                    raise ProtocolError(f"Register '{name}' must have dimension >= 2")
                if name in ownership:
                    raise ProtocolError(f"Register '{name}' declared twice")
                ownership[name] = Party(owner)
                layout.append((name, int(dim)))

            vector = amplitudes.amplitudes if isinstance(amplitudes, StateVector) else amplitudes
            try:
                group_state = LinalgService.state(vector, layout)
            except LinalgError as e:
                raise ProtocolError(str(e))
            if abs(group_state.norm - 1.0) > tolerance:
                raise ProtocolError(f"Initial state of {[r[0] for r in registers]} is not normalized")

            joint = group_state if joint is None else LinalgService.tensor(joint, group_state)

        if joint is None:
            raise ProtocolError("A session needs at least one register")

        logger.debug(f"New {SimulationMode(mode).value} session over {joint.layout}")
        return cls(joint, ownership, mode, seed)

    @property
    def branches(self) -> BranchSet:
        return self.branch_set

    def _check_locality(self, party: Party, targets: Sequence[str]) -> None:
        for target in targets:
            owner = self.ownership.get(target)
            if owner is None:
                raise ProtocolError(f"Unknown subsystem '{target}'")
            if owner is not party:
                raise LocalityViolation(
                    f"{party.value} cannot act on '{target}', which belongs to {owner.value}"
                )

    def _check_invariants(self) -> None:
        tolerances = get_tolerances()
        total = self.branch_set.total_probability
        if abs(total - 1.0) > tolerances.probability:
            raise ProtocolError(f"Branch probabilities sum to {total:.12f}")
        for branch in self.branch_set:
            if abs(branch.state.norm - 1.0) > tolerances.normalization:
                raise ProtocolError(f"Branch {branch.branch_id} lost normalization")

    @staticmethod
    def _resolve(value, branch: Branch):
        return value(branch) if callable(value) else value

    def local_unitary(self, party: Party, targets: Sequence[str], u: BranchDependent, label: str = '') -> 'Session':
        """
        Apply a unitary on subsystems owned by party.

        u may be a callable receiving the branch, so that operations can be
        conditioned on previously received messages.

        Raises:
            LocalityViolation: If a target belongs to the other party
            ProtocolError: If the operator is not unitary
        """
        party = Party(party)
        self._check_locality(party, targets)

        # resolve and check every branch before touching any state
        matrices = []
        for branch in self.branch_set:
            matrix = np.asarray(self._resolve(u, branch), dtype=complex)
            if not LinalgService.is_unitary(matrix):
                raise ProtocolError(f"Operation '{label}' is not unitary on branch {branch.branch_id}")
            matrices.append(matrix)

        for branch, matrix in zip(self.branch_set, matrices):
            branch.state = LinalgService.apply_on_subsystems(matrix, branch.state, targets)

        self.transcript.record(party, 'unitary', label, targets)
        self._check_invariants()
        return self

    def local_measure(
        self,
        party: Party,
        targets: Sequence[str],
        basis: np.ndarray,
        label: str,
        when: Optional[Callable[[Branch], bool]] = None,
    ) -> Union[int, None, Dict[int, float]]:
        """
        Projective measurement of targets in an orthonormal basis (columns).

        Args:
            when: Optional branch predicate; branches where it is false are left
                unmeasured and record no outcome under label

        Returns:
            Sampled mode: the drawn outcome index (None if skipped).
            Exact mode: the outcome distribution over the measured branches.

        Raises:
            LocalityViolation: If a target belongs to the other party
            ProtocolError: If the basis is not orthonormal
        """
        party = Party(party)
        self._check_locality(party, targets)
        basis = np.asarray(basis, dtype=complex)
        if not LinalgService.is_unitary(basis):
            raise ProtocolError(f"Measurement basis for '{label}' is not orthonormal")

        prune = get_tolerances().branch_prune
        projectors = [np.outer(basis[:, k], np.conj(basis[:, k])) for k in range(basis.shape[1])]
        survivors: List[Branch] = []
        measured = False

        for branch in self.branch_set:
            if when is not None and not when(branch):
                survivors.append(branch)
                continue
            measured = True

            collapsed = [LinalgService.apply_on_subsystems(p, branch.state, targets) for p in projectors]
            weights = np.array([np.vdot(s.amplitudes, s.amplitudes).real for s in collapsed])

            if self.mode is SimulationMode.SAMPLED:
                outcomes = [int(self.rng.choice(len(weights), p=weights / weights.sum()))]
            else:
                outcomes = [k for k in range(len(weights)) if branch.probability * weights[k] > prune]

            for k in outcomes:
                child = Branch(
                    branch_id=f"{branch.branch_id}.{k}",
                    probability=1.0 if self.mode is SimulationMode.SAMPLED else branch.probability * weights[k],
                    state=LinalgService.state(collapsed[k].amplitudes, collapsed[k].layout, normalize=True),
                    outcomes={**branch.outcomes, label: k},
                    messages=dict(branch.messages),
                )
                survivors.append(child)
                self.transcript.record(
                    party, 'measurement', label, targets, payload=k, branch=child.branch_id,
                )

        total = sum(child.probability for child in survivors)
        for child in survivors:
            child.probability /= total

        self.branch_set = BranchSet(survivors)
        self._check_invariants()

        if self.mode is SimulationMode.SAMPLED:
            return survivors[0].outcomes.get(label)
        return self.branch_set.distribution(label) if measured else {}

    def send_bits(self, sender: Party, bits: BitsDependent, label: str) -> 'Session':
        """
        Send classical bits to the other party.

        bits may be a callable receiving the branch (for example to forward a
        measurement outcome); every branch must produce the same width.
        """
        sender = Party(sender)
        payloads = {branch.branch_id: tuple(int(b) for b in self._resolve(bits, branch)) for branch in self.branch_set}
        widths = {len(payload) for payload in payloads.values()}
        if len(widths) > 1:
            raise ProtocolError(f"Message '{label}' has branch-dependent width {sorted(widths)}")
        width = widths.pop() if widths else 0

        for branch in self.branch_set:
            payload = payloads[branch.branch_id]
            branch.messages[label] = payload
            if width:
                self.transcript.record(sender, 'message', label, payload=list(payload), branch=branch.branch_id)

        self.transcript.count_bits(sender, width)
        logger.debug(f"{sender.value} sent {width} bit(s) as '{label}'")
        return self

    def branch_distribution(self, label: str) -> Dict[int, float]:
        """
        Exact marginal distribution of an outcome or message label.

        Raises:
            ProtocolError: In sampled mode or for an unknown label
        """
        if self.mode is not SimulationMode.EXACT:
            raise ProtocolError("Branch distributions are only available in exact mode")
        return self.branch_set.distribution(label)

    def outcome(self, label: str) -> int:
        """Recorded value of label on a sampled run."""
        if len(self.branch_set) != 1:
            raise ProtocolError("outcome() needs a single-branch session")
        return self.branch_set.branches[0].value(label)
