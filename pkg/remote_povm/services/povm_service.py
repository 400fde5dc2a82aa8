"""
POVM and Kraus-set algebra: Pauli expansion, orthogonality tests,
hermitian roots and the orthogonal-equivalent (OE) decomposition.
"""
import itertools
import logging
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..conf import get_setting, get_tolerances
from ..models import KrausSet, OEDecomposition, Povm, StateVector
from .linalg_service import LinalgError, LinalgService, RemotePovmError

logger = logging.getLogger(__name__)

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z)
PAULI_LABELS = ('I', 'X', 'Y', 'Z')


class InvalidMeasurementError(RemotePovmError):
    """Custom exception for Kraus sets and POVMs that violate their invariants."""
    pass


class NotOrthogonalEquivalentError(InvalidMeasurementError):
    """Raised when hermitian roots admit no orthogonal-equivalent form."""
    pass


@lru_cache(maxsize=None)
def _pauli_strings(n: int) -> Tuple[np.ndarray, ...]:
    strings = []
    for digits in itertools.product(range(4), repeat=n):
        strings.append(LinalgService.tensor_all([PAULIS[d] for d in digits]))
    return tuple(strings)


class PovmService:
    """
    Service for measurement algebra on n-qubit systems.
    Pauli strings are indexed in base 4, first digit on the first qubit.
    """

    @staticmethod
    def _max_qubits() -> int:
        return get_setting('POVM_MAX_QUBITS', 3)

    @classmethod
    def _check_qubits(cls, n: int) -> None:
        if not 1 <= n <= cls._max_qubits():
            raise InvalidMeasurementError(f"Qubit count {n} outside 1..{cls._max_qubits()}")

    @classmethod
    def _infer_qubits(cls, dim: int) -> int:
        n = int(round(np.log2(dim))) if dim > 0 else 0
        if 2 ** n != dim:
            raise InvalidMeasurementError(f"Operator dimension {dim} is not a power of two")
        return n

    @classmethod
    def pauli_label(cls, index: int, n: int) -> str:
        digits = np.base_repr(index, base=4).zfill(n)
        return ''.join(PAULI_LABELS[int(d)] for d in digits)

    @classmethod
    def pauli_basis(cls, n: int) -> Tuple[np.ndarray, ...]:
        """
        The 4^n Pauli strings in base-4 index order.

        Raises:
            InvalidMeasurementError: If n is outside the supported range
        """
        cls._check_qubits(n)
        return _pauli_strings(n)

    @classmethod
    def make_kraus_set(cls, operators: Sequence, n_qubits: Optional[int] = None) -> KrausSet:
        """
        Validate and wrap Kraus operators.

        Raises:
            InvalidMeasurementError: On empty sets, mixed dimensions or broken completeness
        """
        if len(operators) == 0:
            raise InvalidMeasurementError("A Kraus set needs at least one operator")
        try:
            matrices = [LinalgService.as_matrix(op) for op in operators]
        except LinalgError as e:
            raise InvalidMeasurementError(str(e))

        dim = matrices[0].shape[0]
        if any(m.shape != (dim, dim) for m in matrices):
            raise InvalidMeasurementError("All Kraus operators must share one dimension")
        n = cls._infer_qubits(dim) if n_qubits is None else n_qubits
        if 2 ** n != dim:
            raise InvalidMeasurementError(f"Operators of dimension {dim} do not act on {n} qubits")
        cls._check_qubits(n)

        total = sum(LinalgService.dagger(m) @ m for m in matrices)
        if not np.allclose(total, np.eye(dim), atol=get_tolerances().completeness, rtol=0.0):
            logger.error("Kraus completeness check failed")
            raise InvalidMeasurementError("Kraus operators do not satisfy sum M^dagger M = I")

        return KrausSet(n, tuple(matrices))

    @classmethod
    def make_povm(cls, elements: Sequence, n_qubits: Optional[int] = None) -> Povm:
        """
        Validate and wrap POVM elements.

        Raises:
            InvalidMeasurementError: If an element is not hermitian PSD or the sum is not I
        """
        if len(elements) == 0:
            raise InvalidMeasurementError("A POVM needs at least one element")
        tolerances = get_tolerances()
        try:
            matrices = [LinalgService.as_matrix(el) for el in elements]
        except LinalgError as e:
            raise InvalidMeasurementError(str(e))

        dim = matrices[0].shape[0]
        if any(m.shape != (dim, dim) for m in matrices):
            raise InvalidMeasurementError("All POVM elements must share one dimension")
        n = cls._infer_qubits(dim) if n_qubits is None else n_qubits
        if 2 ** n != dim:
            raise InvalidMeasurementError(f"Elements of dimension {dim} do not act on {n} qubits")
        cls._check_qubits(n)

        for index, element in enumerate(matrices):
            try:
                eigenvalues, _ = LinalgService.hermitian_eig(element)
            except LinalgError as e:
                raise InvalidMeasurementError(f"Element {index}: {e}")
            if eigenvalues[0] < -tolerances.psd_clamp:
                raise InvalidMeasurementError(
                    f"Element {index} has negative eigenvalue {eigenvalues[0]:.3e}"
                )

        if not np.allclose(sum(matrices), np.eye(dim), atol=tolerances.completeness, rtol=0.0):
            logger.error("POVM completeness check failed")
            raise InvalidMeasurementError("POVM elements do not sum to the identity")

        return Povm(n, tuple(matrices))

    @classmethod
    def povm_from_kraus(cls, ks: KrausSet) -> Povm:
        return cls.make_povm([(f + LinalgService.dagger(f)) / 2 for f in ks.elements()], ks.n_qubits)

    @staticmethod
    def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
        """
        Normalized Hilbert-Schmidt inner product (1/N) Tr(a^dagger b).

        Raises:
            LinalgError: On non-square or mismatched operands
        """
        a = LinalgService.as_matrix(a)
        b = LinalgService.as_matrix(b)
        if a.shape != b.shape:
            raise LinalgError(f"Dimension mismatch: {a.shape} vs {b.shape}")
        return complex(np.trace(LinalgService.dagger(a) @ b) / a.shape[0])

    @classmethod
    def expand_in_frame(cls, ks: KrausSet, frame: Sequence[np.ndarray]) -> np.ndarray:
        """Coefficient matrix c[mu, eta] = (frame_eta, M_mu) for an orthonormal operator frame."""
        # (1/N) Tr(f^dagger M) for every pair at once
        stacked_frame = np.array(frame)
        stacked_ops = np.array(ks.operators)
        return np.einsum('eij,mij->me', np.conj(stacked_frame), stacked_ops) / ks.dim

    @classmethod
    def pauli_expand(cls, ks: KrausSet) -> np.ndarray:
        """
        Expand each Kraus operator in Pauli strings.

        Returns:
            K x 4^n complex coefficient matrix; row = outcome, column = Pauli index
        """
        return cls.expand_in_frame(ks, cls.pauli_basis(ks.n_qubits))

    @classmethod
    def is_orthogonal(cls, ks: KrausSet) -> Tuple[bool, np.ndarray]:
        """
        Test whether (M_mu, M_eta) = c_mu delta_{mu eta}.

        Returns:
            (verdict, diagonal values c_mu)
        """
        ops = np.array(ks.operators)
        gram = np.einsum('aij,bij->ab', np.conj(ops), ops) / ks.dim
        off_diagonal = gram - np.diag(np.diag(gram))
        verdict = bool(np.max(np.abs(off_diagonal), initial=0.0) < get_tolerances().orthogonality)
        return verdict, np.real(np.diag(gram))

    @staticmethod
    def oe_residual(coefficients: np.ndarray) -> float:
        """Largest off-diagonal modulus of c^dagger c."""
        gram = np.conj(coefficients).T @ coefficients
        off_diagonal = gram - np.diag(np.diag(gram))
        return float(np.max(np.abs(off_diagonal), initial=0.0))

    @classmethod
    def is_oe(cls, ks: KrausSet, frame: Optional[Sequence[np.ndarray]] = None) -> bool:
        """
        The set is OE iff c^dagger c is diagonal.

        The expansion is in Pauli strings unless another orthonormal frame is given.
        """
        frame = cls.pauli_basis(ks.n_qubits) if frame is None else frame
        residual = cls.oe_residual(cls.expand_in_frame(ks, frame))
        return residual < get_tolerances().oe_offdiag

    @classmethod
    def hermitian_roots(cls, p: Povm) -> KrausSet:
        """Canonical Kraus realisation M_mu = sqrt(F_mu)."""
        try:
            roots = [LinalgService.psd_sqrt(element) for element in p.elements]
        except LinalgError as e:
            raise InvalidMeasurementError(f"POVM element has no PSD root: {e}")
        return cls.make_kraus_set(roots, p.n_qubits)

    @classmethod
    def apply_ancilla_unitary(cls, ks: KrausSet, u: np.ndarray) -> KrausSet:
        """
        New Kraus set N_mu = sum_rho u[mu, rho] M_rho induced by a unitary on the ancilla.

        Raises:
            InvalidMeasurementError: If u is not unitary or does not match the set size
        """
        u = np.asarray(u, dtype=complex)
        if u.shape != (ks.count, ks.count):
            raise InvalidMeasurementError(
                f"Ancilla unitary of shape {u.shape} does not match {ks.count} operators"
            )
        if not LinalgService.is_unitary(u):
            raise InvalidMeasurementError("Ancilla transformation is not unitary")

        mixed = np.einsum('mr,rij->mij', u, np.array(ks.operators))
        return cls.make_kraus_set(list(mixed), ks.n_qubits)

    @staticmethod
    def apply_channel(ks: KrausSet, rho: np.ndarray) -> np.ndarray:
        """Superoperator action sum_mu M_mu rho M_mu^dagger (ancilla not observed)."""
        return sum(op @ rho @ LinalgService.dagger(op) for op in ks.operators)

    @classmethod
    def align_frame(cls, coefficients: np.ndarray, n: int) -> Tuple[np.ndarray, ...]:
        """
        Local Pauli frame that diagonalizes the single-qubit blocks of c^dagger c.

        For each qubit the 3x3 block of columns X, Y, Z (identity elsewhere) is
        diagonalized by a real rotation R; the frame operators are tensor
        products of I and the rotated Paulis sum_i R[i, k] sigma_i.
        """
        gram = np.real(np.conj(coefficients).T @ coefficients)
        local_frames = []
        for qubit in range(n):
            stride = 4 ** (n - 1 - qubit)
            columns = [k * stride for k in (1, 2, 3)]
            block = gram[np.ix_(columns, columns)]
            _, rotation = scipy.linalg.eigh((block + block.T) / 2)
            if np.linalg.det(rotation) < 0:
                rotation[:, -1] *= -1
            axes = [IDENTITY] + [
                sum(rotation[i, k] * PAULIS[i + 1] for i in range(3)) for k in range(3)
            ]
            local_frames.append(axes)

        return tuple(
            LinalgService.tensor_all([local_frames[q][d] for q, d in enumerate(digits)])
            for digits in itertools.product(range(4), repeat=n)
        )

    @classmethod
    def eigenbasis_frame(cls, ks: KrausSet) -> Optional[Tuple[np.ndarray, ...]]:
        """
        Pauli strings conjugated into a shared eigenbasis V of commuting operators.

        The frame is V P V^dagger for every Pauli string P. Its diagonal (Z-type)
        members are the Walsh functions on the eigenbasis, so a projective
        measurement onto the columns of V is OE in it.

        Returns:
            The frame, or None when the operators do not commute
        """
        tolerances = get_tolerances()
        operators = ks.operators
        commutator = max(
            (float(np.max(np.abs(a @ b - b @ a))) for a, b in itertools.combinations(operators, 2)),
            default=0.0,
        )
        if commutator >= tolerances.orthogonality:
            logger.debug(f"Roots do not commute (max commutator {commutator:.3e})")
            return None

        # generic real combination: its eigenvectors diagonalize every operator
        weights = np.random.default_rng(0).standard_normal(len(operators))
        combination = sum(w * op for w, op in zip(weights, operators))
        _, basis = LinalgService.hermitian_eig(combination)

        for op in operators:
            rotated = LinalgService.dagger(basis) @ op @ basis
            if np.max(np.abs(rotated - np.diag(np.diag(rotated)))) >= tolerances.orthogonality:
                logger.debug("Shared eigenbasis does not diagonalize every root")
                return None

        return tuple(basis @ string @ LinalgService.dagger(basis) for string in cls.pauli_basis(ks.n_qubits))

    @classmethod
    def oe_decompose(cls, p: Povm) -> OEDecomposition:
        """
        Resource coefficients and Alice's unitary for the hermitian roots of p.

        Args:
            p: Validated POVM

        Returns:
            OEDecomposition with sqrt(F_nu) = sum_j U[j, nu] alpha_{r_j} tau_{r_j}

        Raises:
            NotOrthogonalEquivalentError: If c^dagger c cannot be made diagonal
        """
        tolerances = get_tolerances()
        roots = cls.hermitian_roots(p)
        n = p.n_qubits

        frame = cls.pauli_basis(n)
        frame_kind = 'pauli'
        coefficients = cls.expand_in_frame(roots, frame)
        residual = cls.oe_residual(coefficients)

        if residual >= tolerances.oe_offdiag:
            logger.info(f"Pauli frame not OE (residual {residual:.3e}); aligning local frames")
            frame = cls.align_frame(coefficients, n)
            frame_kind = 'aligned'
            coefficients = cls.expand_in_frame(roots, frame)
            residual = cls.oe_residual(coefficients)

        if residual >= tolerances.oe_offdiag:
            eigen_frame = cls.eigenbasis_frame(roots)
            if eigen_frame is not None:
                logger.info(f"Aligned frame not OE (residual {residual:.3e}); trying the shared eigenbasis")
                frame = eigen_frame
                frame_kind = 'eigenbasis'
                coefficients = cls.expand_in_frame(roots, frame)
                residual = cls.oe_residual(coefficients)

        if residual >= tolerances.oe_offdiag:
            logger.error(f"Hermitian roots are not OE in the {frame_kind} frame (residual {residual:.3e})")
            raise NotOrthogonalEquivalentError(
                f"Hermitian roots have non-diagonal c^dagger c (residual {residual:.3e})"
            )

        alphas = np.sqrt(np.sum(np.abs(coefficients) ** 2, axis=0))
        retained = tuple(int(i) for i in np.flatnonzero(alphas > tolerances.alpha_cutoff))

        size = max(roots.count, len(retained))
        fixed_rows = np.zeros((len(retained), size), dtype=complex)
        for j, index in enumerate(retained):
            fixed_rows[j, :roots.count] = coefficients[:, index] / alphas[index]
        unitary = LinalgService.complete_orthonormal_rows(fixed_rows, size)

        decomposition = OEDecomposition(
            alphas=alphas,
            unitary=unitary,
            retained=retained,
            source_roots=roots,
            coefficients=coefficients,
            frame=tuple(frame),
            frame_kind=frame_kind,
        )

        error = cls.reconstruction_error(decomposition)
        if error > 10 * tolerances.reconstruction:
            raise NotOrthogonalEquivalentError(f"OE reconstruction error {error:.3e}")

        logger.info(
            f"OE decomposition: {len(retained)} retained terms, K'={size}, frame={frame_kind}"
        )
        return decomposition

    @staticmethod
    def reconstruction_error(d: OEDecomposition) -> float:
        """Max deviation of sum_j U[j, nu] alpha_j tau_j from sqrt(F_nu)."""
        worst = 0.0
        for nu, root in enumerate(d.source_roots.operators):
            rebuilt = sum(
                d.unitary[j, nu] * d.alphas[index] * d.frame[index]
                for j, index in enumerate(d.retained)
            )
            worst = max(worst, float(np.max(np.abs(rebuilt - root))))
        return worst

    @classmethod
    def entanglement_cost(cls, d: OEDecomposition) -> float:
        """Entropy (ebits) of the resource Schmidt coefficients alpha."""
        return LinalgService.entropy_base2(d.alphas)

    @classmethod
    def povm_distribution(cls, p: Povm, psi: StateVector) -> np.ndarray:
        """
        Born probabilities <psi|F_mu|psi>.

        Raises:
            LinalgError: If the state dimension does not match the POVM
        """
        if psi.dim != p.dim:
            raise LinalgError(f"State of dimension {psi.dim} does not match POVM dimension {p.dim}")
        vector = psi.amplitudes
        probabilities = np.array([np.real(np.vdot(vector, el @ vector)) for el in p.elements])
        probabilities = np.clip(probabilities, 0.0, None)

        if abs(probabilities.sum() - 1.0) > get_tolerances().probability:
            raise LinalgError(f"Probabilities sum to {probabilities.sum():.12f}; is the state normalized?")
        return probabilities

    @classmethod
    def fig1_povm(cls, alpha: float, beta: float) -> KrausSet:
        """
        Kraus pair that unambiguously discriminates alpha|0> +/- beta|1>.

        Raises:
            InvalidMeasurementError: If alpha^2 + beta^2 != 1 or not 0 < alpha <= beta
        """
        tolerances = get_tolerances()
        if abs(alpha ** 2 + beta ** 2 - 1.0) > tolerances.pair_norm:
            raise InvalidMeasurementError(f"alpha^2 + beta^2 = {alpha ** 2 + beta ** 2:.12f}, expected 1")
        if alpha <= 0:
            raise InvalidMeasurementError("alpha must be positive")
        if alpha > beta + tolerances.pair_norm:
            raise InvalidMeasurementError(
                "alpha > beta: swap the roles of |0> and |1> so that alpha <= beta"
            )

        ratio = min(alpha / beta, 1.0)
        m0 = 0.5 * (1 + ratio) * IDENTITY + 0.5 * (1 - ratio) * SIGMA_Z
        m1 = -np.sqrt(max(beta ** 2 - alpha ** 2, 0.0)) / (2 * beta) * (IDENTITY - SIGMA_Z)
        return cls.make_kraus_set([m0, m1], 1)

    @classmethod
    def ancilla_dilation(cls, ks: KrausSet) -> np.ndarray:
        """
        Unitary U_AB on (ancilla of dimension K, system) with
        U_AB |0>_A |psi> = sum_mu |mu>_A M_mu |psi>.
        """
        isometry = np.vstack(ks.operators)
        size = ks.count * ks.dim
        rows = LinalgService.complete_orthonormal_rows(isometry.T, size)
        return rows.T

    @classmethod
    def random_povm(cls, n: int, rng: np.random.Generator) -> Povm:
        """
        Seeded random POVM.

        One qubit: Haar-unitary row blocks M_mu with K in {2, 3, 4} and F = M^dagger M.
        Several qubits: tensor product of one-qubit factors (K_q in {1..4}) with
        total K in {2, ..., 8}.
        """
        cls._check_qubits(n)
        if n == 1:
            return cls.haar_partition_povm(int(rng.integers(2, 5)), rng)

        while True:
            sizes = [int(k) for k in rng.integers(1, 5, size=n)]
            if 2 <= int(np.prod(sizes)) <= 8:
                break

        factors = [
            cls.haar_partition_povm(k, rng) if k > 1 else Povm(1, (IDENTITY,))
            for k in sizes
        ]
        elements = [
            LinalgService.tensor_all(list(combo))
            for combo in itertools.product(*(f.elements for f in factors))
        ]
        return cls.make_povm(elements, n)

    @classmethod
    def haar_partition_povm(cls, k: int, rng: np.random.Generator, n: int = 1) -> Povm:
        """
        K-outcome POVM on n qubits from row blocks of a Haar isometry.

        For n >= 2 these are generically not OE in any frame oe_decompose
        searches; random_povm builds its multi-qubit cases as products instead.
        """
        cls._check_qubits(n)
        dim = 2 ** n
        unitary = LinalgService.haar_unitary(dim * k, rng)
        isometry = unitary[:, :dim]
        elements: List[np.ndarray] = []
        for mu in range(k):
            block = isometry[dim * mu:dim * (mu + 1), :]
            element = LinalgService.dagger(block) @ block
            elements.append((element + LinalgService.dagger(element)) / 2)
        return cls.make_povm(elements, n)
