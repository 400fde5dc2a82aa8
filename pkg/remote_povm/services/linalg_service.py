"""
Dense complex linear algebra for small Hilbert spaces.

States are StateVector records; operators are plain complex numpy arrays.
"""
import logging
from dataclasses import replace
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from ..conf import get_tolerances
from ..models import SchmidtDecomposition, StateVector

logger = logging.getLogger(__name__)

Operand = Union[np.ndarray, StateVector]


class RemotePovmError(Exception):
    """Base class for every error raised by the remote POVM services."""
    pass


class LinalgError(RemotePovmError):
    """Custom exception for malformed linear-algebra inputs."""
    pass


class LinalgService:
    """
    Service for the numerical primitives every protocol step is built from.
    Subsystems are addressed by id; the first id in a layout varies slowest.
    """

    @staticmethod
    def as_matrix(entries) -> np.ndarray:
        """
        Coerce entries to a finite square complex matrix.

        Raises:
            LinalgError: If the matrix is not square or holds NaN/Inf
        """
        matrix = np.array(entries, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise LinalgError(f"Expected a square matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise LinalgError("Matrix contains non-finite entries")
        return matrix

    @staticmethod
    def dagger(m: np.ndarray) -> np.ndarray:
        return np.conj(m).T

    @classmethod
    def is_unitary(cls, u: np.ndarray, tol: float = None) -> bool:
        tol = get_tolerances().unitary if tol is None else tol
        u = np.asarray(u, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            return False
        return bool(np.allclose(cls.dagger(u) @ u, np.eye(u.shape[0]), atol=tol, rtol=0.0))

    @classmethod
    def is_hermitian(cls, m: np.ndarray, tol: float = None) -> bool:
        tol = get_tolerances().hermitian if tol is None else tol
        return bool(np.max(np.abs(m - cls.dagger(m)), initial=0.0) <= tol)

    @classmethod
    def state(
        cls,
        amplitudes: Iterable[complex],
        layout: Sequence[Tuple[str, int]],
        normalize: bool = False
    ) -> StateVector:
        """
        Build a StateVector, checking the layout against the amplitude count.

        Args:
            amplitudes: Amplitudes in big-endian layout order
            layout: (subsystem id, local dimension) pairs
            normalize: Rescale to unit norm instead of requiring it

        Returns:
            StateVector

        Raises:
            LinalgError: If dimensions disagree, ids repeat, or the vector is zero/non-finite
        """
        vector = np.array(list(amplitudes), dtype=complex).reshape(-1)
        names = [name for name, _ in layout]
        if len(set(names)) != len(names):
            raise LinalgError(f"Duplicate subsystem ids in layout: {names}")
        if any(int(dim) < 1 for _, dim in layout):
            raise LinalgError(f"Local dimensions must be positive: {layout}")

        expected = int(np.prod([dim for _, dim in layout])) if layout else 1
        if vector.shape[0] != expected:
            raise LinalgError(
                f"State has {vector.shape[0]} amplitudes but layout implies {expected}"
            )
        if not np.all(np.isfinite(vector)):
            raise LinalgError("State contains non-finite amplitudes")

        if normalize:
            norm = np.linalg.norm(vector)
            if norm == 0.0:
                raise LinalgError("Cannot normalize the zero vector")
            vector = vector / norm

        return StateVector(vector, tuple(layout))

    @classmethod
    def basis_state(cls, index: int, layout: Sequence[Tuple[str, int]]) -> StateVector:
        dim = int(np.prod([d for _, d in layout]))
        vector = np.zeros(dim, dtype=complex)
        vector[index] = 1.0
        return cls.state(vector, layout)

    @classmethod
    def tensor(cls, a: Operand, b: Operand) -> Operand:
        """
        Kronecker product with a's index slower-varying.

        StateVector operands also concatenate their layouts.
        """
        if isinstance(a, StateVector) and isinstance(b, StateVector):
            return cls.state(np.kron(a.amplitudes, b.amplitudes), a.layout + b.layout)
        if isinstance(a, StateVector) or isinstance(b, StateVector):
            raise LinalgError("Cannot tensor a state with an operator")
        return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))

    @classmethod
    def tensor_all(cls, operands: Sequence[Operand]) -> Operand:
        result = operands[0]
        for operand in operands[1:]:
            result = cls.tensor(result, operand)
        return result

    @staticmethod
    def _axes(state: StateVector, targets: Sequence[str]) -> List[int]:
        if len(set(targets)) != len(targets):
            raise LinalgError(f"Repeated subsystem in targets: {list(targets)}")
        try:
            return [state.index_of(target) for target in targets]
        except ValueError:
            raise LinalgError(f"Unknown subsystem in {list(targets)}; layout is {state.subsystems}")

    @classmethod
    def apply_on_subsystems(
        cls,
        op: np.ndarray,
        state: StateVector,
        targets: Sequence[str],
    ) -> StateVector:
        """
        Apply op to the listed subsystems (first target slowest), identity elsewhere.

        The result is not renormalized, so non-unitary Kraus operators leave
        their branch weight in the norm.

        Raises:
            LinalgError: On dimension mismatch or unknown subsystem id
        """
        axes = cls._axes(state, targets)
        dims = state.dims
        target_dim = int(np.prod([dims[a] for a in axes]))
        op = np.asarray(op, dtype=complex)
        if op.shape != (target_dim, target_dim):
            raise LinalgError(
                f"Operator of shape {op.shape} does not act on {list(targets)} (dimension {target_dim})"
            )

        front = list(range(len(axes)))
        psi = np.moveaxis(state.amplitudes.reshape(dims), axes, front)
        moved_shape = psi.shape
        psi = (op @ psi.reshape(target_dim, -1)).reshape(moved_shape)
        psi = np.moveaxis(psi, front, axes)

        return replace(state, amplitudes=psi.reshape(-1))

    @classmethod
    def hermitian_eig(cls, m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Eigendecomposition of a hermitian matrix.

        Returns:
            (eigenvalues ascending, eigenvectors as columns)

        Raises:
            LinalgError: If m is not hermitian or the decomposition does not reconstruct m
        """
        tolerances = get_tolerances()
        m = cls.as_matrix(m)
        if not cls.is_hermitian(m, tolerances.hermitian):
            raise LinalgError("Matrix is not hermitian")

        eigenvalues, eigenvectors = scipy.linalg.eigh((m + cls.dagger(m)) / 2)

        rebuilt = eigenvectors @ np.diag(eigenvalues) @ cls.dagger(eigenvectors)
        if not np.allclose(rebuilt, m, atol=tolerances.reconstruction, rtol=0.0):
            raise LinalgError("Eigendecomposition failed to reconstruct the input")

        return eigenvalues, eigenvectors

    @classmethod
    def psd_sqrt(cls, m: np.ndarray) -> np.ndarray:
        """
        Hermitian PSD square root.

        Raises:
            LinalgError: If an eigenvalue is below -psd_clamp (not a valid POVM element)
        """
        tolerances = get_tolerances()
        eigenvalues, eigenvectors = cls.hermitian_eig(m)
        if eigenvalues[0] < -tolerances.psd_clamp:
            raise LinalgError(f"Matrix is not positive semidefinite (min eigenvalue {eigenvalues[0]:.3e})")

        roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
        root = eigenvectors @ np.diag(roots) @ cls.dagger(eigenvectors)
        return (root + cls.dagger(root)) / 2

    @classmethod
    def bipartite_matrix(cls, state: StateVector, left: Sequence[str]) -> np.ndarray:
        """Amplitudes reshaped to (left dimension, right dimension)."""
        axes = cls._axes(state, left)
        if not axes or len(axes) == len(state.layout):
            raise LinalgError("Bipartition needs a non-empty subsystem set on each side")
        dims = state.dims
        psi = np.moveaxis(state.amplitudes.reshape(dims), axes, list(range(len(axes))))
        left_dim = int(np.prod([dims[a] for a in axes]))
        return psi.reshape(left_dim, -1)

    @classmethod
    def reduced_density(cls, state: StateVector, keep: Sequence[str]) -> np.ndarray:
        """Partial trace over every subsystem not in keep."""
        matrix = cls.bipartite_matrix(state, keep)
        return matrix @ cls.dagger(matrix)

    @classmethod
    def schmidt(cls, state: StateVector, left: Sequence[str]) -> SchmidtDecomposition:
        """
        Schmidt decomposition across left | rest.

        Built from the eigendecomposition of the reduced density operator of the
        left side; terms whose weight is below the schmidt floor are dropped.

        Raises:
            LinalgError: If either side of the cut is empty
        """
        tolerances = get_tolerances()
        matrix = cls.bipartite_matrix(state, left)
        rho = matrix @ cls.dagger(matrix)

        weights, vectors = cls.hermitian_eig(rho)
        order = np.argsort(weights)[::-1]
        weights, vectors = weights[order], vectors[:, order]

        keep = weights > tolerances.schmidt_floor
        if not np.any(keep):
            raise LinalgError("State has zero norm")
        coefficients = np.sqrt(weights[keep])
        left_basis = vectors[:, keep]
        right_basis = (matrix.T @ np.conj(left_basis)) / coefficients

        return SchmidtDecomposition(coefficients, left_basis, right_basis)

    @staticmethod
    def schmidt_reconstruct(decomposition: SchmidtDecomposition) -> np.ndarray:
        terms = [
            c * np.kron(decomposition.left_basis[:, i], decomposition.right_basis[:, i])
            for i, c in enumerate(decomposition.coefficients)
        ]
        return np.sum(terms, axis=0)

    @classmethod
    def entropy_base2(cls, coefficients: Sequence[float]) -> float:
        """
        Entanglement entropy in ebits from Schmidt-type coefficients c_i.

        Raises:
            LinalgError: If sum c_i^2 differs from 1
        """
        tolerances = get_tolerances()
        weights = np.abs(np.asarray(coefficients, dtype=float)) ** 2
        if abs(weights.sum() - 1.0) > tolerances.entropy_norm:
            raise LinalgError(f"Coefficients are not normalized (sum of squares {weights.sum():.12f})")

        weights = weights[weights >= tolerances.entropy_floor]
        return float(-np.sum(weights * np.log2(weights)))

    @classmethod
    def entanglement_entropy(cls, state: StateVector, left: Sequence[str]) -> float:
        return cls.entropy_base2(cls.schmidt(state, left).coefficients)

    @staticmethod
    def fidelity(a: StateVector, b: StateVector) -> float:
        """|<a|b>|^2 for unit vectors (insensitive to global phase)."""
        return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)

    @staticmethod
    def complete_orthonormal_rows(rows: np.ndarray, size: int) -> np.ndarray:
        """
        Extend orthonormal rows to a size x size unitary by modified Gram-Schmidt.

        The given rows are re-orthonormalized in order and kept first; the
        remaining rows come from the computational basis.

        Raises:
            LinalgError: If the given rows are linearly dependent
        """
        rows = np.atleast_2d(np.asarray(rows, dtype=complex))
        if rows.size and rows.shape[1] != size:
            raise LinalgError(f"Rows of length {rows.shape[1]} cannot complete a {size}x{size} unitary")

        basis: List[np.ndarray] = []

        def orthogonalize(vector: np.ndarray) -> np.ndarray:
            for _ in range(2):
                for b in basis:
                    vector = vector - np.vdot(b, vector) * b
            return vector

        for row in rows if rows.size else []:
            vector = orthogonalize(row.copy())
            norm = np.linalg.norm(vector)
            if norm < 1e-8:
                raise LinalgError("Fixed rows are linearly dependent")
            basis.append(vector / norm)

        for k in range(size):
            if len(basis) == size:
                break
            vector = orthogonalize(np.eye(size, dtype=complex)[k])
            norm = np.linalg.norm(vector)
            if norm > 1e-6:
                basis.append(vector / norm)

        return np.array(basis)

    @staticmethod
    def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
        return unitary_group.rvs(dim, random_state=rng)

    @classmethod
    def random_state(cls, layout: Sequence[Tuple[str, int]], rng: np.random.Generator) -> StateVector:
        """Haar-random pure state on the given layout."""
        dim = int(np.prod([d for _, d in layout]))
        vector = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return cls.state(vector, layout, normalize=True)

    @staticmethod
    def random_density(dim: int, rng: np.random.Generator) -> np.ndarray:
        """Random full-rank density operator (Ginibre ensemble)."""
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        rho = g @ np.conj(g).T
        return rho / np.trace(rho).real
