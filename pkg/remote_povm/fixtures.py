"""
Named measurements used by the test suite, the reports and the CLI examples.
"""
import itertools
from typing import Sequence

import numpy as np

from .models import KrausSet, Povm, StateVector
from .services.linalg_service import LinalgService
from .services.povm_service import IDENTITY, PAULIS, SIGMA_X, SIGMA_Y, SIGMA_Z, PovmService

KET_UP_Z = np.array([1, 0], dtype=complex)
KET_UP_X = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_DOWN_X = np.array([1, -1], dtype=complex) / np.sqrt(2)


def fixture_a_kraus(alpha: float = 0.6, beta: float = 0.8) -> KrausSet:
    """Discrimination Kraus pair for alpha|0> +/- beta|1>."""
    return PovmService.fig1_povm(alpha, beta)


def fixture_a(alpha: float = 0.6, beta: float = 0.8) -> Povm:
    """F_0 = diag(1, 0.5625), F_1 = diag(0, 0.4375) at the default pair."""
    return PovmService.povm_from_kraus(fixture_a_kraus(alpha, beta))


def fixture_b() -> Povm:
    """One-qubit Z projectors."""
    return projective_z(1)


def fixture_c() -> Povm:
    """Trivial measurement {I}."""
    return PovmService.make_povm([IDENTITY], 1)


def fixture_d() -> KrausSet:
    """M_0 = |up_z><up_x|, M_1 = |up_x><down_x|: a valid set with no orthogonal equivalent."""
    return PovmService.make_kraus_set(
        [np.outer(KET_UP_Z, KET_UP_X.conj()), np.outer(KET_UP_X, KET_DOWN_X.conj())], 1,
    )


def projective_z(n: int) -> Povm:
    """Computational-basis projectors on n qubits."""
    dim = 2 ** n
    elements = []
    for k in range(dim):
        projector = np.zeros((dim, dim), dtype=complex)
        projector[k, k] = 1.0
        elements.append(projector)
    return PovmService.make_povm(elements, n)


def entangled_basis_povm() -> Povm:
    """Projectors onto |00>, (|01> + |10>)/sqrt(2), (|01> - |10>)/sqrt(2), |11>."""
    s = 1 / np.sqrt(2)
    basis = np.array([
        [1, 0, 0, 0],
        [0, s, s, 0],
        [0, s, -s, 0],
        [0, 0, 0, 1],
    ], dtype=complex)
    return PovmService.make_povm([np.outer(row, row.conj()) for row in basis], 2)


def pauli_axes_povm() -> Povm:
    """Six outcomes (I +/- sigma_k) / 6 along the three Pauli axes."""
    elements = [(IDENTITY + sign * sigma) / 6 for sigma in (SIGMA_X, SIGMA_Y, SIGMA_Z) for sign in (1, -1)]
    return PovmService.make_povm(elements, 1)


def orthogonal_pauli_set(alphas: Sequence[float]) -> KrausSet:
    """
    {alpha_mu sigma_mu} over Pauli strings, rescaled so that sum alpha^2 = 1.
    """
    alphas = np.asarray(alphas, dtype=float)
    n = int(round(np.log(len(alphas)) / np.log(4)))
    alphas = alphas / np.linalg.norm(alphas)
    strings = [
        LinalgService.tensor_all([PAULIS[d] for d in digits])
        for digits in itertools.product(range(4), repeat=n)
    ]
    return PovmService.make_kraus_set([a * s for a, s in zip(alphas, strings)], n)


def psi_pm(alpha: float = 0.6, beta: float = 0.8, sign: int = 1) -> StateVector:
    """alpha|0> + sign * beta|1> on Bob's system."""
    return LinalgService.state([alpha, sign * beta], (('B', 2),))


def system_state(amplitudes, n: int = 1) -> StateVector:
    return LinalgService.state(amplitudes, (('B', 2 ** n),), normalize=True)
