"""Hermitian representations of the Clifford algebra {G_i, G_j} = 2 delta_ij."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_HALF_DIM = 4

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


@dataclass(frozen=True)
class GammaSet:
    """2N+1 mutually anticommuting Hermitian matrices of size 2^N.

    ``matrices`` is a read-only array of shape (2N+1, 2^N, 2^N).
    """

    n_half_dim: int
    matrices: np.ndarray

    @property
    def size(self) -> int:
        return self.matrices.shape[-1]

    @property
    def count(self) -> int:
        return self.matrices.shape[0]

    def __len__(self):
        return self.count

    def __getitem__(self, i):
        return self.matrices[i]

    def contract(self, coeffs):
        """Return sum_i coeffs[..., i] * G_i with broadcasting over leading axes."""
        coeffs = np.asarray(coeffs)
        return np.tensordot(coeffs, self.matrices, axes=([-1], [0]))

    def clifford_residual(self) -> float:
        """Max-norm of G_i G_j + G_j G_i - 2 delta_ij I over all pairs."""
        g = self.matrices
        anti = np.einsum("iab,jbc->ijac", g, g)
        anti = anti + anti.transpose(1, 0, 2, 3)
        eye = np.eye(self.size)
        target = 2.0 * np.einsum("ij,ac->ijac", np.eye(self.count), eye)
        return float(np.max(np.abs(anti - target)))

    def hermiticity_residual(self) -> float:
        g = self.matrices
        return float(np.max(np.abs(g - g.conj().transpose(0, 2, 1))))

    def max_abs_trace(self) -> float:
        return float(np.max(np.abs(np.trace(self.matrices, axis1=1, axis2=2))))


def build_gammas(n_half_dim: int, max_half_dim: int = MAX_HALF_DIM) -> GammaSet:
    """Build the deterministic tensor-product representation at level N.

    Level 1 is the Pauli triple. Level N takes the 2N-1 matrices G_i of level
    N-1 and returns (sx (x) G_i ..., sy (x) I, sz (x) I).
    """
    n = int(n_half_dim)
    if n != n_half_dim or n < 1:
        raise ValueError(f"N must be a positive integer, got {n_half_dim!r}")
    if n > max_half_dim:
        raise ValueError(f"N={n} exceeds the matrix-size cap N <= {max_half_dim}")

    mats = list(PAULI)
    for level in range(2, n + 1):
        eye = np.eye(2 ** (level - 1), dtype=complex)
        mats = [np.kron(SIGMA_X, g) for g in mats]
        mats += [np.kron(SIGMA_Y, eye), np.kron(SIGMA_Z, eye)]

    arr = np.array(mats)
    arr.setflags(write=False)
    return GammaSet(n, arr)
