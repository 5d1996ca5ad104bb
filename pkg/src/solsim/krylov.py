"""Short-iterate Lanczos evaluation of exp(-i t H) v for banded Hermitian H.

The Fock-space Hamiltonian of the two-mode engine is real symmetric with
bandwidth two, so a matrix-free Lanczos recurrence plus a tridiagonal
eigensolve of the small projected problem gives a norm-preserving
propagator without ever diagonalizing the full operator.  The Krylov
dimension adapts to a local error target; when the budget is exhausted the
time slice is split recursively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal


@dataclass(frozen=True)
class BandedHermitian:
    """Real symmetric matrix with two off-diagonals, stored by band."""

    diag: np.ndarray
    off1: np.ndarray
    off2: np.ndarray

    def __post_init__(self):
        n = self.diag.shape[0]
        if self.off1.shape[0] != max(n - 1, 0) or self.off2.shape[0] != max(n - 2, 0):
            raise ValueError("band lengths inconsistent with matrix dimension")

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return not (np.any(self.off1) or np.any(self.off2))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        y = self.diag * v
        if self.off1.size:
            y[:-1] += self.off1 * v[1:]
            y[1:] += self.off1 * v[:-1]
        if self.off2.size:
            y[:-2] += self.off2 * v[2:]
            y[2:] += self.off2 * v[:-2]
        return y

    def expectation(self, v: np.ndarray) -> float:
        return float(np.real(np.vdot(v, self.matvec(v))))

    def to_dense(self) -> np.ndarray:
        h = np.diag(self.diag.astype(float))
        if self.off1.size:
            h += np.diag(self.off1, 1) + np.diag(self.off1, -1)
        if self.off2.size:
            h += np.diag(self.off2, 2) + np.diag(self.off2, -2)
        return h


def _lanczos_attempt(h: BandedHermitian, v: np.ndarray, t: float, tol: float,
                     m_max: int) -> np.ndarray | None:
    """One Lanczos pass; returns the propagated vector or None if not converged."""
    n = h.dim
    m_max = min(m_max, n)
    basis = np.empty((m_max, n), dtype=np.complex128)
    alpha = np.empty(m_max)
    beta = np.empty(m_max)  # beta[j] links basis vectors j and j+1

    basis[0] = v
    w = h.matvec(basis[0])
    alpha[0] = np.real(np.vdot(basis[0], w))
    w -= alpha[0] * basis[0]

    for j in range(1, m_max + 1):
        b = float(np.linalg.norm(w))
        happy = b < 1e-14
        if not happy and j < m_max:
            beta[j - 1] = b
            basis[j] = w / b
        # Solve the projected problem on the first j vectors (every other
        # iteration; the small eigensolve costs more than a matvec).
        if happy or j == m_max or (j >= 2 and j % 2 == 0):
            evals, evecs = eigh_tridiagonal(alpha[:j], beta[:j - 1])
            small = evecs @ (np.exp(-1j * t * evals) * evecs[0])
            err = 0.0 if happy else abs(b * small[-1])
            if happy or err < tol:
                return small @ basis[:j]
        if happy or j == m_max:
            return None
        w = h.matvec(basis[j])
        w -= beta[j - 1] * basis[j - 1]
        alpha[j] = np.real(np.vdot(basis[j], w))
        w -= alpha[j] * basis[j]
    return None


def expm_multiply(h: BandedHermitian, v: np.ndarray, t: float, tol: float = 1e-12,
                  m_max: int = 64, max_splits: int = 48) -> np.ndarray:
    """Apply exp(-i t H) to v.

    Exactly diagonal operators take a phase-multiplication fast path
    (decoupled-wells limit).  Otherwise Lanczos runs with up to m_max
    vectors; if the a-posteriori error estimate misses tol, the step is
    halved recursively.
    """
    if v.shape != (h.dim,):
        raise ValueError("vector length does not match operator dimension")
    if t == 0.0:
        return v.astype(np.complex128, copy=True)
    if h.is_diagonal:
        return np.exp(-1j * t * h.diag) * v

    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        return v.astype(np.complex128, copy=True)
    result = _lanczos_attempt(h, v.astype(np.complex128) / nrm, t, tol, m_max)
    if result is not None:
        return nrm * result
    if max_splits <= 0:
        raise RuntimeError("Krylov propagation failed to converge; time slice too large")
    half = expm_multiply(h, v, 0.5 * t, tol, m_max, max_splits - 1)
    return expm_multiply(h, half, 0.5 * t, tol, m_max, max_splits - 1)
