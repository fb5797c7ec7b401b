"""Small dense Hermitian linear algebra (M <= 64).

Matrices are plain ``numpy`` arrays. Eigendecomposition uses cyclic complex
Jacobi rotations; Cholesky factorization is delegated to ``numpy.linalg``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotHermitian, NotPSD

HERMITIAN_RTOL = 1e-10
RANK_TOL = 1e-10
MAX_SWEEPS = 100
JITTER_LADDER = (0.0, 1e-12, 1e-9)


@dataclass(frozen=True)
class HermitianCheckReport:
    max_asymmetry: float
    min_eigenvalue: float


def as_matrix(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.ndim != 2 or A.size == 0:
        raise ValueError("expected a non-empty 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def max_abs(A) -> float:
    return float(np.max(np.abs(A))) if np.size(A) else 0.0


def _require_hermitian(A: np.ndarray, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    if A.shape[0] != A.shape[1]:
        raise NotHermitian(f"matrix is not square: shape {A.shape}")
    asym = max_abs(A - A.conj().T)
    if asym > rtol * max(max_abs(A), np.finfo(float).tiny):
        raise NotHermitian(f"max |A_ij - conj(A_ji)| = {asym:.3e}")
    return 0.5 * (A + A.conj().T)


def hermitize(A) -> np.ndarray:
    """Project onto the Hermitian matrices, (A + A^H) / 2."""
    A = np.asarray(A, dtype=complex)
    return 0.5 * (A + A.conj().T)


def check_hermitian(A) -> HermitianCheckReport:
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise NotHermitian(f"matrix is not square: shape {A.shape}")
    asym = max_abs(A - A.conj().T)
    w, _ = eig_hermitian(hermitize(A))
    return HermitianCheckReport(max_asymmetry=asym, min_eigenvalue=float(w[-1]))


def hermitian_factor(A, jitter: float = 0.0) -> np.ndarray:
    """Lower-triangular L with L L^H = A + jitter I.

    With ``jitter == 0`` the default ladder (0, 1e-12, 1e-9 times trace/M) is
    tried in order; a positive ``jitter`` is used as the only retry after the
    plain factorization fails.
    """
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    A = _require_hermitian(as_matrix(A))
    m = A.shape[0]
    scale = max(float(np.real(np.trace(A))) / m, 0.0)
    ladder = [0.0, jitter] if jitter > 0 else [j * scale for j in JITTER_LADDER]
    for eps in ladder:
        try:
            return np.linalg.cholesky(A + eps * np.eye(m))
        except np.linalg.LinAlgError:
            continue
    raise NotPSD("Cholesky factorization failed even with jitter")


def eig_hermitian(A, tol: float = 1e-14, max_sweeps: int = MAX_SWEEPS):
    """Eigenvalues (descending) and unitary eigenvectors of a Hermitian matrix.

    Cyclic Jacobi: each rotation first removes the phase of the pivot
    element, then applies a real symmetric Jacobi rotation.
    """
    A = _require_hermitian(as_matrix(A)).copy()
    m = A.shape[0]
    V = np.eye(m, dtype=complex)
    scale = max_abs(A)
    if scale == 0.0 or m == 1:
        w = np.real(np.diag(A)).copy()
        order = np.argsort(-w, kind="stable")
        return w[order], V[:, order]

    threshold = tol * np.linalg.norm(A)
    offdiag = ~np.eye(m, dtype=bool)
    for _ in range(max_sweeps):
        if np.linalg.norm(A[offdiag]) <= threshold:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                r = abs(apq)
                if r <= 1e-300 or r <= 1e-3 * threshold / m:
                    continue
                phase = apq / r
                app = A[p, p].real
                aqq = A[q, q].real
                zeta = (aqq - app) / (2.0 * r)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # J = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                J = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                A[:, idx] = A[:, idx] @ J
                A[idx, :] = J.conj().T @ A[idx, :]
                V[:, idx] = V[:, idx] @ J
                A[p, q] = A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
    else:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.real(np.diag(A)).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def pseudo_inverse(A, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse of a Hermitian PSD matrix via its eigenbasis."""
    w, V = eig_hermitian(A)
    lam_max = max(float(w[0]), 0.0)
    keep = w > rank_tol * lam_max if lam_max > 0 else np.zeros_like(w, dtype=bool)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return (V * inv) @ V.conj().T


def is_rank_deficient(A, rank_tol: float = RANK_TOL) -> bool:
    w, _ = eig_hermitian(A)
    return bool(w[-1] < rank_tol * max(float(w[0]), 0.0)) or w[0] <= 0


def inverse_or_pinv(A, rank_tol: float = RANK_TOL):
    """Inverse of a Hermitian PSD matrix, falling back to the pseudo-inverse.

    Returns ``(W, used_pinv)``.
    """
    A = _require_hermitian(as_matrix(A))
    if is_rank_deficient(A, rank_tol):
        return pseudo_inverse(A, rank_tol), True
    return np.linalg.inv(A), False
