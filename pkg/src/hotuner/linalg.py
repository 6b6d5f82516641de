"""
Small dense linear algebra for the dynamical error model.

Everything here works on plain ``numpy`` arrays; matrices are at most 4x4
in every scenario shipped with the package, so direct methods are used
throughout.
"""

import numpy as np
import scipy.linalg

from .errors import NotHurwitz, NotSymmetric, SingularSystem

SYMMETRY_RTOL = 1e-10


def _as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def _check_symmetric(M: np.ndarray) -> None:
    scale = max(np.linalg.norm(M), 1.0)
    if np.linalg.norm(M - M.T) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("matrix is not symmetric to within 1e-10 relative tolerance")


def is_hurwitz(A) -> bool:
    """True iff every eigenvalue of ``A`` has strictly negative real part."""
    A = _as_square(A)
    return bool(np.all(np.linalg.eigvals(A).real < 0.0))


def is_positive_definite(M) -> bool:
    M = _as_square(M)
    _check_symmetric(M)
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T))[0] > 0.0)


def min_eigenvalue_symmetric(M) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    M = _as_square(M)
    _check_symmetric(M)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def solve_lyapunov(A, Q) -> np.ndarray:
    """
    Solve ``A^T P + P A = -Q`` for symmetric positive definite ``P``.

    The equation is vectorized with Kronecker products and solved as one
    dense linear system of size ``n^2``.

    Parameters
    ----------
    A : (n, n) array_like
        Hurwitz matrix.
    Q : (n, n) array_like
        Symmetric positive definite right-hand side.

    Raises
    ------
    NotHurwitz
        If any eigenvalue of ``A`` has non-negative real part.
    SingularSystem
        If the Kronecker system is numerically singular.
    """
    A = _as_square(A)
    Q = _as_square(Q)
    if A.shape != Q.shape:
        raise ValueError(f"A has shape {A.shape} but Q has shape {Q.shape}")
    _check_symmetric(Q)
    if not is_hurwitz(A):
        eig = np.linalg.eigvals(A)
        raise NotHurwitz(f"A is not Hurwitz, max real eigenvalue part {eig.real.max():.6g}")

    n = A.shape[0]
    eye = np.eye(n)
    # Row-major vec: vec(A^T P) = (A^T kron I) vec(P), vec(P A) = (I kron A^T) vec(P).
    K = np.kron(A.T, eye) + np.kron(eye, A.T)
    if np.linalg.cond(K) > 1e14:
        raise SingularSystem("Kronecker form of the Lyapunov equation is singular")
    P = np.linalg.solve(K, -Q.reshape(-1)).reshape(n, n)
    P = 0.5 * (P + P.T)
    if not is_positive_definite(P):
        raise NotHurwitz("Lyapunov solution is not positive definite")
    return P


def matrix_exponential_action(A, t: float, v) -> np.ndarray:
    """Return ``expm(A t) @ v`` (scaling-and-squaring Pade via scipy)."""
    A = _as_square(A)
    v = np.asarray(v, dtype=float)
    if t < 0:
        raise ValueError("t must be non-negative")
    return scipy.linalg.expm(A * t) @ v
