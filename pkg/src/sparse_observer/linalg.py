"""Dense real matrix kernel.

Matrices are plain ``numpy.ndarray`` values (row-major 2-D float arrays).
Every public operation validates its input at the module boundary: arrays
must be 2-D with finite entries, and operations on symmetric matrices
symmetrize their input when the asymmetry is below tolerance and reject it
otherwise.  All functions are pure; nothing here keeps state.

Sized for dense problems up to a few dozen states; no sparsity is exploited.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "UnstableMatrixError",
    "check_matrix",
    "symmetrize",
    "sym_eig",
    "cholesky",
    "is_positive_definite",
    "solve_lyapunov",
    "is_hurwitz",
]

# Relative asymmetry above which a "symmetric" argument is rejected instead
# of being silently symmetrized.
SYMMETRY_RTOL = 1e-10


class UnstableMatrixError(ValueError):
    """A matrix required to be Hurwitz has an eigenvalue with Re >= 0."""


def check_matrix(m, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Validate and return ``m`` as a 2-D float array with finite entries."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def symmetrize(m, name: str = "matrix", rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Return (m + m.T)/2, rejecting matrices that are not nearly symmetric.

    Round-off asymmetry (relative to ``||m||``) is absorbed; anything larger
    is treated as a caller error.
    """
    a = check_matrix(m, name, square=True)
    scale = np.linalg.norm(a)
    asym = np.linalg.norm(a - a.T)
    if asym > rtol * max(scale, 1.0):
        raise ValueError(
            f"{name} is not symmetric: ||m - m.T|| = {asym:.3e} "
            f"exceeds {rtol:.1e} * max(||m||, 1)"
        )
    return 0.5 * (a + a.T)


def sym_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with eigenvalues ``w`` ascending and ``V`` orthogonal
    such that ``m @ V == V @ diag(w)``.
    """
    a = symmetrize(m, "sym_eig input")
    w, V = np.linalg.eigh(a)
    return w, V


def cholesky(m) -> np.ndarray | None:
    """Lower-triangular Cholesky factor of ``m``, or None if not positive
    definite.

    Indefiniteness is a verdict, not an error: solver line searches probe
    matrices that are expected to fail.
    """
    a = symmetrize(m, "cholesky input")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None


def is_positive_definite(m) -> bool:
    return cholesky(m) is not None


def is_hurwitz(a, margin: float = 0.0) -> bool:
    """True when every eigenvalue of ``a`` has real part < -margin."""
    a = check_matrix(a, "matrix", square=True)
    return bool(np.max(np.linalg.eigvals(a).real) < -margin)


def solve_lyapunov(a, w) -> np.ndarray:
    """Solve ``a @ P + P @ a.T + w = 0`` for symmetric P.

    ``a`` must be Hurwitz and ``w`` symmetric (PSD for a PSD solution).
    Uses the Bartels-Stewart solver; the Kronecker-vectorization route is
    kept to the test suite as an independent oracle.
    """
    a = check_matrix(a, "a", square=True)
    w = symmetrize(w, "w")
    if a.shape != w.shape:
        raise ValueError(f"shape mismatch: a is {a.shape}, w is {w.shape}")
    if not is_hurwitz(a):
        raise UnstableMatrixError(
            "unstable matrix: Lyapunov equation requires all Re(eig(a)) < 0"
        )
    p = scipy.linalg.solve_continuous_lyapunov(a, -w)
    return 0.5 * (p + p.T)
