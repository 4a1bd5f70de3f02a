"""Stiefel manifold primitives: tangent projection, QR retraction, Haar sampling.

Points are plain ``(d, k)`` arrays with orthonormal columns. QR factors are
normalised so that ``R`` has a nonnegative diagonal, which makes the
factorisation unique; without it Gaussian QR is not Haar distributed.
"""

import numpy as np

from .exceptions import DegenerateStepError, InvalidInputError
from .measures import SeedLike, make_rng

ORTHO_TOL = 1e-10


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {A.shape}")
    return A


def orthonormality_error(U) -> float:
    U = _as_matrix(U)
    return float(np.linalg.norm(U.T @ U - np.eye(U.shape[1])))


def is_stiefel(U, tol: float = ORTHO_TOL) -> bool:
    return orthonormality_error(U) <= tol


def tangency_error(Z, xi) -> float:
    Z, xi = _as_matrix(Z), _as_matrix(xi)
    return float(np.linalg.norm(xi.T @ Z + Z.T @ xi))


def tangent_project(Z, G) -> np.ndarray:
    """Orthogonal projection ``G - Z (G'Z + Z'G) / 2`` onto the tangent space at ``Z``."""
    Z, G = _as_matrix(Z), _as_matrix(G)
    if Z.shape != G.shape:
        raise InvalidInputError(f"shape mismatch: {Z.shape} vs {G.shape}")
    S = G.T @ Z
    return G - Z @ ((S + S.T) / 2.0)


def qr_positive(A) -> tuple:
    """Thin Householder QR with the diagonal of ``R`` made nonnegative."""
    A = _as_matrix(A)
    Q, R = np.linalg.qr(A, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def qr_retract(Z, xi) -> np.ndarray:
    """QR retraction: the Q factor of ``Z + xi``.

    A zero step returns ``Z`` itself.
    """
    Z, xi = _as_matrix(Z), _as_matrix(xi)
    if Z.shape != xi.shape:
        raise InvalidInputError(f"shape mismatch: {Z.shape} vs {xi.shape}")
    if not np.any(xi):
        return Z.copy()
    Q, R = qr_positive(Z + xi)
    if np.min(np.abs(np.diag(R))) < 1e-12:
        raise DegenerateStepError("Z + xi is rank deficient")
    return Q


def sample_uniform_stiefel(d: int, k: int, seed: SeedLike) -> np.ndarray:
    """Haar-uniform draw from the Stiefel manifold of ``d x k`` frames."""
    if not 1 <= k <= d:
        raise InvalidInputError(f"need 1 <= k <= d, got k={k}, d={d}")
    G = make_rng(seed).standard_normal((d, k))
    return qr_positive(G)[0]


def sphere_tiebreak(u: np.ndarray) -> np.ndarray:
    """Pick the sign of ``u`` whose first nonzero coordinate is positive."""
    nz = np.flatnonzero(u)
    if nz.size and u[nz[0]] < 0:
        return -u
    return u
