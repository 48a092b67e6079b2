"""Geometry of the manifold of rank-N orthogonal projectors.

Density matrices and tangent vectors are plain ``numpy`` arrays.  Whether a
matrix actually lies on the manifold is checked by :func:`is_on_manifold`,
never assumed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigensolverFailure, NotAProjector, RetractionRankMismatch

TOL_MANIFOLD = 1e-8


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def is_symmetric(A: np.ndarray, rtol: float = 1e-12) -> bool:
    A = np.asarray(A)
    return bool(np.linalg.norm(A - A.T) <= rtol * max(np.linalg.norm(A), 1.0))


def projector_defect(P: np.ndarray) -> float:
    """Frobenius norm of ``P @ P - P``."""
    return float(np.linalg.norm(P @ P - P))


def is_on_manifold(P: np.ndarray, N: int | None = None, tol: float = TOL_MANIFOLD) -> bool:
    """True when ``P`` is symmetric, idempotent and (if given) of trace ``N``."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        return False
    if not is_symmetric(P, rtol=1e-12):
        return False
    if projector_defect(P) > tol:
        return False
    if N is not None and abs(np.trace(P) - N) > tol:
        return False
    return True


def check_projector(P: np.ndarray, N: int | None = None, tol: float = TOL_MANIFOLD) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if not is_on_manifold(P, N, tol):
        raise NotAProjector(
            f"matrix is not a rank-{N if N is not None else '?'} orthogonal projector "
            f"(|P^2-P|_F = {projector_defect(P) if P.ndim == 2 else float('nan'):.3e}, "
            f"Tr P = {np.trace(P) if P.ndim == 2 else float('nan'):.6g})"
        )
    return P


def rank_of(P: np.ndarray) -> int:
    """Rank of a projector, read off its trace."""
    return int(round(float(np.trace(P))))


def _project(P: np.ndarray, X: np.ndarray) -> np.ndarray:
    # P X (1-P) + (1-P) X P  ==  PX + XP - 2 PXP
    PX = P @ X
    PXP = PX @ P
    Y = PX + PX.T - 2.0 * PXP
    return 0.5 * (Y + Y.T)


def tangent_project(P: np.ndarray, X: np.ndarray, check: bool = True) -> np.ndarray:
    """Orthogonal projection of a symmetric matrix onto the tangent space at ``P``.

    Computes ``P X (1-P) + (1-P) X P``.  Raises :class:`NotAProjector` when
    ``check`` is set and ``P`` is not on the manifold.
    """
    P = np.asarray(P, dtype=float)
    X = np.asarray(X, dtype=float)
    if check:
        check_projector(P)
    if X.shape != P.shape:
        raise ValueError(f"shape mismatch: P {P.shape}, X {X.shape}")
    return _project(P, X)


def is_tangent(P: np.ndarray, X: np.ndarray, tol: float = 1e-10) -> bool:
    Q = np.eye(len(P)) - P
    scale = max(np.linalg.norm(X), 1.0)
    return bool(
        np.linalg.norm(P @ X @ P) <= tol * scale
        and np.linalg.norm(Q @ X @ Q) <= tol * scale
        and abs(np.trace(X)) <= tol * scale
    )


def retract(P_tilde: np.ndarray, N: int) -> np.ndarray:
    """Map a symmetric matrix near the manifold back onto it.

    Eigenvalues above 1/2 are set to one, the others to zero.  The result
    is exactly of rank ``N`` or :class:`RetractionRankMismatch` is raised.
    """
    A = np.asarray(P_tilde, dtype=float)
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from exc
    occ = w > 0.5
    count = int(occ.sum())
    if count != N:
        raise RetractionRankMismatch(f"{count} eigenvalues above 1/2, expected {N}")
    if np.any(np.abs(w - 0.5) < 1e-12):
        raise RetractionRankMismatch("eigenvalue at the retraction threshold 1/2")
    # occupied eigenvalues are the top N of an ascending list
    Vo = V[:, len(w) - N:]
    P = Vo @ Vo.T
    return 0.5 * (P + P.T)


def random_projector(n_b: int, N: int, seed: int) -> np.ndarray:
    """``Q Q^T`` for ``Q`` an orthonormalised Gaussian ``n_b x N`` matrix."""
    if not 1 <= N <= n_b:
        raise ValueError(f"need 1 <= N <= n_b, got N={N}, n_b={n_b}")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n_b, N)))
    P = Q @ Q.T
    return 0.5 * (P + P.T)


def random_tangent(P: np.ndarray, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
    """Gaussian symmetric matrix projected onto the tangent space at ``P`` and rescaled."""
    G = rng.standard_normal(P.shape)
    X = _project(P, G + G.T)
    return norm * X / np.linalg.norm(X)


def manifold_distance(P: np.ndarray, Q: np.ndarray) -> float:
    P = np.asarray(P)
    Q = np.asarray(Q)
    if P.shape != Q.shape:
        raise ValueError(f"shape mismatch: {P.shape} vs {Q.shape}")
    return float(np.linalg.norm(P - Q))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenpairs of a symmetric matrix with an occupied/virtual split.

    Column ``k`` of ``eigenvectors`` pairs with ``eigenvalues[k]``; the first
    ``occupied_count`` columns are the occupied ones.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    occupied_count: int

    @property
    def occupied(self) -> np.ndarray:
        return self.eigenvectors[:, : self.occupied_count]

    @property
    def virtual(self) -> np.ndarray:
        return self.eigenvectors[:, self.occupied_count:]

    @property
    def gap(self) -> float:
        """``eps_{N+1} - eps_N``; ``inf`` when every state is occupied."""
        N = self.occupied_count
        if N == 0 or N >= len(self.eigenvalues):
            return float("inf")
        return float(self.eigenvalues[N] - self.eigenvalues[N - 1])

    def projector(self, indices=None) -> np.ndarray:
        """Projector onto the chosen eigenvectors (default: the lowest N)."""
        V = self.occupied if indices is None else self.eigenvectors[:, list(indices)]
        P = V @ V.T
        return 0.5 * (P + P.T)

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive (ties: lowest index)."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def spectral_decompose(A: np.ndarray, N: int) -> SpectralDecomposition:
    A = np.asarray(A, dtype=float)
    if not is_symmetric(A, rtol=1e-10):
        raise ValueError("spectral_decompose expects a symmetric matrix")
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from exc
    return SpectralDecomposition(w, fix_signs(V), int(N))
