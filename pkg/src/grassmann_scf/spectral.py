"""Linearized convergence analysis at a critical point.

Tangent vectors at a critical point ``P`` are expanded in the orthonormal
basis ``B_ia = (phi_i phi_a^T + phi_a phi_i^T)/sqrt(2)`` built from occupied
(``i``) and virtual (``a``) eigenvectors of ``H(P)``.  In that basis the
curvature operator ``Omega X = -[P, [H, X]]`` is diagonal with entries
``eps_a - eps_i``, and the projected Hessian ``K`` is assembled column by
column from ``hessian_apply``.  The gradient-descent and damped-SCF
Jacobians are ``Omega + K`` and ``1 + Omega^{-1} K``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigensolverFailure, GapTooSmall, InsufficientData, NotCritical
from .manifold import _project, check_projector, fix_signs, retract


@dataclass(frozen=True)
class TangentBasis:
    """Eigenvector basis of the tangent space at ``base_point``.

    Flat index ``k = i * n_virtual + a`` for occupied ``i`` and virtual ``a``.
    """

    base_point: np.ndarray
    occupied: np.ndarray
    virtual: np.ndarray
    occupied_energies: np.ndarray
    virtual_energies: np.ndarray

    @classmethod
    def at(cls, P: np.ndarray, H: np.ndarray) -> "TangentBasis":
        """Basis from ``H`` diagonalized separately on ``Ran P`` and ``Ran (1-P)``.

        At a critical point ``H`` commutes with ``P``, so these are eigenvectors
        of ``H`` whatever the ordering of occupied and virtual energies.
        """
        w, U = np.linalg.eigh(P)
        N = int(round(float(np.trace(P))))
        n = len(P)
        Uv, Uo = U[:, : n - N], U[:, n - N:]
        eo, Co = np.linalg.eigh(Uo.T @ H @ Uo)
        ev, Cv = np.linalg.eigh(Uv.T @ H @ Uv)
        return cls(P, fix_signs(Uo @ Co), fix_signs(Uv @ Cv), eo, ev)

    @property
    def n_occupied(self) -> int:
        return self.occupied.shape[1]

    @property
    def n_virtual(self) -> int:
        return self.virtual.shape[1]

    @property
    def dimension(self) -> int:
        return self.n_occupied * self.n_virtual

    def index(self, i: int, a: int) -> int:
        return i * self.n_virtual + a

    def pair(self, k: int) -> tuple[int, int]:
        return divmod(k, self.n_virtual)

    def element(self, k: int) -> np.ndarray:
        i, a = self.pair(k)
        u, v = self.occupied[:, i], self.virtual[:, a]
        return (np.outer(u, v) + np.outer(v, u)) / np.sqrt(2.0)

    def elements(self) -> list[np.ndarray]:
        return [self.element(k) for k in range(self.dimension)]

    def coordinates(self, X: np.ndarray) -> np.ndarray:
        """Frobenius inner products ``<B_k, X>``; exact for tangent ``X``."""
        Xs = 0.5 * (X + X.T)
        return (np.sqrt(2.0) * (self.occupied.T @ Xs @ self.virtual)).ravel()

    def from_coordinates(self, c: np.ndarray) -> np.ndarray:
        C = np.asarray(c, dtype=float).reshape(self.n_occupied, self.n_virtual)
        Y = self.occupied @ C @ self.virtual.T
        return (Y + Y.T) / np.sqrt(2.0)

    def omega_diagonal(self) -> np.ndarray:
        """``eps_a - eps_i`` in flat order."""
        return (self.virtual_energies[None, :] - self.occupied_energies[:, None]).ravel()

    def spectral_energies(self) -> np.ndarray:
        return np.sort(np.concatenate([self.occupied_energies, self.virtual_energies]))


def omega_apply(P: np.ndarray, H: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``-[P, [H, X]]``."""
    C = H @ X - X @ H
    return -(P @ C - C @ P)


def omega_inverse_apply(P, H, X, gap_tolerance: float = 1e-10) -> np.ndarray:
    basis = TangentBasis.at(P, H)
    d = basis.omega_diagonal()
    if d.size and np.min(np.abs(d)) <= gap_tolerance:
        raise GapTooSmall(f"smallest |eps_a - eps_i| = {np.min(np.abs(d)):.3e}")
    return basis.from_coordinates(basis.coordinates(X) / d)


def spectral_radius(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("spectral_radius needs a square matrix")
    try:
        return float(np.max(np.abs(np.linalg.eigvals(A))))
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from exc


@dataclass(frozen=True)
class RateReport:
    """Linearized rate data for one solver at one critical point.

    ``predicted_rate`` is the optimal-step rate ``(kappa - 1)/(kappa + 1)``;
    :meth:`rate_at` gives the rate for any other step.
    """

    kind: str
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    spectral_radius: float
    lambda_min: float
    lambda_max: float
    optimal_beta: float
    condition_number: float
    predicted_rate: float
    gap: float
    coercivity: float
    coercivity_scaled: float
    omega: np.ndarray
    hessian: np.ndarray
    basis: TangentBasis

    def iteration_matrix(self, beta: float) -> np.ndarray:
        return np.eye(len(self.jacobian)) - beta * self.jacobian

    def rate_at(self, beta: float) -> float:
        """Spectral radius of ``1 - beta J``, from the eigenvalues of ``J``."""
        return float(np.max(np.abs(1.0 - beta * self.eigenvalues)))


def assemble_operators(model, P: np.ndarray, basis: TangentBasis | None = None):
    """Diagonal of ``Omega`` and the dense projected Hessian ``K`` on the tangent basis."""
    if basis is None:
        basis = TangentBasis.at(P, model.gradient(P))
    K = np.empty((basis.dimension, basis.dimension))
    for k in range(basis.dimension):
        K[:, k] = basis.coordinates(model.hessian_apply(P, basis.element(k)))
    K = 0.5 * (K + K.T)
    return basis.omega_diagonal(), K, basis


def build_jacobian(
    model,
    P: np.ndarray,
    kind: str,
    gap_tolerance: float = 1e-10,
    critical_tolerance: float = 1e-8,
) -> RateReport:
    """Dense Jacobian of gradient descent (``kind="grad"``) or damped SCF (``"scf"``)."""
    if kind not in ("grad", "scf"):
        raise ValueError(f"kind must be 'grad' or 'scf', got {kind!r}")
    P = check_projector(P)
    H = model.gradient(P)
    res = float(np.linalg.norm(_project(P, H)))
    if res > critical_tolerance:
        raise NotCritical(f"|Pi_P H(P)| = {res:.3e} > {critical_tolerance:.1e}")
    basis = TangentBasis.at(P, H)
    omega, K, basis = assemble_operators(model, P, basis)
    n = len(omega)
    grad_op = np.diag(omega) + K
    eta = float(np.linalg.eigvalsh(grad_op)[0]) if n else float("nan")
    eta_scaled = float("nan")
    if n and np.min(omega) > gap_tolerance:
        s = 1.0 / np.sqrt(omega)
        eta_scaled = float(np.linalg.eigvalsh(s[:, None] * grad_op * s[None, :])[0])
    if kind == "grad":
        J = grad_op
        lam = np.linalg.eigvalsh(J)
    else:
        if n and np.min(omega) <= gap_tolerance:
            raise GapTooSmall(f"smallest eps_a - eps_i = {np.min(omega):.3e}")
        J = np.eye(n) + K / omega[:, None]
        # similar to the symmetric 1 + Omega^{-1/2} K Omega^{-1/2}
        s = 1.0 / np.sqrt(omega)
        lam = 1.0 + np.linalg.eigvalsh(s[:, None] * K * s[None, :])
    lam1, lamN = float(lam[0]), float(lam[-1])
    kappa = lamN / lam1 if lam1 != 0 else float("inf")
    energies = np.linalg.eigvalsh(H)
    N = basis.n_occupied
    gap = float(energies[N] - energies[N - 1]) if N < len(energies) else float("inf")
    return RateReport(
        kind=kind,
        jacobian=J,
        eigenvalues=lam,
        spectral_radius=spectral_radius(J),
        lambda_min=lam1,
        lambda_max=lamN,
        optimal_beta=2.0 / (lam1 + lamN),
        condition_number=kappa,
        predicted_rate=(kappa - 1.0) / (kappa + 1.0),
        gap=gap,
        coercivity=eta,
        coercivity_scaled=eta_scaled,
        omega=omega,
        hessian=K,
        basis=basis,
    )


def jacobian_fd(step_map, P: np.ndarray, basis: TangentBasis, h_fd: float = 1e-6,
                central: bool = False, fixed_point_tolerance: float = 1e-8) -> np.ndarray:
    """Finite-difference Jacobian of ``step_map`` at its fixed point ``P`` in basis coordinates.

    Columns are the coordinates of ``(f(R(P + h B_k)) - f(P)) / h``, with
    ``R`` the retraction, or the central variant.
    """
    N = basis.n_occupied
    fP = step_map(P)
    drift = float(np.linalg.norm(fP - P))
    if drift > fixed_point_tolerance:
        raise NotCritical(f"|f(P) - P| = {drift:.3e}; P is not a fixed point")
    n = basis.dimension
    A = np.empty((n, n))
    for k in range(n):
        B = basis.element(k)
        up = step_map(retract(P + h_fd * B, N))
        if central:
            down = step_map(retract(P - h_fd * B, N))
            A[:, k] = basis.coordinates(up - down) / (2.0 * h_fd)
        else:
            A[:, k] = basis.coordinates(up - fP) / h_fd
    return A


def observed_rate(trace, window: int, floor: float = 1e-14, skip_last: int = 0) -> float:
    """Geometric decay rate of step distances over the last ``window`` usable iterations.

    ``trace`` is a :class:`SolverTrace` or a plain sequence of distances.
    Distances that are not finite or fall below ``floor`` are dropped; the
    ``skip_last`` final usable points are excluded as well.
    """
    steps = np.asarray(trace.steps if hasattr(trace, "steps") else trace, dtype=float)
    idx = np.arange(len(steps))
    keep = np.isfinite(steps) & (steps > floor)
    idx, vals = idx[keep], steps[keep]
    if skip_last:
        idx, vals = idx[:-skip_last], vals[:-skip_last]
    if window < 2 or len(vals) < window:
        raise InsufficientData(f"need {window} usable distances, have {len(vals)}")
    x, y = idx[-window:].astype(float), np.log(vals[-window:])
    slope = np.polyfit(x - x.mean(), y, 1)[0]
    return float(np.exp(slope))
