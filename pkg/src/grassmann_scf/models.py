"""Energy functionals on symmetric matrices.

Every model exposes ``energy``, ``gradient`` (the mean-field Hamiltonian),
``hessian_apply`` and ``density``.  All four are defined on arbitrary
symmetric matrices, not only on projectors, since density mixing leaves the
manifold.
"""
from __future__ import annotations

import numpy as np

from .errors import NonphysicalDensity

NEGATIVE_DENSITY_CLAMP = 1e-14


class EnergyModel:
    """Common interface.  Subclasses set ``n_b`` and implement the four methods."""

    n_b: int
    # True when E is a polynomial of degree <= 2 in P
    is_quadratic: bool = False

    def energy(self, P: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, P: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian_apply(self, P: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def density(self, P: np.ndarray) -> np.ndarray:
        return np.diag(P).copy()

    # Argument checking shared by subclasses.
    def _check(self, P: np.ndarray) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        if P.shape != (self.n_b, self.n_b):
            raise ValueError(f"expected a {self.n_b}x{self.n_b} matrix, got shape {P.shape}")
        return P


class LinearModel(EnergyModel):
    """``E(P) = Tr(H0 P)``; constant Hamiltonian, zero Hessian."""

    is_quadratic = True

    def __init__(self, H0):
        H0 = np.array(H0, dtype=float)
        if H0.ndim != 2 or H0.shape[0] != H0.shape[1]:
            raise ValueError("H0 must be square")
        if np.linalg.norm(H0 - H0.T) > 1e-12 * max(np.linalg.norm(H0), 1.0):
            raise ValueError("H0 must be symmetric")
        self.H0 = 0.5 * (H0 + H0.T)
        self.H0.setflags(write=False)
        self.n_b = len(H0)

    def energy(self, P):
        P = self._check(P)
        return float(np.sum(self.H0 * P))

    def gradient(self, P):
        self._check(P)
        return self.H0.copy()

    def hessian_apply(self, P, X):
        self._check(P)
        return np.zeros_like(np.asarray(X, dtype=float))


def toy_target(epsilon: float) -> np.ndarray:
    return np.array([[1.0, epsilon], [epsilon, 0.0]])


class ToyGapModel(EnergyModel):
    """``E(P) = Tr((P - M)^2)`` with ``M = [[1, eps], [eps, 0]]`` on 2x2 matrices."""

    is_quadratic = True

    def __init__(self, epsilon: float):
        if epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        self.epsilon = float(epsilon)
        self.n_b = 2
        self.M = toy_target(self.epsilon)
        self.M.setflags(write=False)

    def energy(self, P):
        D = self._check(P) - self.M
        return float(np.sum(D * D.T))

    def gradient(self, P):
        return 2.0 * (self._check(P) - self.M)

    def hessian_apply(self, P, X):
        self._check(P)
        return 2.0 * np.asarray(X, dtype=float)


def toy_occupation(epsilon: float) -> float:
    """Weight ``a`` of the second basis state in the minimizer along the rank-1 path."""
    t = 4.0 * epsilon**2 / (1.0 + 4.0 * epsilon**2)
    # 1 - sqrt(1 - t) without cancellation for small t
    return 0.5 * t / (1.0 + np.sqrt(1.0 - t))


def toy_path_point(a: float) -> np.ndarray:
    """Rank-1 projector ``[[1-a, b], [b, a]]`` with ``b = sqrt(a(1-a))``."""
    b = np.sqrt(a * (1.0 - a))
    return np.array([[1.0 - a, b], [b, a]])


def toy_path_energy(a: float, epsilon: float) -> float:
    """Energy of :func:`toy_path_point` in closed form."""
    return 2.0 * (a + epsilon**2 - 2.0 * epsilon * np.sqrt(a * (1.0 - a)))


def toy_gap(epsilon: float) -> float:
    a = toy_occupation(epsilon)
    return 4.0 * float(np.sqrt(a**2 + (np.sqrt(a * (1.0 - a)) - epsilon) ** 2))


def toy_analytic_minimizer(epsilon: float) -> tuple[np.ndarray, float]:
    """Minimizing projector of the toy model and its Hamiltonian gap."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    a = toy_occupation(epsilon)
    return toy_path_point(a), toy_gap(epsilon)


CHAOS_CORE = np.array(
    [
        [1.4299, -0.2839, -0.4056],
        [-0.2839, 1.1874, 0.2678],
        [-0.4056, 0.2678, 2.3826],
    ]
)
CHAOS_CORE.setflags(write=False)


def _clamped_density(rho: np.ndarray, need_nonnegative: bool) -> np.ndarray:
    rho = rho.copy()
    tiny = np.abs(rho) < NEGATIVE_DENSITY_CLAMP
    rho[tiny & (rho < 0)] = 0.0
    if need_nonnegative and np.any(rho < 0):
        raise NonphysicalDensity(f"negative density entry {rho.min():.3e}")
    return rho


class ChaosModel(EnergyModel):
    """Three-site model with a Hartree-like term and a local exchange-like term.

    ``E(P) = Tr(hP) + s * [(c1/2) rho^T J rho - c2 sum_j rho_j^(4/3)]`` where
    ``rho = diag(P)``, ``J = h^{-1}`` and ``s`` is ``nonlinear_scale``.
    With ``s = 1`` this is the bare functional; the chaos experiment uses
    ``s = 2`` (see the README for why).
    """

    def __init__(self, c1: float, c2: float, nonlinear_scale: float = 1.0, h=None):
        if c1 < 0 or c2 < 0:
            raise ValueError("c1 and c2 must be nonnegative")
        self.c1 = float(c1)
        self.c2 = float(c2)
        self.nonlinear_scale = float(nonlinear_scale)
        self.is_quadratic = self.c2 == 0
        h = CHAOS_CORE if h is None else np.asarray(h, dtype=float)
        self.h = np.array(h)
        self.n_b = len(self.h)
        w, V = np.linalg.eigh(self.h)
        self.J = (V / w) @ V.T
        self.J = 0.5 * (self.J + self.J.T)
        self.h.setflags(write=False)
        self.J.setflags(write=False)

    def _rho(self, P):
        return _clamped_density(np.diag(self._check(P)), self.c2 > 0)

    def energy(self, P):
        P = self._check(P)
        rho = self._rho(P)
        nonlin = 0.5 * self.c1 * rho @ self.J @ rho - self.c2 * np.sum(rho * np.cbrt(rho))
        return float(np.sum(self.h * P) + self.nonlinear_scale * nonlin)

    def gradient(self, P):
        rho = self._rho(P)
        v = self.c1 * (self.J @ rho) - (4.0 / 3.0) * self.c2 * np.cbrt(rho)
        return self.h + self.nonlinear_scale * np.diag(v)

    def hessian_apply(self, P, X):
        rho = self._rho(P)
        x = np.diag(np.asarray(X, dtype=float))
        v = self.c1 * (self.J @ x)
        if self.c2 > 0:
            if np.any(rho == 0):
                raise NonphysicalDensity("Hessian of rho^(4/3) is singular at zero density")
            v = v - (4.0 / 9.0) * self.c2 * x / np.cbrt(rho) ** 2
        return self.nonlinear_scale * np.diag(v)


def double_well(x, C: float = 20.0, c: float = 30.0):
    """Asymmetric periodic double-well potential on [0, 1)."""
    x = np.asarray(x, dtype=float)
    return -C * (
        np.exp(-c * np.cos(np.pi * (x - 0.20)) ** 2)
        + 2.0 * np.exp(-c * np.cos(np.pi * (x + 0.25)) ** 2)
    )


class GrossPitaevskii1D(EnergyModel):
    """Periodic finite-difference lattice with a local quadratic interaction.

    ``E(P) = Tr(hP) + (alpha/2) * delta * sum_i (P_ii/delta)^2`` on ``n_b``
    grid points ``x_i = i*delta``, ``delta = 1/n_b``.
    """

    is_quadratic = True

    def __init__(self, n_b: int, alpha: float, C: float = 20.0, c: float = 30.0):
        if n_b < 3:
            raise ValueError("need at least 3 grid points")
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        self.n_b = int(n_b)
        self.alpha = float(alpha)
        self.C = float(C)
        self.c = float(c)
        self.delta = 1.0 / self.n_b
        self.grid = self.delta * np.arange(1, self.n_b + 1)
        self.potential = double_well(self.grid, self.C, self.c)
        d2 = self.delta**2
        h = np.diag(1.0 / d2 + self.potential)
        off = -0.5 / d2
        idx = np.arange(self.n_b)
        h[idx, (idx + 1) % self.n_b] = off
        h[(idx + 1) % self.n_b, idx] = off
        self.h = h
        self.h.setflags(write=False)
        self.potential.setflags(write=False)

    def density(self, P):
        return np.diag(self._check(P)) / self.delta

    def energy(self, P):
        P = self._check(P)
        rho = np.diag(P) / self.delta
        return float(np.sum(self.h * P) + 0.5 * self.alpha * self.delta * np.sum(rho**2))

    def gradient(self, P):
        return self.h + self.alpha * np.diag(self.density(P))

    def hessian_apply(self, P, X):
        self._check(P)
        return (self.alpha / self.delta) * np.diag(np.diag(np.asarray(X, dtype=float)))

    def effective_potential(self, P):
        """``V + alpha * rho`` on the grid."""
        return self.potential + self.alpha * self.density(P)
