"""Iterative solvers for minimizing an energy over rank-N projectors.

All solvers share one loop convention.  At iteration ``k`` the current
iterate ``P^k`` is evaluated (energy, residual, distance to the previous
iterate and optionally to a reference point) and recorded; if the
convergence test passes the run stops with ``iterations == k``, otherwise
``P^{k+1}`` is formed.  A run that never passes the test stops after
``max_iterations`` updates with termination ``"max_iter"``.

Breakdowns of the iteration itself (degenerate aufbau level, retraction out
of its domain, negative density in a model that needs a nonnegative one) end
the run and are reported through ``SolverTrace.termination`` rather than
raised.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AufbauDegenerate,
    ConfigError,
    LineSearchFailure,
    NonphysicalDensity,
    RetractionRankMismatch,
)
from .manifold import _project, check_projector, retract

CRITERIA = ("residual_norm", "distance_to_reference")
AUFBAU_MODES = ("lowest_N", "overlap_with_previous")
TERMINATIONS = (
    "converged",
    "max_iter",
    "aufbau_degenerate",
    "retraction_failure",
    "nonphysical",
    "line_search_failure",
    "stationary",
)

_BREAKDOWNS = {
    AufbauDegenerate: "aufbau_degenerate",
    RetractionRankMismatch: "retraction_failure",
    NonphysicalDensity: "nonphysical",
    LineSearchFailure: "line_search_failure",
}


@dataclass(frozen=True)
class SolverConfig:
    beta: float = 0.1
    max_iterations: int = 10000
    tolerance: float = 1e-10
    convergence_criterion: str = "residual_norm"
    reference: np.ndarray | None = None
    aufbau_mode: str = "lowest_N"
    gap_tolerance: float = 1e-10
    seed: int = 0
    anderson_depth: int = 5
    anderson_regularization: float = 1e-12
    record_iterates: bool = False

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.convergence_criterion not in CRITERIA:
            raise ConfigError(f"unknown convergence criterion {self.convergence_criterion!r}")
        if self.convergence_criterion == "distance_to_reference" and self.reference is None:
            raise ConfigError("distance_to_reference needs a reference point")
        if self.aufbau_mode not in AUFBAU_MODES:
            raise ConfigError(f"unknown aufbau mode {self.aufbau_mode!r}")
        if self.anderson_depth < 0:
            raise ConfigError("anderson_depth must be nonnegative")


@dataclass
class SolverTrace:
    """Per-iteration history of one solver run."""

    solver: str
    energies: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    reference_distances: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    # solver-specific per-iteration scalar (ODA: Frank-Wolfe gap)
    aux: list = field(default_factory=list)
    termination: str = "max_iter"
    iterations: int = 0
    final: np.ndarray | None = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    def step_array(self) -> np.ndarray:
        return np.asarray(self.steps, dtype=float)

    def __len__(self):
        return len(self.residuals)


@dataclass(frozen=True)
class OccupationState:
    """Natural orbitals and occupation numbers of a point in the convex hull."""

    orbitals: np.ndarray
    occupations: np.ndarray
    fermi_level: float

    def assemble(self) -> np.ndarray:
        P = (self.orbitals * self.occupations) @ self.orbitals.T
        return 0.5 * (P + P.T)

    @property
    def max_fractional(self) -> float:
        """Largest ``min(f, 1 - f)`` over the occupation numbers."""
        f = self.occupations
        return float(np.max(np.minimum(f, 1.0 - f)))

    @classmethod
    def from_density(cls, D: np.ndarray, H: np.ndarray | None = None, N: int | None = None):
        w, V = np.linalg.eigh(0.5 * (D + D.T))
        order = np.argsort(-w, kind="stable")
        occ = np.clip(w[order], 0.0, 1.0)
        mu = float("nan")
        if H is not None and N is not None:
            e = np.linalg.eigvalsh(H)
            mu = float(0.5 * (e[N - 1] + e[N])) if N < len(e) else float(e[-1])
        return cls(V[:, order], occ, mu)


class _Recorder:
    def __init__(self, name: str, config: SolverConfig):
        self.trace = SolverTrace(name)
        self.config = config
        self.ref = config.reference
        self.by_distance = config.convergence_criterion == "distance_to_reference"
        self.prev = None

    def record(self, k: int, P: np.ndarray, energy: float, residual: float) -> bool:
        """Store the diagnostics of ``P^k``; True when the run should stop."""
        t = self.trace
        t.energies.append(energy)
        t.residuals.append(residual)
        t.steps.append(np.nan if self.prev is None else float(np.linalg.norm(P - self.prev)))
        if self.ref is not None:
            dist = float(np.linalg.norm(P - self.ref))
            t.reference_distances.append(dist)
        if self.config.record_iterates:
            t.iterates.append(P.copy())
        self.prev = P
        measure = t.reference_distances[-1] if self.by_distance else residual
        if measure <= self.config.tolerance:
            t.termination = "converged"
            t.iterations = k
            t.final = P
            return True
        return False

    def exhausted(self, P: np.ndarray) -> SolverTrace:
        t = self.trace
        t.termination = "max_iter"
        t.iterations = self.config.max_iterations
        t.final = P
        return t

    def stopped(self, k: int, P: np.ndarray, label: str) -> SolverTrace:
        t = self.trace
        t.termination = label
        t.iterations = k
        t.final = P
        return t

    def broke_down(self, k: int, P: np.ndarray, exc: Exception) -> SolverTrace:
        t = self.trace
        for kind, label in _BREAKDOWNS.items():
            if isinstance(exc, kind):
                t.termination = label
                break
        t.iterations = k
        t.final = P
        t.message = str(exc)
        return t


# ---------------------------------------------------------------- aufbau

def aufbau_projector(H: np.ndarray, N: int, gap_tolerance: float = 1e-10) -> np.ndarray:
    """Projector onto the eigenvectors of the ``N`` lowest eigenvalues of ``H``."""
    w, V = np.linalg.eigh(H)
    if N < len(w) and w[N] - w[N - 1] <= gap_tolerance:
        raise AufbauDegenerate(
            f"eps_{N + 1} - eps_{N} = {w[N] - w[N - 1]:.3e} <= {gap_tolerance:.1e}"
        )
    Vo = V[:, :N]
    P = Vo @ Vo.T
    return 0.5 * (P + P.T)


def overlap_indices(V: np.ndarray, P_prev: np.ndarray, N: int) -> np.ndarray:
    """Indices of the ``N`` eigenvectors with largest overlap ``v^T P v``, ties by eigenvalue."""
    overlap = np.einsum("ij,ik,kj->j", V, P_prev, V)
    # round so that round-off does not break ties between equal overlaps
    order = np.argsort(-np.round(overlap, 12), kind="stable")
    return np.sort(order[:N])


def occupied_projector(
    H: np.ndarray,
    N: int,
    mode: str = "lowest_N",
    P_prev: np.ndarray | None = None,
    gap_tolerance: float = 1e-10,
) -> np.ndarray:
    """The SCF map: lowest-N aufbau, or the overlap-with-previous selection."""
    if mode == "lowest_N" or P_prev is None:
        return aufbau_projector(H, N, gap_tolerance)
    w, V = np.linalg.eigh(H)
    idx = overlap_indices(V, P_prev, N)
    rest = np.setdiff1d(np.arange(len(w)), idx)
    if len(rest):
        sep = np.min(np.abs(w[idx][:, None] - w[rest][None, :]))
        if sep <= gap_tolerance:
            raise AufbauDegenerate(f"selected and unselected eigenvalues within {sep:.3e}")
    Vo = V[:, idx]
    P = Vo @ Vo.T
    return 0.5 * (P + P.T)


def scf_map(model, P: np.ndarray, N: int, config: SolverConfig) -> np.ndarray:
    return occupied_projector(
        model.gradient(P), N, config.aufbau_mode, P, config.gap_tolerance
    )


def scf_diagnostics(model, P: np.ndarray, N: int, gap_tolerance: float | None = 1e-10) -> dict:
    """Residual norms that separate true SCF fixed points from spurious ones.

    With ``gap_tolerance=None`` a degenerate aufbau level is not an error;
    the lowest ``N`` eigenvectors returned by the eigensolver are used.
    """
    H = model.gradient(P)
    if gap_tolerance is None:
        V = np.linalg.eigh(H)[1][:, :N]
        Phi = V @ V.T
    else:
        Phi = aufbau_projector(H, N, gap_tolerance)
    return {
        "projected_residual": float(np.linalg.norm(_project(P, Phi - P))),
        "fixed_point_residual": float(np.linalg.norm(Phi - P)),
        "commutator": float(np.linalg.norm(H @ P - P @ H)),
        "gradient_residual": float(np.linalg.norm(_project(P, H))),
    }


def _rank(P: np.ndarray) -> int:
    return int(round(float(np.trace(P))))


# --------------------------------------------------------------- solvers

def gradient_descent(model, P0: np.ndarray, config: SolverConfig, N: int | None = None) -> SolverTrace:
    """Riemannian gradient descent with projector retraction."""
    P = check_projector(P0, N)
    N = _rank(P) if N is None else N
    rec = _Recorder("gradient", config)
    beta = config.beta
    for k in range(config.max_iterations):
        try:
            G = _project(P, model.gradient(P))
            if rec.record(k, P, model.energy(P), float(np.linalg.norm(G))):
                return rec.trace
            P = retract(P - beta * G, N)
        except tuple(_BREAKDOWNS) as exc:
            return rec.broke_down(k, P, exc)
    return rec.exhausted(P)


def gradient_step(model, beta: float, N: int):
    """The gradient-descent update as a map ``P -> P'`` (for Jacobian checks)."""
    return lambda P: retract(P - beta * _project(P, model.gradient(P)), N)


def damped_scf(model, P0: np.ndarray, config: SolverConfig, N: int | None = None) -> SolverTrace:
    """Damped SCF with the search direction projected onto the tangent space and retracted."""
    P = check_projector(P0, N)
    N = _rank(P) if N is None else N
    rec = _Recorder("scf", config)
    beta = config.beta
    for k in range(config.max_iterations):
        try:
            D = _project(P, scf_map(model, P, N, config) - P)
            if rec.record(k, P, model.energy(P), float(np.linalg.norm(D))):
                return rec.trace
            P = retract(P + beta * D, N)
        except tuple(_BREAKDOWNS) as exc:
            return rec.broke_down(k, P, exc)
    return rec.exhausted(P)


def scf_step(model, beta: float, N: int, gap_tolerance: float = 1e-10):
    """The retracted damped-SCF update as a map ``P -> P'``."""

    def step(P):
        Phi = aufbau_projector(model.gradient(P), N, gap_tolerance)
        return retract(P + beta * _project(P, Phi - P), N)

    return step


def _check_trace(P0, N):
    P = np.asarray(P0, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P0 must be a square matrix")
    if np.linalg.norm(P - P.T) > 1e-12 * max(np.linalg.norm(P), 1.0):
        raise ValueError("P0 must be symmetric")
    tr = float(np.trace(P))
    if N is None:
        N = int(round(tr))
    if abs(tr - N) > 1e-10:
        raise ValueError(f"trace of P0 is {tr}, expected {N}")
    return 0.5 * (P + P.T), N


def damped_scf_nonretracted(model, P0: np.ndarray, config: SolverConfig, N: int | None = None) -> SolverTrace:
    """Density mixing ``P <- P + beta (Phi(P) - P)``, which may leave the manifold."""
    P, N = _check_trace(P0, N)
    rec = _Recorder("mixing", config)
    beta = config.beta
    for k in range(config.max_iterations):
        try:
            Phi = scf_map(model, P, N, config)
            if rec.record(k, P, model.energy(P), float(np.linalg.norm(Phi - P))):
                return rec.trace
            P = Phi if beta == 1.0 else P + beta * (Phi - P)
        except tuple(_BREAKDOWNS) as exc:
            return rec.broke_down(k, P, exc)
    return rec.exhausted(P)


def roothaan_scf(model, P0: np.ndarray, config: SolverConfig, N: int | None = None) -> SolverTrace:
    """Undamped SCF ``P <- Phi(P)``.  Every iterate is kept in ``trace.iterates``."""
    P = check_projector(P0, N)
    N = _rank(P) if N is None else N
    rec = _Recorder("roothaan", config)
    keep = not config.record_iterates
    for k in range(config.max_iterations):
        try:
            Phi = scf_map(model, P, N, config)
            if keep:
                rec.trace.iterates.append(P)
            if rec.record(k, P, model.energy(P), float(np.linalg.norm(Phi - P))):
                return rec.trace
            P = Phi
        except tuple(_BREAKDOWNS) as exc:
            return rec.broke_down(k, P, exc)
    if keep:
        rec.trace.iterates.append(P)
    return rec.exhausted(P)


def anderson_mixing(model, P0: np.ndarray, config: SolverConfig, N: int | None = None) -> SolverTrace:
    """Anderson (DIIS) acceleration of density mixing.

    The fixed-point residual is ``f(P) = beta (Phi(P) - P)``.  The next iterate
    is ``P + f - (dP + dF) gamma`` where ``gamma`` solves the regularised
    least-squares problem on the last ``anderson_depth`` residual differences.
    Rank-deficient systems fall back to the plain mixing step.
    """
    P, N = _check_trace(P0, N)
    rec = _Recorder("anderson", config)
    beta = config.beta
    m = config.anderson_depth
    reg = config.anderson_regularization
    dP: list[np.ndarray] = []
    dF: list[np.ndarray] = []
    prev_P = prev_f = None
    for k in range(config.max_iterations):
        try:
            Phi = scf_map(model, P, N, config)
            f = beta * (Phi - P)
            if rec.record(k, P, model.energy(P), float(np.linalg.norm(Phi - P))):
                return rec.trace
            if m > 0 and prev_P is not None:
                dP.append(P - prev_P)
                dF.append(f - prev_f)
                if len(dP) > m:
                    dP.pop(0)
                    dF.pop(0)
            prev_P, prev_f = P, f
            new = P + f
            if dF:
                Fm = np.stack([d.ravel() for d in dF], axis=1)
                A = Fm.T @ Fm
                scale = np.trace(A) / len(A)
                A = A + reg * max(scale, 1e-300) * np.eye(len(A))
                if np.linalg.cond(A) < 1e12:
                    gamma = np.linalg.solve(A, Fm.T @ f.ravel())
                    for g, dp, df in zip(gamma, dP, dF):
                        new = new - g * (dp + df)
                else:
                    dP.clear()
                    dF.clear()
            P = 0.5 * (new + new.T)
        except tuple(_BREAKDOWNS) as exc:
            return rec.broke_down(k, P, exc)
    return rec.exhausted(P)


# ------------------------------------------------------------------- ODA

def _disk_minimize(G: np.ndarray, g: np.ndarray, center=(0.5, 0.0), radius: float = 0.5) -> np.ndarray:
    """Minimize ``x^T G x / 2 + g^T x`` over the disk ``|x - center| <= radius``."""
    c = np.asarray(center, dtype=float)
    gc = g + G @ c
    w, V = np.linalg.eigh(G)
    if w.min() > 1e-14 * max(1.0, abs(w).max()):
        y = -np.linalg.solve(G, gc)
        if np.linalg.norm(y) <= radius:
            return y + c
    gt = V.T @ gc
    if np.linalg.norm(gt) == 0.0:
        # stationary at the centre with an indefinite G: step along the lowest curvature
        return c + radius * V[:, 0]

    def excess(lam):
        return np.linalg.norm(gt / (w + lam)) - radius

    lo = max(0.0, -w.min())
    hi = lo + 1.0
    while excess(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return V @ (-gt / (w + hi)) + c


def _golden_section(fun, tol: float = 1e-12):
    """Minimize a unimodal function on [0, 1] by golden-section search."""
    inv = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, 1.0
    x1, x2 = b - inv * (b - a), a + inv * (b - a)
    f1, f2 = fun(x1), fun(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = fun(x2)
    return 0.5 * (a + b)


def _is_quadratic(model) -> bool:
    return bool(getattr(model, "is_quadratic", False))


def _frame_gap(Phi: np.ndarray, w: np.ndarray, V: np.ndarray, N: int) -> float:
    """``Tr(H Phi Phi^T) - sum_{i<=N} eps_i`` without cancellation.

    With ``X = V^T Phi`` split into occupied rows ``X_o`` and virtual rows
    ``X_v``, the gap is ``sum_a (eps_a - mu) |X_a|^2 + sum_i (mu - eps_i)
    (1 - |X_i|^2)`` for ``mu = eps_N``; every term is non-negative, and
    ``1 - |X_i|^2`` is the diagonal of ``O X_v^T X_v O^T`` with ``O`` the polar
    factor of ``X_o``, so the result is accurate relative to its own size.
    """
    X = V.T @ Phi
    Xo, Xv = X[:N], X[N:]
    mu = w[N - 1]
    virtual = float(np.sum((w[N:] - mu) * np.sum(Xv * Xv, axis=1)))
    U, sv, Wt = np.linalg.svd(Xo)
    if sv.min() < 0.5:
        missing = 1.0 - np.sum(Xo * Xo, axis=1)
    else:
        O = U @ Wt
        K = Xv.T @ Xv
        missing = np.einsum("ij,jk,ik->i", O, K, O)
    return virtual + float(np.sum((mu - w[:N]) * missing))


class _HullPoint:
    """Convex combination ``sum_j c_j Phi_j Phi_j^T`` of rank-N projectors.

    An optional dense term ``c_0 D_0`` holds a starting density that is not a
    projector; it is handled without the cancellation-free gap.
    """

    # weights below this are dropped; they cannot move D or its gap in float64
    DROP = 1e-20

    def __init__(self, n: int):
        self.n = n
        self.weights: list[float] = []
        self.frames: list[np.ndarray] = []
        self.dense_weight = 0.0
        self.dense = None

    @classmethod
    def from_density(cls, D: np.ndarray, N: int) -> "_HullPoint":
        n = len(D)
        point = cls(n)
        w, V = np.linalg.eigh(D)
        if np.all(np.abs(w[: n - N]) < 1e-10) and np.all(np.abs(w[n - N :] - 1.0) < 1e-10):
            point.weights, point.frames = [1.0], [V[:, n - N :]]
        else:
            point.dense_weight, point.dense = 1.0, D.copy()
        return point

    def assemble(self) -> np.ndarray:
        D = np.zeros((self.n, self.n)) if self.dense is None else self.dense_weight * self.dense
        for c, Phi in zip(self.weights, self.frames):
            D = D + c * (Phi @ Phi.T)
        return 0.5 * (D + D.T)

    def gap(self, w: np.ndarray, V: np.ndarray, N: int) -> float:
        out = sum(c * _frame_gap(Phi, w, V, N) for c, Phi in zip(self.weights, self.frames))
        if self.dense is not None:
            H = (V * w) @ V.T
            out += self.dense_weight * (float(np.sum(H * self.dense)) - float(np.sum(w[:N])))
        return out

    def mix(self, lam: float, other: "_HullPoint") -> "_HullPoint":
        """``(1 - lam) self + lam other``."""
        out = _HullPoint(self.n)
        for src, scale in ((self, 1.0 - lam), (other, lam)):
            for c, Phi in zip(src.weights, src.frames):
                if c * scale > self.DROP:
                    out.weights.append(c * scale)
                    out.frames.append(Phi)
            if src.dense is not None and src.dense_weight * scale > self.DROP:
                out.dense_weight, out.dense = src.dense_weight * scale, src.dense
        return out


# ODA iterations without a new lowest residual after which the run is stationary
_STALL_STEPS = 20


def oda(model, P0, config: SolverConfig, N: int | None = None):
    """Optimal damping over the convex hull of the rank-N projectors.

    Each step builds a trial density from the aufbau eigenvectors of
    ``H(D)``: the lowest ``N - 1`` are fully occupied and the frontier pair
    ``(eps_N, eps_{N+1})`` carries an arbitrary 2x2 density block, chosen to
    minimize the second-order model of the energy.  This fills a degenerate
    Fermi level fractionally when that lowers the energy and reduces to the
    plain aufbau projector otherwise.  The new density is the minimizer of the
    energy on the segment between ``D`` and the trial density (exactly for
    quadratic energies, by golden-section search otherwise).

    The residual is ``|T(D) - D|_F`` where ``T(D)`` is the trial density, so
    fixed points of the trial map are exactly the converged states.  The
    Frank-Wolfe gap ``Tr(H D) - sum_{i<=N} eps_i`` is kept in ``trace.aux``.

    The slope along a step is second order in the distance to the minimizer,
    so evaluating it from a dense ``D`` would lose it to round-off near
    ``|D - D_*| ~ 1e-7``.  The iterate is therefore kept as a convex
    combination of projectors (the trial density is one: ``t_+ P_+ + t_- P_-``),
    and slopes are differences of Frank-Wolfe gaps, which are affine in ``D``
    and evaluated term by term without cancellation.  When the residual has
    not reached a new low for 20 iterations the iterate sits at the
    floating-point floor of the descent test and the run ends with
    termination ``"stationary"``.

    Returns ``(OccupationState, SolverTrace)``.
    """
    if isinstance(P0, OccupationState):
        P0 = P0.assemble()
    D, N = _check_trace(P0, N)
    n = len(D)
    w0 = np.linalg.eigvalsh(D)
    if w0.min() < -1e-10 or w0.max() > 1 + 1e-10:
        raise ValueError("P0 is outside the convex hull (eigenvalues not in [0, 1])")
    point = _HullPoint.from_density(D, N)
    D = point.assemble()
    rec = _Recorder("oda", config)
    quadratic = _is_quadratic(model)
    H = model.gradient(D)
    best, best_k = np.inf, 0
    for k in range(config.max_iterations):
        try:
            w, V = np.linalg.eigh(H)
            E = model.energy(D)
            vertex = _HullPoint(n)
            vertex.weights, vertex.frames = [1.0], [V[:, :N]]
            trial, trial_gap = vertex, 0.0
            if N < n:
                a, b = V[:, N - 1], V[:, N]
                B = V[:, : N - 1] @ V[:, : N - 1].T
                U = np.outer(a, a) - np.outer(b, b)
                W = np.outer(a, b) + np.outer(b, a)
                HU = model.hessian_apply(D, U)
                HW = model.hessian_apply(D, W)
                HY = model.hessian_apply(D, B + np.outer(b, b) - D)
                G = np.array(
                    [[np.sum(U * HU), np.sum(U * HW)], [np.sum(W * HU), np.sum(W * HW)]]
                )
                G = 0.5 * (G + G.T)
                g = np.array([w[N - 1] - w[N] + np.sum(U * HY), np.sum(W * HY)])
                q, r = _disk_minimize(G, g)
                # trial = t_+ P_+ + t_- P_- from the eigenpairs of the frontier block
                t, Q = np.linalg.eigh(np.array([[q, r], [r, 1.0 - q]]))
                t = np.clip(t, 0.0, 1.0)
                pair = np.column_stack([a, b]) @ Q
                trial = _HullPoint(n)
                for weight, psi in ((t[1], pair[:, 1]), (t[0], pair[:, 0])):
                    if weight > _HullPoint.DROP:
                        trial.weights.append(float(weight))
                        trial.frames.append(np.column_stack([V[:, : N - 1], psi]))
                total = sum(trial.weights)
                trial.weights = [c / total for c in trial.weights]
                trial_gap = trial.gap(w, V, N)
            gap = point.gap(w, V, N)
            rec.trace.aux.append(gap)
            T = trial.assemble()
            residual = float(np.linalg.norm(T - D))
            if rec.record(k, D, E, residual):
                break
            if residual < best:
                best, best_k = residual, k
            elif k - best_k >= _STALL_STEPS:
                trace = rec.stopped(k, D, "stationary")
                return OccupationState.from_density(D, H, N), trace
            target, slope = trial, trial_gap - gap
            if slope >= 0:
                # no descent towards the trial density; fall back to the aufbau vertex
                target, slope, T = vertex, -gap, vertex.assemble()
            X = T - D
            if slope >= 0:
                lam = 0.0
            elif quadratic:
                curv = float(np.sum(X * model.hessian_apply(D, X)))
                lam = 1.0 if curv <= 0 else min(1.0, -slope / curv)
            else:
                lam = _golden_section(lambda x: model.energy(D + x * X))
            new_point = point.mix(lam, target)
            D_new = new_point.assemble()
            E_new = model.energy(D_new)
            if E_new > E + 1e-10 * max(1.0, abs(E)):
                raise LineSearchFailure(f"energy rose from {E!r} to {E_new!r}")
            point, D = new_point, D_new
            H = model.gradient(D)
        except tuple(_BREAKDOWNS) as exc:
            trace = rec.broke_down(k, D, exc)
            return OccupationState.from_density(D, model.gradient(D), N), trace
    else:
        rec.exhausted(D)
    trace = rec.trace
    return OccupationState.from_density(trace.final, H, N), trace
