import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grassmann_scf.errors import GapTooSmall, InsufficientData, NotCritical
from grassmann_scf.manifold import random_projector, random_tangent
from grassmann_scf.models import GrossPitaevskii1D, LinearModel, ToyGapModel, toy_analytic_minimizer
from grassmann_scf.solvers import (
    SolverConfig,
    aufbau_projector,
    damped_scf,
    gradient_step,
    scf_step,
)
from grassmann_scf.spectral import (
    TangentBasis,
    build_jacobian,
    jacobian_fd,
    observed_rate,
    omega_apply,
    omega_inverse_apply,
    spectral_radius,
)

from conftest import random_symmetric

seeds = st.integers(0, 2**31 - 1)


def critical_linear(seed, n=6, N=2):
    rng = np.random.default_rng(seed)
    H = random_symmetric(rng, n)
    return H, aufbau_projector(H, N)


def gp_minimizer(n=30, alpha=10.0, N=1):
    m = GrossPitaevskii1D(n, alpha)
    t = damped_scf(m, aufbau_projector(m.h, N), SolverConfig(beta=0.3, tolerance=1e-13, max_iterations=20000), N=N)
    assert t.converged
    return m, t.final


class TestTangentBasis:
    @given(seeds)
    def test_orthonormal(self, seed):
        H, P = critical_linear(seed)
        basis = TangentBasis.at(P, H)
        B = np.array([b.ravel() for b in basis.elements()])
        np.testing.assert_allclose(B @ B.T, np.eye(basis.dimension), atol=1e-12)

    @given(seeds)
    def test_coordinate_round_trip(self, seed):
        H, P = critical_linear(seed)
        basis = TangentBasis.at(P, H)
        X = random_tangent(P, np.random.default_rng(seed + 1))
        np.testing.assert_allclose(basis.from_coordinates(basis.coordinates(X)), X, atol=1e-12)

    def test_dimension_and_index(self):
        H, P = critical_linear(0, n=5, N=2)
        basis = TangentBasis.at(P, H)
        assert basis.dimension == 6
        assert basis.pair(basis.index(1, 2)) == (1, 2)


class TestOmega:
    @given(seeds)
    def test_eigen_relation(self, seed):
        H, P = critical_linear(seed)
        basis = TangentBasis.at(P, H)
        for k, d in enumerate(basis.omega_diagonal()):
            B = basis.element(k)
            np.testing.assert_allclose(omega_apply(P, H, B), d * B, atol=1e-11 * np.abs(H).max())

    @given(seeds)
    def test_inverse_round_trip(self, seed):
        H, P = critical_linear(seed)
        X = random_tangent(P, np.random.default_rng(seed + 1))
        Y = omega_inverse_apply(P, H, omega_apply(P, H, X))
        np.testing.assert_allclose(Y, X, atol=1e-9)

    def test_gap_too_small(self):
        H = np.diag([0.0, 1.0, 1.0])
        P = np.diag([0.0, 1.0, 0.0])
        with pytest.raises(GapTooSmall):
            omega_inverse_apply(P, H, np.zeros((3, 3)))


class TestSpectralRadius:
    def test_rotation(self):
        assert spectral_radius(np.array([[0.0, 1.0], [-1.0, 0.0]])) == pytest.approx(1.0)

    def test_diagonal(self):
        assert spectral_radius(np.diag([0.5, -0.9, 0.1])) == pytest.approx(0.9)

    def test_nonnormal(self):
        assert spectral_radius(np.array([[0.5, 100.0], [0.0, 0.5]])) == pytest.approx(0.5)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            spectral_radius(np.ones((2, 3)))


class TestLinearReport:
    def test_gradient_spectrum_is_energy_differences(self):
        H, P = critical_linear(3, n=6, N=2)
        rep = build_jacobian(LinearModel(H), P, "grad")
        e = np.linalg.eigvalsh(H)
        expected = np.sort([e[a] - e[i] for i in range(2) for a in range(2, 6)])
        np.testing.assert_allclose(rep.eigenvalues, expected, atol=1e-10)
        assert rep.lambda_min == pytest.approx(e[2] - e[1])
        assert rep.condition_number == pytest.approx((e[5] - e[0]) / (e[2] - e[1]))
        assert rep.gap == pytest.approx(e[2] - e[1])

    def test_scf_jacobian_is_identity(self):
        H, P = critical_linear(4)
        rep = build_jacobian(LinearModel(H), P, "scf")
        np.testing.assert_allclose(rep.jacobian, np.eye(rep.basis.dimension), atol=1e-14)
        assert rep.predicted_rate == pytest.approx(0.0, abs=1e-14)

    def test_rate_at_optimal_step(self):
        H, P = critical_linear(5)
        rep = build_jacobian(LinearModel(H), P, "grad")
        assert rep.rate_at(rep.optimal_beta) == pytest.approx(rep.predicted_rate, rel=1e-12)
        assert rep.rate_at(1e-3) == pytest.approx(spectral_radius(rep.iteration_matrix(1e-3)), rel=1e-10)

    def test_not_critical(self):
        H = np.diag([0.0, 1.0, 2.0])
        with pytest.raises(NotCritical):
            build_jacobian(LinearModel(H), random_projector(3, 1, 0), "grad")

    def test_bad_kind(self):
        H, P = critical_linear(0)
        with pytest.raises(ValueError):
            build_jacobian(LinearModel(H), P, "newton")


class TestToyJacobians:
    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.5])
    def test_closed_forms(self, eps):
        P, nu = toy_analytic_minimizer(eps)
        m = ToyGapModel(eps)
        scf = build_jacobian(m, P, "scf")
        grad = build_jacobian(m, P, "grad")
        assert abs(scf.eigenvalues[0] - (1.0 + 2.0 / nu)) <= 1e-8
        assert abs(grad.eigenvalues[0] - (nu + 2.0)) <= 1e-8

    @pytest.mark.parametrize("kind,beta", [("grad", 0.1), ("scf", 0.1)])
    def test_fd_matches_iteration_matrix(self, kind, beta):
        eps = 0.3
        P, _ = toy_analytic_minimizer(eps)
        m = ToyGapModel(eps)
        rep = build_jacobian(m, P, kind)
        step = gradient_step(m, beta, 1) if kind == "grad" else scf_step(m, beta, 1)
        fd = jacobian_fd(step, P, rep.basis, central=True)
        np.testing.assert_allclose(fd, rep.iteration_matrix(beta), atol=1e-5)


class TestGPJacobians:
    @pytest.fixture(scope="class")
    @staticmethod
    def point():
        return gp_minimizer()

    def test_fd_matches_analytic(self, point):
        m, P = point
        for kind, beta, step in (
            ("grad", 1e-4, gradient_step(m, 1e-4, 1)),
            ("scf", 0.2, scf_step(m, 0.2, 1)),
        ):
            rep = build_jacobian(m, P, kind)
            fd = jacobian_fd(step, P, rep.basis, central=True)
            A = rep.iteration_matrix(beta)
            assert np.abs(fd - A).max() <= 1e-4 * max(1.0, np.abs(A).max())

    def test_splitting_identity(self, point):
        m, P = point
        scf = build_jacobian(m, P, "scf")
        grad = build_jacobian(m, P, "grad")
        J = np.diag(1.0 / scf.omega) @ grad.jacobian
        assert np.abs(J - scf.jacobian).max() <= 1e-10

    def test_scf_spectrum_real_and_consistent(self, point):
        m, P = point
        rep = build_jacobian(m, P, "scf")
        ev = np.linalg.eigvals(rep.jacobian)
        assert np.max(np.abs(ev.imag)) <= 1e-8
        np.testing.assert_allclose(np.sort(ev.real), rep.eigenvalues, rtol=1e-8)
        assert rep.lambda_min >= 1.0 - 1e-12

    def test_coercivity(self, point):
        m, P = point
        rep = build_jacobian(m, P, "grad")
        assert rep.coercivity == pytest.approx(rep.lambda_min)
        assert rep.coercivity > 0 and rep.coercivity_scaled > 0


class TestObservedRate:
    def test_geometric(self):
        steps = [np.nan] + [0.9**k for k in range(1, 60)]
        assert observed_rate(steps, 30) == pytest.approx(0.9, rel=1e-10)

    def test_floor_drops_tail(self):
        steps = [0.5**k for k in range(60)] + [0.0, 1e-20]
        assert observed_rate(steps, 10, floor=1e-14) == pytest.approx(0.5, rel=1e-10)

    def test_skip_last(self):
        steps = [0.8**k for k in range(40)] + [1e-3, 1e-3]
        assert observed_rate(steps, 20, skip_last=2) == pytest.approx(0.8, rel=1e-10)

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            observed_rate([1.0, 0.5], 5)

    def test_accepts_trace(self):
        class Fake:
            steps = [np.nan, 1.0, 0.5, 0.25, 0.125]

        assert observed_rate(Fake(), 4) == pytest.approx(0.5)
