import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from geophase.errors import PhysicsError, ValidationError
from geophase.evolution import (TimeGrid, UnitaryPath, build_parallel_family, compute_trajectory, connection_factor,
                                evolve, gauge_trajectories, parallel_transport_path, parallel_transport_unitary,
                                subspace_parallel_transport, vectorized)
from geophase.linalg import OrthonormalBasis, SpectralDensity, dagger, unitarity_residual
from geophase.paths import random_hermitian, random_schedule, random_smooth_path
from geophase.phases import random_gauge

seeds = st.integers(0, 2**32 - 1)


def ode_propagator(path, rtol=1e-11):
    """Reference ``U(tau)`` from an adaptive ODE solve of ``dU/dt = -i H U``."""
    d = path.dim

    def rhs(t, y):
        s = min(int(np.searchsorted(path.breakpoints(), t, side="right")) - 1, len(path.segments) - 1)
        h = path.segments[s].at(t)
        return (-1j * h @ y.reshape(d, d)).ravel()

    sol = solve_ivp(rhs, (0.0, path.duration), np.eye(d, dtype=complex).ravel(), method="DOP853",
                    rtol=rtol, atol=rtol * 1e-2)
    return sol.y[:, -1].reshape(d, d)


class TestSchedule:
    def test_overlap_names_interval(self):
        h = np.diag([1.0, -1.0]).astype(complex)
        with pytest.raises(ValidationError, match=r"interval 1 \[0.4, 1.0\] overlaps"):
            UnitaryPath.from_schedule([(0.0, 0.5, h), (0.4, 1.0, h)])

    def test_gap_names_interval(self):
        h = np.eye(2, dtype=complex)
        with pytest.raises(ValidationError, match="leaves a gap"):
            UnitaryPath.from_schedule([(0.0, 0.5, h), (0.6, 1.0, h)])

    def test_non_hermitian_generator(self):
        with pytest.raises(PhysicsError):
            UnitaryPath.constant(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)

    def test_samples_must_start_at_identity(self):
        u = np.stack([np.diag([1j, -1j])] * 3)
        with pytest.raises(ValidationError, match="identity"):
            UnitaryPath.from_samples([0.0, 0.5, 1.0], u)

    def test_grid_must_start_at_zero(self):
        with pytest.raises(ValidationError):
            TimeGrid(np.array([0.1, 0.5, 1.0]))


@given(seeds, st.integers(2, 4))
def test_constant_segments_are_exact(seed, dim):
    rng = np.random.default_rng(seed)
    path = random_schedule(rng, dim, n_segments=3)
    expected = np.eye(dim, dtype=complex)
    for seg in path.segments:
        expected = scipy.linalg.expm(-1j * seg.generator * (seg.end - seg.start)) @ expected
    u = evolve(path, TimeGrid.uniform(path.duration, 7))
    assert np.allclose(u[-1], expected, atol=1e-12)
    assert unitarity_residual(u) < 1e-12


def test_time_dependent_matches_ode_reference(rng):
    path = random_smooth_path(rng, 3, duration=1.5)
    u = evolve(path, TimeGrid.uniform(path.duration, 4000))[-1]
    assert np.max(np.abs(u - ode_propagator(path))) < 1e-7


def test_exponential_midpoint_is_second_order(rng):
    path = random_smooth_path(rng, 2)
    ref = ode_propagator(path)
    errs = [np.max(np.abs(evolve(path, TimeGrid.uniform(1.0, n))[-1] - ref)) for n in (50, 100, 200)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.5 < coarse / fine < 4.5


def test_non_vectorized_callable_matches_vectorized(rng):
    a, b = random_hermitian(rng, 2), random_hermitian(rng, 2)

    def plain(t):
        return a + np.sin(3 * t) * b

    @vectorized
    def stacked(t):
        return a + np.sin(3 * np.asarray(t))[..., None, None] * b

    grid = TimeGrid.uniform(1.0, 64)
    u1 = evolve(UnitaryPath.from_schedule([(0.0, 1.0, plain)], dim=2), grid)
    u2 = evolve(UnitaryPath.from_schedule([(0.0, 1.0, stacked)], dim=2), grid)
    assert np.allclose(u1, u2, atol=1e-14)


@given(seeds, st.integers(2, 4))
def test_transport_fixes_eigenbasis_of_constant_generator(seed, dim):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, dim)
    basis = OrthonormalBasis(np.linalg.eigh(h)[1])
    u_par = parallel_transport_unitary(UnitaryPath.constant(h, 1.3), basis)
    assert np.allclose(u_par, np.eye(dim), atol=1e-11)


def test_connection_factor_closed_form():
    # K = U^+ H U; on an eigenvector of H the factor is exp(i E tau)
    h = np.diag([0.7, -0.2]).astype(complex)
    assert connection_factor(UnitaryPath.constant(h, 2.0), 0) == pytest.approx(np.exp(1.4j), abs=1e-14)


def test_trapezoid_agrees_with_midpoint(rng):
    path = random_smooth_path(rng, 3)
    grid = TimeGrid.uniform(1.0, 2000)
    for k in range(3):
        a = connection_factor(path, k, grid)
        b = connection_factor(path, k, grid, rule="trapezoid")
        assert abs(a - b) < 1e-6


def test_sampled_path_reproduces_connection(rng):
    path = random_smooth_path(rng, 2)
    grid = TimeGrid.uniform(1.0, 4000)
    sampled = UnitaryPath.from_samples(grid.nodes, evolve(path, grid))
    for k in range(2):
        assert abs(connection_factor(sampled, k) - connection_factor(path, k, grid)) < 1e-5


def test_transported_path_has_no_connection(rng):
    path = random_smooth_path(rng, 2)
    transported = parallel_transport_path(path, grid=TimeGrid.uniform(1.0, 4000))
    for k in range(2):
        assert abs(connection_factor(transported, k) - 1) < 1e-5


def test_transport_is_gauge_invariant(rng):
    path = random_schedule(rng, 3)
    basis = OrthonormalBasis.computational(3)
    grid = TimeGrid.uniform(1.0, 3000)
    gauge = random_gauge(basis, [[0], [1], [2]], 1.0, rng, diagonal=True)
    a = parallel_transport_unitary(path, basis, grid)
    b = parallel_transport_unitary(path.with_gauge(gauge), basis, grid)
    assert np.max(np.abs(a - b)) < 1e-6


def test_shared_gauge_trajectories_match_direct(rng):
    path = random_schedule(rng, 3)
    grid = TimeGrid.uniform(1.0, 500)
    basis = OrthonormalBasis.computational(3)
    gauges = [random_gauge(basis, [[0, 1], [2]], 1.0, rng) for _ in range(3)]
    for g, traj in zip(gauges, gauge_trajectories(path, gauges, grid)):
        direct = compute_trajectory(path.with_gauge(g), grid)
        assert np.allclose(traj.final, direct.final, atol=1e-12)
        assert np.allclose(traj.connection_phases(), direct.connection_phases(), atol=1e-12)


def test_gauge_cannot_stack(rng):
    path = random_schedule(rng, 2)
    g = random_gauge(OrthonormalBasis.computational(2), [[0], [1]], 1.0, rng)
    with pytest.raises(ValidationError):
        path.with_gauge(g).with_gauge(g)


@given(seeds, st.integers(2, 4))
def test_maximally_mixed_family_freezes(seed, dim):
    rng = np.random.default_rng(seed)
    path = random_schedule(rng, dim)
    u_par, v = build_parallel_family(path, SpectralDensity.diagonal(np.full(dim, 1.0 / dim)),
                                     TimeGrid.uniform(1.0, 50))
    assert np.allclose(u_par, np.eye(dim), atol=1e-11)
    assert unitarity_residual(v) < 1e-11


def test_block_transport_stays_in_subspace(rng):
    path = random_smooth_path(rng, 4)
    p = np.diag([1, 1, 0, 0]).astype(complex)
    v = subspace_parallel_transport(path, p, TimeGrid.uniform(1.0, 500))
    block = v[:2, :2]
    assert np.allclose(block @ dagger(block), np.eye(2), atol=1e-11)
    assert np.allclose(v[2:, :], 0) and np.allclose(v[:, 2:], 0)


def test_rejects_non_projector(rng):
    with pytest.raises(ValidationError, match="projector"):
        subspace_parallel_transport(random_schedule(rng, 2), np.diag([1.0, 0.5]).astype(complex))
