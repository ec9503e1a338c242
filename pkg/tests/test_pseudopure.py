import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.optimize import brentq

from geophase.errors import DomainError, SingularConfigurationError, ValidationError
from geophase.evolution import TimeGrid, compute_trajectory
from geophase.paths import block_loop
from geophase.phases import mixed_offdiagonal_phase_degenerate
from geophase.pseudopure import (PseudopureParams, bisect_root, common_nodal_points, f_eta, f_eta_roots,
                                 figure1_csv, figure1_data, gamma1_arctan, gamma1_argument, gamma1_closed,
                                 gamma2_argument, gamma2_closed, l1_nodal_eta, l1_nodal_residual,
                                 l2_nodal_eta_squared, l2_noise_window, noise_lower_bound, parse_figure1_csv,
                                 pseudopure_density, qubit_mixed_phase, sign_changes)

Ns = st.integers(2, 6)
eps_st = st.floats(0.05, 1.0)
eta_st = st.floats(0.0, 1.0)
omega_st = st.floats(0.0, 2 * math.pi)

# brentq at xtol 1e-16, frozen
F_ROOTS = {3: 0.5, 4: 0.5110350941943225, 5: 0.5216367292124685, 6: 0.5295327464678583}


@pytest.mark.parametrize("N, eps, n", [(2, 0.3, 1), (4, 0.0, 0), (5, 1.0, 3)])
def test_density_spectrum(N, eps, n):
    rho = pseudopure_density(N, eps, n).matrix()
    expected = np.full(N, (1 - eps) / N)
    expected[n] += eps
    assert np.allclose(rho, np.diag(expected))


@pytest.mark.parametrize("kwargs", [dict(N=1, epsilon=0.5), dict(N=3, epsilon=1.5), dict(N=3, epsilon=0.5, n=3)])
def test_density_rejects(kwargs):
    with pytest.raises(ValidationError):
        pseudopure_density(**kwargs)


@pytest.mark.parametrize("eps", [0.0, -0.1, 1.2])
def test_params_reject_epsilon(eps):
    with pytest.raises(ValidationError):
        PseudopureParams(3, eps, 0.5, 1.0)


@given(Ns, eps_st, eta_st, omega_st)
def test_engine_traces_match_closed_forms(N, eps, eta, omega):
    path = block_loop(eta, omega, N, 0, 1)
    traj = compute_trajectory(path, TimeGrid.uniform(1.0, 4))
    rho = pseudopure_density(N, eps)
    p = PseudopureParams(N, eps, eta, omega)
    g1 = mixed_offdiagonal_phase_degenerate(path, rho, (0,), trajectory=traj)
    g2 = mixed_offdiagonal_phase_degenerate(path, rho, (0, 1), trajectory=traj)
    assert abs(N * g2.raw_trace - gamma2_argument(p)) < 1e-12
    z = gamma1_argument(p)
    if abs(z) > 1e-6:
        assert abs(g1.phase - z / abs(z)) < 1e-9


@given(Ns, eps_st, st.floats(0.01, 1.0), omega_st)
def test_rho_m_phase_is_conjugate(N, eps, eta, omega):
    p = PseudopureParams(N, eps, eta, omega)
    a, b = gamma1_closed(p), gamma1_closed(p, state="m")
    if a.defined:
        assert abs(a.phase.conjugate() - b.phase) < 1e-15


@given(eps_st, st.floats(0.01, 1.0), omega_st)
def test_qubit_phase_independent_of_visibility(eps, eta, omega):
    assume(abs(math.cos(omega / 2)) > 1e-6 or eps > 1e-3)
    res = gamma1_closed(PseudopureParams(2, eps, eta, omega))
    assert abs(res.phase - qubit_mixed_phase(eps, omega)) < 1e-12


@given(Ns, eps_st, st.floats(0.05, 1.0), omega_st)
def test_arctan_form_on_principal_branch(N, eps, eta, omega):
    p = PseudopureParams(N, eps, eta, omega)
    den = (N - 2) * (1 - eps) + eta * (2 + (N - 2) * eps) * math.cos(omega / 2)
    assume(den > 1e-6)
    assert abs(gamma1_arctan(p) - gamma1_closed(p).phase) < 1e-10


def test_qubit_arctan_branch():
    # beyond omega = pi the principal arctan is off by a sign
    eps, om = 0.5, 4.0
    principal = np.exp(-1j * math.atan(eps * math.tan(om / 2)))
    assert abs(qubit_mixed_phase(eps, om) + principal) < 1e-14
    assert abs(qubit_mixed_phase(eps, 1.0) - np.exp(-1j * math.atan(eps * math.tan(0.5)))) < 1e-15


@given(st.integers(3, 8), eps_st)
def test_l1_nodal_eta_zeroes_residual(N, eps):
    eta = l1_nodal_eta(N, eps)
    if eta is None:
        assert eps < noise_lower_bound(N)
    else:
        assert l1_nodal_residual(PseudopureParams(N, eps, eta, 2 * math.pi)) < 1e-24
        assert not gamma1_closed(PseudopureParams(N, eps, eta, 2 * math.pi)).defined


@pytest.mark.parametrize("eps, physical", [(0.1, False), (1 / 6 - 1e-9, False), (1 / 6, True), (0.5, True)])
def test_l1_noise_threshold_n5(eps, physical):
    assert (l1_nodal_eta(5, eps) is not None) == physical


def test_l1_nodal_eta_needs_three_levels():
    with pytest.raises(ValidationError):
        l1_nodal_eta(2, 0.5)


@given(st.integers(3, 8), eps_st, omega_st)
def test_l2_nodal_surface_zeroes_argument(N, eps, omega):
    try:
        eta2 = l2_nodal_eta_squared(N, eps, omega)
    except SingularConfigurationError:
        return
    if eta2 is not None and 0 < eta2 < 1:
        assert abs(gamma2_argument(PseudopureParams(N, eps, math.sqrt(eta2), omega))) < 1e-10


@given(eps_st, st.floats(math.pi / 2 + 1e-6, 3 * math.pi / 2 - 1e-6))
def test_qubit_has_no_l2_nodes_for_negative_cosine(eps, omega):
    assert l2_noise_window(2, omega)[1] < 0
    assert l2_nodal_eta_squared(2, eps, omega) is None


def test_l2_singular_denominator():
    # N = 2, eps -> 0 and cos(omega) = -1 make the denominator vanish
    with pytest.raises(SingularConfigurationError):
        l2_nodal_eta_squared(2, 1e-20, math.pi)


@given(Ns, eps_st, eta_st, omega_st)
def test_gamma2_is_a_sign(N, eps, eta, omega):
    res = gamma2_closed(PseudopureParams(N, eps, eta, omega))
    if res.defined:
        assert res.phase in (1, -1)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_f_endpoints(N):
    assert f_eta(0.0, N) == -1.0
    assert f_eta(1.0, N) > 0


def test_f_domain():
    with pytest.raises(DomainError):
        f_eta(1.5, 3)
    with pytest.raises(ValidationError):
        f_eta(0.5, 2)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_roots_match_brentq(N):
    (root,) = f_eta_roots(N)
    assert abs(root - F_ROOTS[N]) < 1e-14
    assert abs(f_eta(root, N)) < 1e-12
    oracle = brentq(f_eta, 0.0, 1.0, args=(N,), xtol=1e-16)
    assert abs(root - oracle) < 1e-14


def test_bisect_requires_sign_change():
    with pytest.raises(ValidationError):
        bisect_root(lambda x: x * x + 1, 0.0, 1.0)


@pytest.mark.parametrize("values, expected", [([-1, 1], [0]), ([1, 2, 3], []), ([0, 1], [0]), ([1, -1, 1], [0, 1])])
def test_sign_changes(values, expected):
    assert sign_changes(values) == expected


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_common_nodal_points(N):
    sols = common_nodal_points(N)
    # for N = 3 the shared root eta = 1/2 maps to epsilon = 0, outside the family
    assert len(sols) == (0 if N == 3 else 1)
    for sol in common_nodal_points(N):
        p = PseudopureParams(N, sol.params["epsilon"], sol.params["eta"], 2 * math.pi)
        assert l1_nodal_residual(p) < 1e-20
        assert abs(gamma2_argument(p)) < 1e-12


def test_figure1_csv_round_trip():
    table = figure1_data((3, 4), np.linspace(0, 1, 11))
    text = figure1_csv(table, comments=["note=a"])
    assert text.startswith("# note=a\neta,N,f\n")
    assert "\r" not in text
    back = parse_figure1_csv(text)
    assert back.rows == table.rows
    assert back.roots == table.roots
    for N in (3, 4):
        assert len(sign_changes([f for _, f in back.curve(N)])) == 1


def test_figure1_is_deterministic():
    assert figure1_csv(figure1_data()) == figure1_csv(figure1_data())


def test_parse_figure1_needs_header():
    with pytest.raises(ValidationError, match="header"):
        parse_figure1_csv("0,3,-1\n")
