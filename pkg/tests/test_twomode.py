import math

import numpy as np
import pytest

from solsim.core import Grid1D
from solsim.twomode import (TwoModeState, angular_first_moment, angular_variance,
                            angular_variance_from_grid, build_hamiltonian,
                            chi_closed_form, compute_coeffs,
                            default_coeff_provider, far_separated_coeffs,
                            half_maximum_angular_variance, husimi_q,
                            initial_relative_coherent_state, make_alpha_grid,
                            number_distribution, obdm, observables_from_history,
                            propagate, radial_marginal)
from solsim.analysis import lambda_fixed_number
from oracles import binomial_state_lambdas, ladder_hamiltonian_dense, total_number_dense

N_SOL, U0 = 1000, -0.002


# --- coefficients ---------------------------------------------------------

def test_chi_quadrature_matches_closed_form(ref_grid):
    c = compute_coeffs(32.0, N_SOL, U0, ref_grid)
    closed = chi_closed_form(N_SOL, U0)
    assert abs(c.chi - closed) / abs(closed) < 1e-3
    assert c.e0 == pytest.approx(1.0 / 6.0, rel=1e-10)


def test_couplings_negligible_at_reference_separation(ref_grid):
    c = compute_coeffs(32.0, N_SOL, U0, ref_grid)
    # transfer integral has the exact large-d form -(2d/sinh d - 8 e^-d)/4
    j_closed = -0.25 * (2 * 32.0 / math.sinh(32.0) - 8 * math.exp(-32.0))
    assert c.j == pytest.approx(j_closed, rel=0.02)
    assert abs(c.j) < 1e-9 * abs(c.chi)
    assert abs(c.ubar) < 1e-10 * abs(c.chi)
    assert abs(c.jbar) < 1e-10 * abs(c.chi)


@pytest.mark.parametrize("d", [2.0, 32.0])
def test_coeffs_even_in_separation(ref_grid, d):
    a = compute_coeffs(d, N_SOL, U0, ref_grid)
    b = compute_coeffs(-d, N_SOL, U0, ref_grid)
    for name in ("e0", "chi", "j", "ubar", "jbar"):
        va, vb = getattr(a, name), getattr(b, name)
        assert vb == pytest.approx(va, rel=1e-10, abs=1e-16)


def test_coeffs_reject_coarse_grid(ref_grid):
    # xi = 0.1 is unresolvable at dx = 0.125
    with pytest.raises(ValueError, match="grid too coarse"):
        compute_coeffs(8.0, 1000, -0.02, ref_grid)


def test_far_separated_coeffs(ref_grid):
    c = far_separated_coeffs(N_SOL, U0, ref_grid)
    assert c.j == 0.0 and c.ubar == 0.0 and c.jbar == 0.0
    assert c.chi == pytest.approx(chi_closed_form(N_SOL, U0), rel=1e-6)
    assert math.isinf(c.d)


# --- Hamiltonian ----------------------------------------------------------

def test_hamiltonian_diagonal_when_decoupled(ref_grid):
    c = far_separated_coeffs(N_SOL, U0, ref_grid)
    n_tot = 6
    h = build_hamiltonian(c, n_tot)
    assert h.is_diagonal
    n = np.arange(n_tot + 1, dtype=float)
    expect = c.e0 * n_tot + 0.5 * c.chi * (n * (n - 1) + (n_tot - n) * (n_tot - n - 1))
    assert np.allclose(h.diag, expect, rtol=1e-14)


@pytest.mark.parametrize("n_tot", [2, 4, 6])
def test_hamiltonian_matches_ladder_construction(ref_grid, n_tot):
    c = compute_coeffs(2.0, N_SOL, U0, ref_grid)  # all couplings active
    dense = build_hamiltonian(c, n_tot).to_dense()
    oracle = ladder_hamiltonian_dense(c.e0, c.chi, c.j, c.ubar, c.jbar, n_tot)
    scale = max(1.0, np.abs(oracle).max())
    assert np.abs(dense - oracle).max() < 1e-14 * scale


def test_ladder_hamiltonian_conserves_total_number(ref_grid):
    c = compute_coeffs(2.0, N_SOL, U0, ref_grid)
    n_tot = 4
    h_full = ladder_hamiltonian_dense(c.e0, c.chi, c.j, c.ubar, c.jbar, n_tot)
    # sector projection is exact only because [H, N] = 0; verify on the
    # full product space
    import oracles

    dim = n_tot + 1
    a1 = np.diag(np.sqrt(np.arange(1, dim)), 1)
    eye = np.eye(dim)
    a = np.kron(a1, eye)
    b = np.kron(eye, a1)
    full = (c.e0 * (a.T @ a + b.T @ b)
            + 0.5 * c.chi * (a.T @ a.T @ a @ a + b.T @ b.T @ b @ b)
            + c.j * (b.T @ a + a.T @ b)
            + c.ubar * (4 * a.T @ a @ b.T @ b + a.T @ a.T @ b @ b + b.T @ b.T @ a @ a)
            + 2 * c.jbar * (a.T @ a + b.T @ b - np.eye(dim * dim)) @ (b.T @ a + a.T @ b))
    n_op = oracles.total_number_dense(n_tot)
    comm = full @ n_op - n_op @ full
    assert np.abs(comm).max() < 1e-12
    assert np.allclose(h_full, h_full.T.conj(), atol=1e-14)


def test_hamiltonian_bandwidth_structure(ref_grid):
    c = compute_coeffs(2.0, N_SOL, U0, ref_grid)
    dense = build_hamiltonian(c, 8).to_dense()
    # couplings only within |delta n| <= 2
    for k in range(3, 9):
        assert np.abs(np.diag(dense, k)).max() == 0.0
    assert np.allclose(dense, dense.T, atol=1e-15)


# --- states and observables -------------------------------------------------

def test_initial_state_two_atoms():
    st = initial_relative_coherent_state(2, 0.0)
    assert np.allclose(st.amplitudes, [0.5, 1.0 / math.sqrt(2.0), 0.5], atol=1e-15)


def test_initial_state_rejects_odd():
    with pytest.raises(ValueError, match="even"):
        initial_relative_coherent_state(3, 0.0)


def test_initial_state_binomial_distribution():
    n_tot = 100
    st = initial_relative_coherent_state(n_tot, 1.3)
    dist = number_distribution(st)
    exact = np.array([math.comb(n_tot, k) for k in range(n_tot + 1)], dtype=float)
    exact /= 2.0**n_tot
    assert np.allclose(dist.rho, exact, rtol=1e-12, atol=1e-300)
    assert dist.mean == pytest.approx(n_tot / 2, rel=1e-12)
    assert dist.variance == pytest.approx(n_tot / 4, rel=1e-10)


@pytest.mark.parametrize("phi", [0.0, 1.0, math.pi])
def test_initial_state_fully_coherent(phi):
    st = initial_relative_coherent_state(2000, phi)
    rho = obdm(st)
    assert rho.lambda_plus == pytest.approx(1.0, abs=1e-12)
    assert rho.lambda_minus == pytest.approx(0.0, abs=1e-12)


def test_obdm_fock_state_is_half_half():
    n_tot = 10
    c = np.zeros(n_tot + 1, dtype=complex)
    c[5] = 1.0
    rho = obdm(TwoModeState(n_tot, c))
    assert rho.n_ab == 0.0
    assert rho.lambda_plus == pytest.approx(0.5, abs=1e-14)
    assert rho.lambda_minus == pytest.approx(0.5, abs=1e-14)


def test_obdm_single_occupied_mode():
    n_tot = 10
    c = np.zeros(n_tot + 1, dtype=complex)
    c[n_tot] = 1.0  # every atom in the left mode
    rho = obdm(TwoModeState(n_tot, c))
    assert (rho.lambda_plus, rho.lambda_minus) == (1.0, 0.0)
    assert rho.n_aa == n_tot and rho.n_bb == 0.0


def test_obdm_trace_identity_exact():
    rng = np.random.default_rng(5)
    c = rng.standard_normal(33) + 1j * rng.standard_normal(33)
    c /= np.linalg.norm(c)
    rho = obdm(TwoModeState(32, c))
    assert rho.n_aa + rho.n_bb == 32.0
    assert abs(rho.lambda_plus + rho.lambda_minus - 1.0) < 1e-12


def test_obdm_mirror_symmetry():
    rng = np.random.default_rng(9)
    c = rng.standard_normal(21) + 1j * rng.standard_normal(21)
    c /= np.linalg.norm(c)
    rho = obdm(TwoModeState(20, c))
    mirrored = obdm(TwoModeState(20, c[::-1].copy()))
    assert mirrored.n_aa == pytest.approx(rho.n_bb, rel=1e-12)
    assert mirrored.n_ab == pytest.approx(np.conj(rho.n_ab), rel=1e-9)
    assert mirrored.lambda_plus == pytest.approx(rho.lambda_plus, abs=1e-12)


def test_number_distribution_fock_state():
    n_tot = 8
    c = np.zeros(n_tot + 1, dtype=complex)
    c[4] = 1.0
    dist = number_distribution(TwoModeState(n_tot, c))
    assert dist.rho[4] == 1.0 and dist.rho.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist.variance == pytest.approx(0.0, abs=1e-12)


# --- propagation ------------------------------------------------------------

def test_propagation_matches_dephasing_oracles(ref_grid):
    # transfer-free evolution: Krylov stepping must agree with both the
    # direct diagonal-phase oracle and the closed-form occupations
    for n_sol in (10, 100):
        u0 = -2.0 / n_sol  # xi = 1
        n_tot = 2 * n_sol
        provider = default_coeff_provider(n_sol, u0, ref_grid)
        chi = provider(32.0).chi
        st = initial_relative_coherent_state(n_tot, 0.7)
        hist = propagate(st, 32.0, n_sol, u0, ref_grid, dt=0.25, t_final=100.0,
                         record_stride=4, coeff_provider=provider)
        obs = observables_from_history(hist)
        lam_p, _ = lambda_fixed_number(obs["t"], n_tot, chi)
        assert np.max(np.abs(obs["lambda_plus"] - lam_p)) < 1e-6
        oracle_p, _ = binomial_state_lambdas(st, n_tot, chi, obs["t"])
        assert np.max(np.abs(obs["lambda_plus"] - oracle_p)) < 1e-6


def test_revival_at_full_period(ref_grid):
    n_sol = 100
    u0 = -0.02
    provider = default_coeff_provider(n_sol, u0, ref_grid)
    chi = provider(float("inf")).chi
    t_rev = 2.0 * math.pi / abs(chi)
    st = initial_relative_coherent_state(2 * n_sol, 0.4)
    hist = propagate(st, None, n_sol, u0, ref_grid, dt=t_rev / 8, t_final=t_rev,
                     coeff_provider=provider)
    rho = obdm(hist.state_at(t_rev))
    assert rho.lambda_plus > 1.0 - 1e-6


def test_propagation_unitarity_over_many_slices(ref_grid):
    n_sol = 32
    u0 = -2.0 / n_sol
    st = initial_relative_coherent_state(2 * n_sol, 0.0)
    hist = propagate(st, 4.0, n_sol, u0, ref_grid, dt=0.01, t_final=100.0,
                     record_stride=10000)
    norm = np.linalg.norm(hist.states[-1])
    assert abs(norm - 1.0) < 1e-10


def test_propagation_energy_conserved_at_constant_separation(ref_grid):
    n_sol = 50
    u0 = -0.04
    st = initial_relative_coherent_state(2 * n_sol, 0.9)
    hist = propagate(st, 6.0, n_sol, u0, ref_grid, dt=0.02, t_final=20.0,
                     record_stride=50)
    e = hist.energies
    assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-8


def test_propagation_requires_covering_trajectory(ref_grid):
    from solsim.gpe import Trajectory

    times = np.linspace(0.0, 5.0, 6)
    traj = Trajectory(times, -np.ones(6), np.ones(6), 2 * np.ones(6),
                      np.zeros(6), np.ones(6, dtype=bool))
    st = initial_relative_coherent_state(20, 0.0)
    with pytest.raises(ValueError, match="covers"):
        propagate(st, traj, 10, -0.2, ref_grid, dt=0.1, t_final=10.0)


def test_propagation_flags_deep_overlap(ref_grid):
    st = initial_relative_coherent_state(20, 0.0)
    hist = propagate(st, 0.5, 10, -0.2, ref_grid, dt=0.1, t_final=1.0)
    assert hist.deep_overlap.all()
    assert hist.meta["qualitative_overlap_window"]


def test_propagation_aborts_on_norm_drift(ref_grid, monkeypatch):
    import solsim.twomode as tm

    real = tm.expm_multiply

    def leaky(h, v, t, **kwargs):
        return 1.001 * real(h, v, t, **kwargs)

    monkeypatch.setattr(tm, "expm_multiply", leaky)
    st = initial_relative_coherent_state(20, 0.0)
    with pytest.raises(RuntimeError, match="norm drift"):
        propagate(st, 4.0, 10, -0.2, ref_grid, dt=0.1, t_final=1.0)


def test_propagation_records_trajectory_fill_policy(ref_grid):
    from solsim.gpe import Trajectory

    times = np.linspace(0.0, 2.0, 9)
    d = np.full(9, 8.0)
    resolved = np.ones(9, dtype=bool)
    resolved[4] = False  # merged frame: filled with d = 0, policy recorded
    traj = Trajectory(times, -d / 2, d / 2, d, np.zeros(9), resolved)
    st = initial_relative_coherent_state(20, 0.0)
    hist = propagate(st, traj, 10, -0.2, ref_grid, dt=0.25, t_final=2.0)
    assert "fill_unresolved=0.0" in hist.meta["d_source"]


# --- Husimi ------------------------------------------------------------------

def test_husimi_peak_at_coherent_amplitude():
    n_tot, phi = 200, 0.9
    st = initial_relative_coherent_state(n_tot, phi)
    alpha = make_alpha_grid(1.15 * math.sqrt(n_tot), 161)
    q = husimi_q(st, alpha)
    peak = alpha.ravel()[int(np.argmax(q))]
    cell = alpha[0, 1].real - alpha[0, 0].real
    assert abs(peak) == pytest.approx(math.sqrt(n_tot / 2), abs=0.75 * cell)
    assert np.angle(peak) == pytest.approx(-phi, abs=2 * cell / abs(peak))


def test_husimi_normalization():
    n_tot = 60
    st = initial_relative_coherent_state(n_tot, 0.3)
    alpha = make_alpha_grid(1.35 * math.sqrt(n_tot), 241)
    q = husimi_q(st, alpha)
    cell = alpha[0, 1].real - alpha[0, 0].real
    assert q.sum() * cell**2 / math.pi == pytest.approx(1.0, abs=1e-3)


def test_husimi_warns_on_clipped_grid():
    st = initial_relative_coherent_state(100, 0.0)
    with pytest.warns(UserWarning, match="clipped"):
        husimi_q(st, make_alpha_grid(5.0, 64))


def test_husimi_threads_deterministic():
    st = initial_relative_coherent_state(120, 0.5)
    alpha = make_alpha_grid(1.2 * math.sqrt(120), 97)
    q1 = husimi_q(st, alpha, threads=1)
    q2 = husimi_q(st, alpha, threads=3)
    assert np.array_equal(q1, q2)


def _dephased(n_tot, phi, chi, t):
    st = initial_relative_coherent_state(n_tot, phi)
    n = np.arange(n_tot + 1, dtype=float)
    theta = 0.5 * chi * (n * (n - 1) + (n_tot - n) * (n_tot - n - 1))
    return TwoModeState(n_tot, st.amplitudes * np.exp(-1j * theta * t), t)


def test_angular_moment_closed_form_matches_grid():
    n_tot, chi = 200, -6.667e-3
    alpha = make_alpha_grid(1.25 * math.sqrt(n_tot), 201)
    for t in (0.0, 4.0, 10.0):
        st = _dephased(n_tot, 0.4, chi, t)
        q = husimi_q(st, alpha)
        assert angular_variance_from_grid(alpha, q) == pytest.approx(
            angular_variance(st), abs=2e-3)


def test_angular_variance_grows_with_shear():
    n_tot, chi = 2000, chi_closed_form(N_SOL, U0)
    values = [angular_variance(_dephased(n_tot, 0.0, chi, t)) for t in (0.0, 13.0, 50.0)]
    assert values[0] < 1e-3
    assert values[0] < values[1] < values[2]


def test_half_maximum_contour_spreads():
    n_tot, chi = 2000, chi_closed_form(N_SOL, U0)
    alpha = make_alpha_grid(1.05 * math.sqrt(n_tot), 161)
    spread0 = half_maximum_angular_variance(alpha, husimi_q(_dephased(n_tot, 0.0, chi, 0.0), alpha))
    spread13 = half_maximum_angular_variance(alpha, husimi_q(_dephased(n_tot, 0.0, chi, 13.0), alpha))
    assert spread13 > 3 * spread0


def test_radial_marginal_static_under_dephasing():
    # |c_n| is untouched by the transfer-free evolution, so the radial
    # profile cannot move between the shear snapshots
    n_tot, chi = 2000, chi_closed_form(N_SOL, U0)
    peak = math.sqrt(n_tot / 2)
    r = np.linspace(peak - 4.0, peak + 4.0, 48)
    m0 = radial_marginal(_dephased(n_tot, 0.0, chi, 0.0), r, n_theta=2048)
    m13 = radial_marginal(_dephased(n_tot, 0.0, chi, 13.0), r, n_theta=2048)
    assert np.max(np.abs(m13 - m0) / m0.max()) < 0.01
    # and the profile integrates to ~1 over its support
    assert np.trapezoid(m0, r) == pytest.approx(1.0, abs=1e-3)
