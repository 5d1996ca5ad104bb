"""Exact two-mode engine on the fixed-total-number Fock basis.

The atomic field is truncated to the left/right soliton modes (frozen sech
shapes at separation d).  With the total atom number N conserved, states
live on the (N+1)-dimensional basis |n_L, N - n_L> and the Hamiltonian is a
real symmetric banded operator: number terms on the diagonal, single-atom
transfer on the first off-diagonal, pair exchange on the second.
Propagation is a Krylov exponential per time slice with the separation
d(t) frozen at the slice midpoint.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .core import Grid1D, soliton_width
from .gpe import Trajectory, sech
from .krylov import BandedHermitian, expm_multiply

LN2 = math.log(2.0)


# --- coefficients ----------------------------------------------------------

@dataclass(frozen=True)
class TwoModeCoeffs:
    """Hamiltonian coefficients at one soliton separation.

    e0: single-mode kinetic energy; chi: on-site interaction (negative for
    attraction); j: kinetic transfer; ubar: cross interaction / pair
    exchange; jbar: density-assisted transfer.
    """

    e0: float
    chi: float
    j: float
    ubar: float
    jbar: float
    d: float

    def hopping(self, n_tot: int) -> float:
        """Effective single-atom transfer amplitude in the fixed-N sector."""
        return self.j + 2.0 * self.jbar * (n_tot - 1)


def mode_function(grid: Grid1D, xi: float, center: float) -> np.ndarray:
    """Unit-normalized sech mode of width xi centered at `center`."""
    return sech((grid.x - center) / xi) / math.sqrt(2.0 * xi)


def _kinetic(grid: Grid1D, f: np.ndarray) -> np.ndarray:
    """-1/2 d^2/dx^2 applied spectrally (real input, real output)."""
    return 0.5 * np.fft.irfft(grid.k[: grid.n_points // 2 + 1] ** 2 * np.fft.rfft(f),
                              n=grid.n_points)


def _check_mode_norm(grid: Grid1D, f: np.ndarray, label: str) -> None:
    norm = float(grid.quadrature(f * f))
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(
            f"grid too coarse or too narrow: quadrature norm of {label} is {norm!r}, "
            "deviating from 1 by more than 1e-8"
        )


def compute_coeffs(d: float, n_sol: int, u0: float, grid: Grid1D) -> TwoModeCoeffs:
    """Evaluate all five coefficients by grid quadrature at separation d.

    Kinetic sandwiches use spectral differentiation; the mode shapes are
    the frozen unit sech profiles at centers -d/2 and +d/2.
    """
    xi = soliton_width(n_sol, u0)
    left = mode_function(grid, xi, -0.5 * d)
    right = mode_function(grid, xi, +0.5 * d)
    _check_mode_norm(grid, left, "left mode")
    _check_mode_norm(grid, right, "right mode")
    t_left = _kinetic(grid, left)
    t_right = _kinetic(grid, right)
    e0 = float(grid.quadrature(left * t_left))
    j = float(grid.quadrature(left * t_right))
    chi = u0 * float(grid.quadrature(left**4))
    ubar = 0.5 * u0 * float(grid.quadrature(left**2 * right**2))
    jbar = 0.5 * u0 * float(grid.quadrature(left**3 * right))
    return TwoModeCoeffs(e0, chi, j, ubar, jbar, d)


def far_separated_coeffs(n_sol: int, u0: float, grid: Grid1D) -> TwoModeCoeffs:
    """Infinite-separation limit: transfer and cross terms exactly zero."""
    xi = soliton_width(n_sol, u0)
    center = 0.5 * (grid.x_min + grid.x_max)
    mode = mode_function(grid, xi, center)
    _check_mode_norm(grid, mode, "mode")
    e0 = float(grid.quadrature(mode * _kinetic(grid, mode)))
    chi = u0 * float(grid.quadrature(mode**4))
    return TwoModeCoeffs(e0, chi, 0.0, 0.0, 0.0, math.inf)


def chi_closed_form(n_sol: int, u0: float) -> float:
    """chi = -m u0^2 n_sol / (6 hbar^3) in scaled units."""
    return -(u0 * u0) * n_sol / 6.0


def default_coeff_provider(n_sol: int, u0: float, grid: Grid1D):
    """Memoized d -> TwoModeCoeffs map; d = inf hits the decoupled limit."""
    cache: dict[float, TwoModeCoeffs] = {}

    def provider(d: float) -> TwoModeCoeffs:
        d = float(d)
        if d not in cache:
            if math.isinf(d):
                cache[d] = far_separated_coeffs(n_sol, u0, grid)
            else:
                cache[d] = compute_coeffs(abs(d), n_sol, u0, grid)
        return cache[d]

    return provider


# --- Hamiltonian and states -------------------------------------------------

def build_hamiltonian(c: TwoModeCoeffs, n_tot: int) -> BandedHermitian:
    """Banded Fock-basis Hamiltonian for a fixed total atom number.

    Diagonal: e0 N + chi/2 [n(n-1) + (N-n)(N-n-1)] + 4 ubar n (N-n).
    First off-diagonal: (j + 2 jbar (N-1)) sqrt((n+1)(N-n)).
    Second off-diagonal: ubar sqrt((n+1)(n+2)(N-n)(N-n-1)).
    """
    if n_tot < 2:
        raise ValueError("n_tot must be at least 2")
    n = np.arange(n_tot + 1, dtype=float)
    n_r = n_tot - n
    diag = c.e0 * n_tot + 0.5 * c.chi * (n * (n - 1.0) + n_r * (n_r - 1.0)) \
        + 4.0 * c.ubar * n * n_r
    m = n[:-1]
    off1 = c.hopping(n_tot) * np.sqrt((m + 1.0) * (n_tot - m))
    p = n[:-2]
    off2 = c.ubar * np.sqrt((p + 1.0) * (p + 2.0) * (n_tot - p) * (n_tot - p - 1.0))
    return BandedHermitian(diag, off1, off2)


@dataclass
class TwoModeState:
    """Normalized amplitude vector over n_L = 0..n_tot."""

    n_tot: int
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.amplitudes.shape != (self.n_tot + 1,):
            raise ValueError("amplitude vector must have length n_tot + 1")
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state norm {norm!r} deviates from 1 beyond 1e-10")


def initial_relative_coherent_state(n_tot: int, phi: float) -> TwoModeState:
    """Fixed-N projection of two equal coherent solitons with relative phase phi.

    Amplitudes are binomial, c_n = sqrt(C(N, n) / 2^N) e^{i (N - n) phi}:
    mean n_L = N/2, variance N/4, and a single macroscopic orbital at t = 0.
    """
    if n_tot % 2 != 0:
        raise ValueError("n_tot must be even (two equal solitons)")
    if n_tot < 2:
        raise ValueError("n_tot must be at least 2")
    n = np.arange(n_tot + 1, dtype=float)
    log_mag = 0.5 * (gammaln(n_tot + 1) - gammaln(n + 1) - gammaln(n_tot - n + 1)
                     - n_tot * LN2)
    c = np.exp(log_mag) * np.exp(1j * phi * (n_tot - n))
    c /= np.linalg.norm(c)
    return TwoModeState(n_tot, c)


# --- observables -------------------------------------------------------------

@dataclass(frozen=True)
class OBDM:
    """2x2 one-body density matrix with relative eigenvalues."""

    n_aa: float
    n_ab: complex
    n_ba: complex
    n_bb: float
    lambda_plus: float
    lambda_minus: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.n_aa, self.n_ba], [self.n_ab, self.n_bb]])


def obdm(state: TwoModeState) -> OBDM:
    """Mode correlators and relative orbital occupations lambda+- (sum 1)."""
    c = state.amplitudes
    n_tot = state.n_tot
    n = np.arange(n_tot + 1, dtype=float)
    rho = c.real**2 + c.imag**2
    n_aa = float(np.dot(n, rho))
    n_bb = n_tot - n_aa  # trace identity holds exactly by construction
    g = complex(np.sum(np.conj(c[1:]) * c[:-1] * np.sqrt((n[:-1] + 1.0) * (n_tot - n[:-1]))))
    half_split = math.hypot(0.5 * (n_aa - n_bb), abs(g))
    lam_plus = (0.5 * (n_aa + n_bb) + half_split) / n_tot
    lam_minus = (0.5 * (n_aa + n_bb) - half_split) / n_tot
    return OBDM(n_aa, g, np.conj(g), n_bb, lam_plus, lam_minus)


@dataclass(frozen=True)
class NumberDistribution:
    rho: np.ndarray
    mean: float
    variance: float


def number_distribution(state: TwoModeState) -> NumberDistribution:
    """Probabilities rho_n = |c_n|^2 with mean and variance of n_L."""
    rho = state.amplitudes.real**2 + state.amplitudes.imag**2
    n = np.arange(state.n_tot + 1, dtype=float)
    mean = float(np.dot(n, rho))
    var = float(np.dot(n * n, rho)) - mean**2
    return NumberDistribution(rho, mean, var)


# --- Husimi phase-space diagnostic -------------------------------------------

def make_alpha_grid(r_max: float, n_side: int) -> np.ndarray:
    """Square complex grid covering [-r_max, r_max]^2."""
    axis = np.linspace(-r_max, r_max, n_side)
    re, im = np.meshgrid(axis, axis, indexing="xy")
    return re + 1j * im


def _husimi_chunk(c_logmag, c_phase, lgam, n, r, theta, q_at_zero):
    out = np.zeros(r.shape[0])
    pos = r > 0.0
    if np.any(pos):
        rp = r[pos]
        log_terms = c_logmag[None, :] + n[None, :] * np.log(rp)[:, None] - 0.5 * lgam[None, :]
        m = log_terms.max(axis=1)
        s = np.exp(log_terms - m[:, None]) * np.exp(1j * (c_phase[None, :] - n[None, :] * theta[pos][:, None]))
        mod = np.abs(s.sum(axis=1))
        good = mod > 0.0
        q = np.zeros(rp.shape[0])
        q[good] = np.exp(2.0 * m[good] - rp[good] ** 2 + 2.0 * np.log(mod[good]))
        out[pos] = q
    out[~pos] = q_at_zero
    return out


def husimi_q(state: TwoModeState, alpha: np.ndarray, threads: int = 1,
             chunk: int = 512) -> np.ndarray:
    """Husimi function Q(alpha) = |<alpha|psi_L>|^2 of the left soliton mode.

    The joint amplitudes over n_L double as the left mode's wavefunction
    relative to the partner soliton's phase reference, so radius tracks the
    left atom number and the argument the relative phase (Q peaks at
    arg alpha = -phi for the initial state).  Overlaps are evaluated with
    log-domain factorials, which stays finite for thousands of atoms.
    Satisfies (1/pi) int Q d^2alpha = 1.
    """
    alpha = np.asarray(alpha, dtype=np.complex128)
    if alpha.size and float(np.max(np.abs(alpha)) ** 2) < state.n_tot:
        warnings.warn(
            "alpha grid max |alpha|^2 is below n_tot; the Q peak may be clipped",
            stacklevel=2,
        )
    c = state.amplitudes
    with np.errstate(divide="ignore"):
        c_logmag = np.log(np.abs(c))
    # Amplitudes more than e^-45 below the largest cannot shift Q at double
    # precision; dropping them bounds the term count by the state's support.
    keep = np.nonzero(c_logmag > c_logmag.max() - 45.0)[0]
    lo, hi = int(keep[0]), int(keep[-1]) + 1
    c_logmag = c_logmag[lo:hi]
    c_phase = np.angle(c[lo:hi])
    n = np.arange(lo, hi, dtype=float)
    lgam = gammaln(n + 1.0)

    q_at_zero = float(c[0].real**2 + c[0].imag**2)
    flat = alpha.ravel()
    r = np.abs(flat)
    theta = np.angle(flat)
    pieces = [slice(i, min(i + chunk, flat.size)) for i in range(0, flat.size, chunk)]

    def work(sl):
        return _husimi_chunk(c_logmag, c_phase, lgam, n, r[sl], theta[sl], q_at_zero)

    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, pieces))
    else:
        results = [work(sl) for sl in pieces]
    return np.concatenate(results).reshape(alpha.shape)


@lru_cache(maxsize=8)
def _adjacent_radial_weights(n_tot: int) -> np.ndarray:
    k = np.arange(n_tot, dtype=float)
    return np.exp(gammaln(k + 1.5) - 0.5 * (gammaln(k + 1.0) + gammaln(k + 2.0)))


def angular_first_moment(state: TwoModeState) -> complex:
    """First Fourier coefficient of the Husimi angular marginal (closed form).

    The marginal (1/pi) int Q r dr couples adjacent number states only:
    m1 = sum_n conj(c_n) c_{n+1} Gamma(n + 3/2) / sqrt(n! (n+1)!).
    """
    c = state.amplitudes
    return complex(np.sum(np.conj(c[:-1]) * c[1:] * _adjacent_radial_weights(state.n_tot)))


def angular_variance(state: TwoModeState) -> float:
    """Angular variance 2 (1 - |m1|) of the Husimi angular marginal.

    Directional-statistics convention with range [0, 2]: 0 for a sharply
    defined phase, 2 for a fully undefined (uniform) phase.
    """
    return 2.0 * (1.0 - abs(angular_first_moment(state)))


def angular_variance_from_grid(alpha: np.ndarray, q: np.ndarray) -> float:
    """Grid-quadrature estimate of :func:`angular_variance` (cross-check)."""
    w = q.ravel()
    total = w.sum()
    if total <= 0:
        raise ValueError("q has no weight")
    m1 = np.sum(w * np.exp(1j * np.angle(alpha.ravel()))) / total
    return float(2.0 * (1.0 - abs(m1)))


def half_maximum_angular_variance(alpha: np.ndarray, q: np.ndarray) -> float:
    """Angular variance of the half-maximum region of Q (contour spread)."""
    mask = q >= 0.5 * q.max()
    m1 = np.mean(np.exp(1j * np.angle(alpha[mask])))
    return float(2.0 * (1.0 - abs(m1)))


def radial_marginal(state: TwoModeState, r_values: np.ndarray,
                    n_theta: int = 1024, threads: int = 1) -> np.ndarray:
    """Angle-integrated Husimi profile p(r) = r int Q(r e^{i theta}) d theta / pi.

    Polar quadrature; n_theta must resolve the narrowest angular feature
    (a coherent blob at radius r subtends ~ 1/r).
    """
    r_values = np.asarray(r_values, dtype=float)
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    alpha = r_values[:, None] * np.exp(1j * theta[None, :])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        q = husimi_q(state, alpha, threads=threads)
    return r_values * q.sum(axis=1) * (2.0 * math.pi / n_theta) / math.pi


# --- propagation --------------------------------------------------------------

@dataclass
class TwoModeHistory:
    """Recorded states, separations and energies along a propagation."""

    n_tot: int
    times: np.ndarray
    states: np.ndarray       # (n_records, n_tot + 1) complex
    d_values: np.ndarray
    energies: np.ndarray
    deep_overlap: np.ndarray  # True where d < 2 xi (frozen-mode ansatz qualitative only)
    meta: dict = field(default_factory=dict)

    def state_at(self, t: float) -> TwoModeState:
        idx = int(np.argmin(np.abs(self.times - t)))
        amps = self.states[idx].copy()
        amps /= np.linalg.norm(amps)  # strip sub-tolerance propagation drift
        return TwoModeState(self.n_tot, amps, float(self.times[idx]))

    def __len__(self) -> int:
        return len(self.times)


def _as_separation_function(d_of_t, t_start: float, t_final: float):
    if d_of_t is None:
        return (lambda t: math.inf), "far-separated"
    if isinstance(d_of_t, (int, float)):
        value = float(d_of_t)
        return (lambda t: value), f"constant(d={value})"
    if isinstance(d_of_t, Trajectory):
        if d_of_t.times[0] > t_start + 1e-12 or d_of_t.times[-1] < t_final - 1e-12:
            raise ValueError(
                f"trajectory covers [{d_of_t.times[0]}, {d_of_t.times[-1]}] "
                f"but propagation needs [{t_start}, {t_final}]"
            )
        fn = d_of_t.interpolator(fill_unresolved=0.0)
        return fn, fn.label
    if callable(d_of_t):
        t_max = getattr(d_of_t, "t_max", None)
        if t_max is not None and t_max < t_final - 1e-12:
            raise ValueError(f"d(t) covers only up to {t_max} < t_final = {t_final}")
        return d_of_t, getattr(d_of_t, "label", "callable")
    raise TypeError("d_of_t must be None, a number, a Trajectory or a callable")


def propagate(state: TwoModeState, d_of_t, n_sol: int, u0: float, grid: Grid1D,
              dt: float, t_final: float, record_stride: int = 1,
              coeff_provider=None, tol: float = 1e-12,
              norm_tol: float = 1e-8) -> TwoModeHistory:
    """Norm-preserving propagation under H(d(t)), piecewise constant per slice.

    d(t) may be a constant, a tracked Trajectory (flagged entries fill with
    d = 0; the policy is recorded in the history metadata), a callable, or
    None for the decoupled far-separated limit.  Each slice freezes d at
    its midpoint.  Aborts when the state norm drifts beyond norm_tol.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    t_start = state.time
    if t_final < t_start:
        raise ValueError("t_final precedes the state time")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    d_fn, d_label = _as_separation_function(d_of_t, t_start, t_final)
    provider = coeff_provider or default_coeff_provider(n_sol, u0, grid)
    xi = soliton_width(n_sol, u0)

    n_slices = max(0, int(math.ceil((t_final - t_start) / dt - 1e-12)))
    psi = state.amplitudes.astype(np.complex128, copy=True)

    ham_cache: dict[float, BandedHermitian] = {}

    def hamiltonian(d: float) -> BandedHermitian:
        if d not in ham_cache:
            if len(ham_cache) > 8:
                ham_cache.clear()
            ham_cache[d] = build_hamiltonian(provider(d), state.n_tot)
        return ham_cache[d]

    times = [t_start]
    records = [psi.copy()]
    d0 = float(d_fn(t_start))
    d_records = [d0]
    energies = [hamiltonian(d0).expectation(psi)]

    t = t_start
    for i in range(1, n_slices + 1):
        t_next = min(t_start + i * dt, t_final)
        dt_i = t_next - t
        d_mid = float(d_fn(t + 0.5 * dt_i))
        psi = expm_multiply(hamiltonian(d_mid), psi, dt_i, tol=tol)
        t = t_next
        drift = abs(float(np.linalg.norm(psi)) - 1.0)
        if drift > norm_tol:
            raise RuntimeError(
                f"norm drift {drift:.3e} beyond {norm_tol:.1e} at t = {t} "
                f"(slice {i}/{n_slices}, d = {d_mid})"
            )
        if i % record_stride == 0 or i == n_slices:
            d_here = float(d_fn(t))
            times.append(t)
            records.append(psi.copy())
            d_records.append(d_here)
            energies.append(hamiltonian(d_here).expectation(psi))

    d_arr = np.array(d_records)
    deep = d_arr < 2.0 * xi
    meta = {
        "d_source": d_label,
        "dt": dt,
        "tol": tol,
        "xi": xi,
        "qualitative_overlap_window": bool(deep.any()),
    }
    return TwoModeHistory(state.n_tot, np.array(times), np.array(records), d_arr,
                          np.array(energies), deep, meta)


def observables_from_history(hist: TwoModeHistory) -> dict[str, np.ndarray]:
    """Per-record lambda+-, number statistics, energy and angular variance."""
    n_rec = len(hist)
    lam_p = np.empty(n_rec)
    lam_m = np.empty(n_rec)
    mean = np.empty(n_rec)
    var = np.empty(n_rec)
    ang = np.empty(n_rec)
    for i in range(n_rec):
        amps = hist.states[i] / np.linalg.norm(hist.states[i])
        st = TwoModeState(hist.n_tot, amps, float(hist.times[i]))
        rho = obdm(st)
        lam_p[i], lam_m[i] = rho.lambda_plus, rho.lambda_minus
        dist = number_distribution(st)
        mean[i], var[i] = dist.mean, dist.variance
        ang[i] = angular_variance(st)
    return {
        "t": hist.times.copy(),
        "lambda_plus": lam_p,
        "lambda_minus": lam_m,
        "mean_n_left": mean,
        "var_n_left": var,
        "energy": hist.energies.copy(),
        "angular_variance": ang,
    }
