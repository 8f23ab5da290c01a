"""Closed-form and numerical performance analysis: peak-to-average power
statistics, spectra, ambiguity functions, and estimation-error bounds.

Frequency-domain quantities are in physical units (Hz, seconds); ambiguity
and bound computations offer bin-normalized entry points where that is the
natural scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, PathParams
from .modem import Waveform
from .params import DDFrame, PowerAllocation, SystemParams
from .pulses import (
    PulseBank,
    dirichlet,
    dirichlet_derivative_wrt_kp,
    rc_derivative_wrt_lp,
)


# ---------------------------------------------------------------------------
# PAPR and its tail distribution


def papr(w: Waveform) -> float:
    """Peak-to-average power ratio in dB over the CP-stripped frame body."""
    body = w.body()
    mean = np.mean(np.abs(body) ** 2)
    if mean == 0:
        raise ValueError("zero-power waveform has no PAPR")
    return float(10.0 * np.log10(np.max(np.abs(body) ** 2) / mean))


def marcum_q1(a: float, b: float) -> float:
    """First-order Marcum Q-function by the canonical Poisson-mixture series.

    Q1(a, b) = sum_k pois(k; a^2/2) * P(Pois(b^2/2) <= k), with terms summed
    until the remaining Poisson mass bounds the residual below 1e-14.
    """
    if a < 0 or b < 0:
        raise ValueError("arguments must be non-negative")
    if b == 0.0:
        return 1.0
    x = a * a / 2.0
    y = b * b / 2.0
    # pois_k: Poisson(x) pmf at k; cdf_y: P(Pois(y) <= k), advanced together.
    pois_k = math.exp(-x)
    pois_mass = pois_k
    term_y = math.exp(-y)
    cdf_y = term_y
    total = pois_k * cdf_y
    k = 0
    while 1.0 - pois_mass > 1e-14 and k < 100_000:
        k += 1
        pois_k *= x / k
        pois_mass += pois_k
        term_y *= y / k
        cdf_y += term_y
        total += pois_k * min(cdf_y, 1.0)
    return min(max(total, 0.0), 1.0)


def ccdf_analytic(rho: float, MN: int, gamma0) -> np.ndarray:
    """Tail probability of the frame PAPR exceeding gamma0 (linear scale).

    Models the composite signal as a complex Gaussian centered on the
    near-constant chirp component, i.e. a Rician envelope per sample, with
    MN samples treated as independent.
    """
    gamma0 = np.asarray(gamma0, dtype=np.float64)
    out = np.empty(gamma0.shape)
    flat = gamma0.ravel()
    res = np.empty(flat.shape)
    for i, g in enumerate(flat):
        q = marcum_q1(math.sqrt(2.0 * rho), math.sqrt(max(2.0 * g * (1.0 + rho), 0.0)))
        res[i] = 1.0 if q >= 1.0 else -math.expm1(MN * math.log1p(-q))
    out = res.reshape(gamma0.shape)
    return out if out.ndim else float(out)


def empirical_ccdf(values_db: np.ndarray, thresholds_db: np.ndarray) -> np.ndarray:
    values_db = np.asarray(values_db)
    return np.array([np.mean(values_db > t) for t in np.asarray(thresholds_db)])


def ccdf_crossing_db(thresholds_db: np.ndarray, tail: np.ndarray, level: float) -> float:
    """Threshold (dB) where a non-increasing tail curve crosses the level."""
    tail = np.asarray(tail, dtype=float)
    thresholds_db = np.asarray(thresholds_db, dtype=float)
    below = np.nonzero(tail <= level)[0]
    if below.size == 0 or below[0] == 0:
        raise ValueError("tail does not cross the level inside the threshold grid")
    j = below[0]
    t0, t1 = tail[j - 1], tail[j]
    x0, x1 = thresholds_db[j - 1], thresholds_db[j]
    if t1 == t0:
        return float(x1)
    # interpolate in log-tail for a straighter crossing
    lt0, lt1, ll = np.log(t0), np.log(max(t1, 1e-300)), np.log(level)
    return float(x0 + (x1 - x0) * (ll - lt0) / (lt1 - lt0))


# ---------------------------------------------------------------------------
# Power spectral density


def srrc_power_spectrum(f, params: SystemParams) -> np.ndarray:
    """|A(f)|^2 of the subpulse in physical units; integrates to T/M."""
    Ts = params.T / params.M
    nu = np.abs(np.asarray(f, dtype=np.float64)) * Ts
    beta = params.beta
    flat = (1.0 - beta) / 2.0
    edge = (1.0 + beta) / 2.0
    shape = np.zeros_like(nu)
    shape[nu <= flat] = 1.0
    if beta > 0:
        mid = (nu > flat) & (nu <= edge)
        shape[mid] = 0.5 * (1.0 + np.cos(np.pi / beta * (nu[mid] - flat)))
    return Ts * Ts * shape


def chirp_spectrum_weight(f, params: SystemParams, c: np.ndarray) -> np.ndarray:
    """|DTFT of the pilot chirp sequence|^2 at physical frequency f."""
    f = np.asarray(f, dtype=np.float64)
    m = np.arange(params.M)
    phases = np.exp(-2j * np.pi * np.multiply.outer(f * params.T / params.M, m))
    return np.abs(phases @ c) ** 2


def psd_analytic(f, params: SystemParams, alloc: PowerAllocation,
                 c: np.ndarray | None = None) -> dict:
    """Analytic PSD of the composite frame, split into pilot and data parts.

    The pilot component rides the n = 0 Doppler tone with the chirp's
    spectral weight; the average data component fills the remaining Doppler
    tones under the same subpulse envelope. Both integrate to their
    configured mean powers.
    """
    from .chirp import make_chirp
    if c is None:
        c = make_chirp(params.M).values
    f = np.asarray(f, dtype=np.float64)
    N, M, T = params.N, params.M, params.T
    a2 = srrc_power_spectrum(f, params)
    phi0 = np.abs(dirichlet(-N * T * f, N)) ** 2
    pilot = alloc.E_c * a2 * N * N * phi0 * chirp_spectrum_weight(f, params, c) / (N * T)

    E_sym = alloc.E_s * N / (N - 1) if N > 1 else 0.0
    doppler_sum = np.zeros_like(f)
    for n in range(1, N):
        doppler_sum += np.abs(dirichlet(n - N * T * f, N)) ** 2
    data = E_sym * N * M * a2 * doppler_sum / (N * T)
    return {"pilot": pilot, "data": data, "total": pilot + data}


def linear_fmcw_psd(f, params: SystemParams, total_power: float = 1.0,
                    oversample: int = 64) -> np.ndarray:
    """PSD of a rectangular-windowed linear chirp train at the same nominal
    bandwidth (chirp rate M/T^2, swept band-centered from -B/2 to +B/2),
    normalized to the given mean power."""
    f = np.asarray(f, dtype=np.float64)
    T, M, N = params.T, params.M, params.N
    eps_rate = M / T ** 2
    n_samp = oversample * M
    t = (np.arange(n_samp) + 0.5) * (T / n_samp)
    chirp = np.exp(1j * np.pi * eps_rate * (t - T / 2.0) ** 2)
    # Single-chirp spectrum C(f) by direct quadrature, blocked over f.
    C = np.empty(f.shape, dtype=np.complex128)
    block = 1024
    for i in range(0, f.size, block):
        fb = f.ravel()[i:i + block]
        C.ravel()[i:i + block] = np.exp(-2j * np.pi * np.outer(fb, t)) @ chirp * (T / n_samp)
    psd = np.abs(C) ** 2 * N * N * np.abs(dirichlet(-N * T * f, N)) ** 2 / (N * T)
    # Normalize numerically: a unit-modulus chirp train has mean power 1.
    return psd * total_power


# ---------------------------------------------------------------------------
# Ambiguity functions


def synthesize_symbol_train(symbols: np.ndarray, pulses: PulseBank, O: int,
                            lead_bins: int, total_bins: int) -> np.ndarray:
    """Place symbols at unit bin spacing, first symbol at u = lead_bins.

    Returns samples on the grid u_i = i / O - Q for i in
    0 .. O*(total_bins + 2Q); callers share one grid across signals.
    """
    from scipy.signal import fftconvolve
    n_out = O * (total_bins + 2 * pulses.Q) + 1
    train = np.zeros(n_out, dtype=np.complex128)
    first = (pulses.Q + lead_bins) * O
    train[first:first + O * symbols.size:O] = symbols
    return fftconvolve(train, pulses.srrc_taps(O).astype(np.complex128), mode="same")


def ambiguity_numeric(tx: np.ndarray, ref: np.ndarray, dt: float,
                      tau_shifts: np.ndarray, nu_grid: np.ndarray,
                      t_axis: np.ndarray) -> np.ndarray:
    """Cross-ambiguity on a sampled grid.

    A(tau, nu) = integral tx(t) conj(ref(t - tau)) exp(-j2pi nu (t - tau)) dt
    with tau restricted to integer sample shifts (tau = shift * dt).
    Returns a (len(tau_shifts), len(nu_grid)) matrix.
    """
    tx = np.asarray(tx)
    ref = np.asarray(ref)
    tau_shifts = np.asarray(tau_shifts, dtype=np.int64)
    nu_grid = np.asarray(nu_grid, dtype=np.float64)
    n = tx.size
    out = np.empty((tau_shifts.size, nu_grid.size), dtype=np.complex128)
    block = 64
    for j0 in range(0, nu_grid.size, block):
        nus = nu_grid[j0:j0 + block]
        E = np.exp(-2j * np.pi * np.outer(t_axis, nus))
        for i, s in enumerate(tau_shifts):
            shifted = np.zeros(n, dtype=np.complex128)
            if s >= 0:
                shifted[s:] = ref[:n - s]
            else:
                shifted[:n + s] = ref[-s:]
            w = tx * np.conj(shifted)
            tau = s * dt
            out[i, j0:j0 + block] = (w @ E) * dt * np.exp(2j * np.pi * nus * tau)
    return out


def pilot_ambiguity_surface(params: SystemParams, pulses: PulseBank, kind: str,
                            tau_over: int = 8, nu_over: int = 4,
                            tau_span_bins: float | None = None,
                            nu_span_bins: float | None = None):
    """Numeric ambiguity of the cyclically extended pilot train against the
    plain pilot train, on a (tau, nu) grid in bin units.

    Returns (tau_bins, nu_bins, A) with A normalized so A[0 lag, 0 Doppler]
    is the reference energy.
    """
    from .chirp import make_chirp, pilot_impulse_bin
    M, N, O = params.M, params.N, params.O
    total_bins = M * N + 2 * M
    if kind == "linear_fmcw":
        # True rectangular-windowed chirp train (no pulse shaping), swept
        # band-centered at one cycle-per-bin total excursion.
        n_out = O * (total_bins + 2 * pulses.Q) + 1
        u = (np.arange(n_out) - pulses.Q * O) / O  # bins from the ce start
        phase = np.pi * ((np.mod(u, M) - M / 2.0) ** 2) / M
        window = (u >= 0) & (u < M * N + 2 * M)
        tx = np.where(window, np.exp(1j * phase), 0.0)
        ref_window = (u >= M) & (u < M * N + M)
        ref = np.where(ref_window, np.exp(1j * phase), 0.0)
    else:
        if kind == "dd_srn_fmcw":
            base = np.tile(make_chirp(M).values, N)
        elif kind == "ddip":
            base = np.zeros(M * N, dtype=np.complex128)
            base[pilot_impulse_bin(params)::M] = np.sqrt(M)
        else:
            raise ValueError(f"unknown ambiguity signal kind {kind!r}")
        ext = np.concatenate([base[-M:], base, base[:M]])
        tx = synthesize_symbol_train(ext, pulses, O, 0, total_bins)
        ref = synthesize_symbol_train(base, pulses, O, M, total_bins)

    tau_span = M / 2 if tau_span_bins is None else tau_span_bins
    nu_span = N / 2 if nu_span_bins is None else nu_span_bins
    tau_shifts = np.arange(-int(tau_span * O), int(tau_span * O) + 1)
    half_nu = max(int(nu_span * nu_over), 1)
    nu_bins = np.arange(-half_nu, half_nu + 1) * (nu_span / half_nu)
    dt = 1.0 / O  # bin units
    t_axis = np.arange(tx.size) * dt
    nu_phys = nu_bins / (M * N)  # cycles per bin
    A = ambiguity_numeric(tx, ref, dt, tau_shifts, nu_phys, t_axis)
    return tau_shifts / O, nu_bins, A


def ambiguity_dd_approx(tau_bins, nu_bins, params: SystemParams,
                        pulses: PulseBank, c: np.ndarray):
    """Separable narrowband approximation of the pilot-train ambiguity.

    A(tau, nu) ~ e^{j2pi nu tau} N phi(-nu N) sum_zeta g(tau + zeta)
    sum_m e^{-j2pi nu m/(MN)} c[m] conj(c[(m+zeta) mod M]), in bin units.
    """
    M, N = params.M, params.N
    tau_bins = np.atleast_1d(np.asarray(tau_bins, dtype=np.float64))
    nu_bins = np.atleast_1d(np.asarray(nu_bins, dtype=np.float64))
    m = np.arange(M)
    out = np.zeros((tau_bins.size, nu_bins.size), dtype=np.complex128)
    phi = dirichlet(-nu_bins, N)
    ramps = np.exp(-2j * np.pi * np.outer(nu_bins, m) / (M * N))  # (n_nu, M)
    for i, tau in enumerate(tau_bins):
        z_center = int(np.round(-tau))
        zetas = np.arange(z_center - pulses.Q - 1, z_center + pulses.Q + 2)
        g_vals = pulses.rc_sample(tau + zetas)
        nz = np.nonzero(g_vals)[0]
        for zi in nz:
            zeta = zetas[zi]
            corr_seq = c * np.conj(c[(m + zeta) % M])
            sums = ramps @ corr_seq
            out[i, :] += g_vals[zi] * sums
    out *= (N * phi * np.exp(2j * np.pi * nu_bins / (M * N) * tau_bins[:, None]))
    return out


def ideal_chirp_delay_ambiguity(tau, T: float, eps_rate: float, f_c: float = 0.0):
    """Crosscorrelation of the infinite-time linear chirp with its windowed
    copy: a pure sinc of delay."""
    tau = np.asarray(tau, dtype=np.float64)
    return (T * np.exp(2j * np.pi * (f_c - eps_rate * tau / 2.0) * tau)
            * np.exp(1j * np.pi * eps_rate * tau * T) * np.sinc(eps_rate * T * tau))


def practical_chirp_delay_ambiguity(tau, T: float, eps_rate: float, f_c: float = 0.0):
    """Autocorrelation of the windowed linear chirp; integration limits
    depend on the lag, which lifts and broadens the sidelobe floor."""
    tau = np.asarray(tau, dtype=np.float64)
    lo = np.maximum(0.0, tau)
    hi = np.minimum(T, T + tau)
    width = hi - lo
    arg = eps_rate * tau
    out = np.zeros(tau.shape, dtype=np.complex128)
    inside = width > 0
    small = inside & (np.abs(arg) < 1e-12)
    out[small] = width[small]
    rest = inside & ~small
    a = arg[rest]
    out[rest] = (np.exp(2j * np.pi * a * hi[rest]) - np.exp(2j * np.pi * a * lo[rest])) \
        / (2j * np.pi * a)
    return out * np.exp(2j * np.pi * (f_c - eps_rate * tau / 2.0) * tau)


# ---------------------------------------------------------------------------
# Fisher information and estimation bounds


@dataclass
class CrbResult:
    """Per-parameter MSE lower bounds in the order (|h|, angle h, l, k) per path."""

    bounds: np.ndarray        # length 4P, inf where the Fisher matrix is singular
    fisher: np.ndarray        # 4P x 4P
    condition: float

    def delay_bounds(self) -> np.ndarray:
        return self.bounds[2::4]

    def doppler_bounds(self) -> np.ndarray:
        return self.bounds[3::4]


def _path_response_and_derivs(X: np.ndarray, p: PathParams, params: SystemParams,
                              pulses: PulseBank):
    """Unit-gain response R plus dR/dl and dR/dk for one path (M x N each)."""
    M, N = params.M, params.N
    Q = pulses.Q
    m = np.arange(M)
    n = np.arange(N)
    n_tilde = np.arange(N)
    fl = int(np.floor(p.l))
    taps = pulses.taps_for_delay(p.l)
    d_grid = np.arange(-Q, Q + 1)
    dtaps = rc_derivative_wrt_lp(d_grid + Q, fl, p.l, Q, pulses.beta)
    # The tap table is hard-truncated beyond Q bins; its derivative vanishes
    # wherever the tap itself is clamped to zero.
    l_bar = d_grid + fl - p.l
    dtaps = np.where(np.abs(l_bar) > Q, 0.0, dtaps)
    W = dirichlet(n_tilde[:, None] + p.k - n[None, :], N)
    dW = dirichlet_derivative_wrt_kp(n_tilde[:, None] + p.k - n[None, :], N)
    R = np.zeros((M, N), dtype=np.complex128)
    dR_dl = np.zeros((M, N), dtype=np.complex128)
    dR_dk = np.zeros((M, N), dtype=np.complex128)
    for di, dd in enumerate(d_grid):
        tap = taps[di]
        dtap = dtaps[di]
        if tap == 0.0 and dtap == 0.0:
            continue
        v = m - fl - dd
        rows = np.mod(v, M)
        wraps = v // M
        src = X[rows] * np.exp(2j * np.pi * np.multiply.outer(wraps, n_tilde) / N)
        phase = np.exp(2j * np.pi * (m - p.l - dd) * p.k / (M * N))
        sW = src @ W
        base = phase[:, None] * sW
        R += tap * base
        dR_dl += (dtap - 2j * np.pi * p.k / (M * N) * tap) * base
        dR_dk += tap * phase[:, None] * (src @ dW) \
            + tap * (2j * np.pi * (m - p.l - dd) / (M * N))[:, None] * base
    return R, dR_dl, dR_dk


def fisher(chan: ChannelRealization, X: DDFrame, sigma_z2: float,
           params: SystemParams, pulses: PulseBank) -> np.ndarray:
    """Fisher information over theta = (|h_p|, angle h_p, l_p, k_p) per path,
    assembled from the analytic response derivatives."""
    if sigma_z2 <= 0:
        raise ValueError("noise variance must be positive for a Fisher matrix")
    X.check_dims(params)
    Xg = np.asarray(X.grid)
    P = chan.P
    J = np.empty((params.mn, 4 * P), dtype=np.complex128)
    for i, p in enumerate(chan.paths):
        R, dR_dl, dR_dk = _path_response_and_derivs(Xg, p, params, pulses)
        mag = abs(p.h)
        if mag == 0:
            raise ValueError("Fisher information requires nonzero path gains")
        unit_phase = p.h / mag
        J[:, 4 * i + 0] = (unit_phase * R).ravel(order="F")
        J[:, 4 * i + 1] = (1j * p.h * R).ravel(order="F")
        J[:, 4 * i + 2] = (p.h * dR_dl).ravel(order="F")
        J[:, 4 * i + 3] = (p.h * dR_dk).ravel(order="F")
    return (2.0 / sigma_z2) * np.real(J.conj().T @ J)


def crb(chan: ChannelRealization, X: DDFrame, sigma_z2: float,
        params: SystemParams, pulses: PulseBank,
        cond_limit: float = 1e12) -> CrbResult:
    """Per-parameter MSE bounds: diagonal of the Fisher inverse via a solve.

    A numerically singular Fisher matrix yields infinite bounds and reports
    its condition number instead of raising.
    """
    F = fisher(chan, X, sigma_z2, params, pulses)
    condition = float(np.linalg.cond(F))
    n = F.shape[0]
    if not np.isfinite(condition) or condition > cond_limit:
        return CrbResult(bounds=np.full(n, np.inf), fisher=F, condition=condition)
    inv = np.linalg.solve(F, np.eye(n))
    return CrbResult(bounds=np.diagonal(inv).copy(), fisher=F, condition=condition)
