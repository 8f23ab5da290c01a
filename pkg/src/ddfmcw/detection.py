"""Effective channel assembly, adaptive sub-channel extraction, soft
successive-interference-cancellation MMSE detection, and joint channel
estimation and data detection.

The full symbol-rate channel is a banded cyclic MN x MN operator. Column q
couples into rows q + S where S collects the integer tap offsets of all
paths; |S| = L_g is constant across q, so every column collapses to a dense
length-L_g spreading vector and each sample's interference neighborhood to
an L_g x (2 l_max + 4Q + 3) sub-matrix. Equalization solves one L_g x L_g
Hermitian system per sample; delay rows are processed sequentially because
cancellation is order-dependent, while the per-row Doppler batch solves in
one stacked call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .channel import ChannelRealization, dd_response
from .params import DDFrame, SystemParams
from .pulses import PulseBank
from .sensing import SensingConfig, estimates_to_channel, omp_grid_evolution

_ZERO_NOISE_RIDGE = 1e-12


# ---------------------------------------------------------------------------
# Constellations


@dataclass(frozen=True)
class Constellation:
    name: str
    points: np.ndarray          # unit mean energy
    bits: np.ndarray            # (size, bits_per_symbol) 0/1 labels

    @property
    def bits_per_symbol(self) -> int:
        return self.bits.shape[1]

    @property
    def mean_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def scaled(self, symbol_energy: float) -> "Constellation":
        """Same labeling with points scaled to the given mean energy."""
        factor = np.sqrt(symbol_energy / self.mean_energy)
        return Constellation(name=self.name, points=self.points * factor, bits=self.bits)

    def map_bits(self, bits: np.ndarray) -> np.ndarray:
        """Bit array (..., k) to symbols via the gray labeling."""
        bits = np.asarray(bits)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        idx = bits @ weights
        lut = np.empty(2 ** self.bits_per_symbol, dtype=np.complex128)
        lut[self.bits @ weights] = self.points
        return lut[idx]

    def hard_bits(self, symbols: np.ndarray) -> np.ndarray:
        """Nearest-point decision, returns (..., k) bit labels."""
        symbols = np.asarray(symbols)
        d = np.abs(symbols[..., None] - self.points) ** 2
        idx = np.argmin(d, axis=-1)
        return self.bits[idx]


def _gray(n: int) -> np.ndarray:
    g = np.arange(n) ^ (np.arange(n) >> 1)
    return g


def make_constellation(name: str) -> Constellation:
    """Named unit-energy gray-mapped QAM presets."""
    if name == "qam4":
        side = 2
    elif name == "qam16":
        side = 4
    else:
        raise ValueError(f"unknown constellation preset {name!r}")
    bits_per_axis = side.bit_length() - 1
    levels = 2 * np.arange(side) - (side - 1)
    gray = _gray(side)
    axis_bits = ((gray[:, None] >> np.arange(bits_per_axis - 1, -1, -1)) & 1)
    re, im = np.meshgrid(levels, levels, indexing="ij")
    points = (re + 1j * im).ravel()
    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    bits = np.concatenate([
        np.repeat(axis_bits, side, axis=0),
        np.tile(axis_bits, (side, 1)),
    ], axis=1)
    return Constellation(name=name, points=points, bits=bits)


# ---------------------------------------------------------------------------
# Effective channel


@dataclass
class EffectiveChannel:
    """Banded cyclic channel operator plus sub-channel extraction state."""

    params: SystemParams
    offsets: np.ndarray          # S: sorted integer row offsets of a column
    band: np.ndarray             # (L_g, MN): band[i, q] = G[q + S_i, q]
    window: np.ndarray           # sub-matrix column offsets, length 2*l_max+4Q+3
    offset_map: np.ndarray       # (L_g, W): index into S of S_i - window_w, or -1
    G: sp.csr_matrix = field(repr=False, default=None)

    @property
    def L_g(self) -> int:
        return int(self.offsets.size)

    def spreading_vector(self, q: int) -> np.ndarray:
        """Column q of G with zero rows collapsed (length L_g)."""
        return self.band[:, q]

    def subchannel(self, q: int) -> np.ndarray:
        """L_g x W sub-matrix covering the interference neighborhood of q."""
        MN = self.params.mn
        cols = (q + self.window) % MN
        safe = np.where(self.offset_map < 0, 0, self.offset_map)
        Gq = self.band[safe, cols[None, :]]
        Gq[self.offset_map < 0] = 0.0
        return Gq

    def matvec(self, s: np.ndarray) -> np.ndarray:
        return self.G @ s


def build_effective_channel(chan: ChannelRealization, params: SystemParams,
                            pulses: PulseBank) -> EffectiveChannel:
    """Assemble the banded operator from path parameters.

    G[q + o, q] = sum_p h_p rc(o - l_p) exp(j 2 pi k_p (q + floor(l_p) - l_p)
    / (MN)) over paths with |o - floor(l_p)| <= Q; the q dependence is a pure
    per-path phase ramp, so each band row is a sum of ramps.
    """
    if chan.P == 0:
        raise ValueError("effective channel requires at least one path")
    MN = params.mn
    Q = pulses.Q
    offset_set = set()
    for p in chan.paths:
        fl = int(np.floor(p.l))
        taps = pulses.taps_for_delay(p.l)
        nz = np.nonzero(taps)[0]
        offset_set.update((fl - Q + int(i)) for i in nz)
    offsets = np.array(sorted(offset_set), dtype=np.int64)
    L_g = offsets.size

    q = np.arange(MN)
    band = np.zeros((L_g, MN), dtype=np.complex128)
    # The Doppler phase follows the wrapped row index (q + o) mod MN, so each
    # band row is a ramp with a fixed correction on the segment that wraps.
    wraps = (q[None, :] + offsets[:, None]) // MN
    for p in chan.paths:
        fl = int(np.floor(p.l))
        taps = pulses.taps_for_delay(p.l)
        d_of_offset = offsets - fl  # tap index for this path at each offset
        valid = (d_of_offset >= -Q) & (d_of_offset <= Q)
        coef = np.zeros(L_g, dtype=np.complex128)
        coef[valid] = taps[d_of_offset[valid] + Q]
        ramp = np.exp(2j * np.pi * p.k * (q + fl - p.l) / MN)
        band += p.h * np.outer(coef, ramp) * np.exp(-2j * np.pi * p.k * wraps)

    rows = ((q[None, :] + offsets[:, None]) % MN).ravel()
    cols = np.tile(q, L_g)
    G = sp.coo_matrix((band.ravel(), (rows, cols)), shape=(MN, MN)).tocsr()

    half_w = params.l_max + 2 * Q + 1
    window = np.arange(-half_w, half_w + 1, dtype=np.int64)
    pos = {int(o): i for i, o in enumerate(offsets)}
    offset_map = np.full((L_g, window.size), -1, dtype=np.int64)
    for i, o in enumerate(offsets):
        for w, off in enumerate(window):
            offset_map[i, w] = pos.get(int(o - off), -1)

    return EffectiveChannel(params=params, offsets=offsets, band=band,
                            window=window, offset_map=offset_map, G=G)


# ---------------------------------------------------------------------------
# Soft SIC-MMSE


@dataclass
class DetectionResult:
    hard: DDFrame                  # hard symbol decisions (pilot cells included)
    soft: np.ndarray               # posterior means
    variances: np.ndarray          # posterior variances
    ridge_used: bool = False
    estimates: list = field(default_factory=list)  # filled by jcedd


class _SicMmseState:
    """Priors carried across sweeps: DD means/variances and their time image."""

    def __init__(self, params: SystemParams, A: Constellation,
                 pilot_mask: np.ndarray | None, pilot_values: np.ndarray | None):
        M, N = params.M, params.N
        self.params = params
        self.A = A
        self.pilot_mask = np.zeros((M, N), dtype=bool) if pilot_mask is None else pilot_mask
        self.X_mean = np.zeros((M, N), dtype=np.complex128)
        if pilot_values is not None:
            self.X_mean[self.pilot_mask] = pilot_values[self.pilot_mask]
        self.X_var = np.full((M, N), A.mean_energy, dtype=np.float64)
        self.X_var[self.pilot_mask] = 0.0
        self.s_mean = np.fft.ifft(self.X_mean, axis=1, norm="ortho").ravel(order="F")
        self.v_row = self.X_var.mean(axis=1)  # time-sample prior variance per delay row

    def time_variances(self) -> np.ndarray:
        return np.tile(self.v_row, self.params.N)


def _soft_symbol_posterior(x_tilde: np.ndarray, mu: float, var: float,
                           A: Constellation) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian-likelihood posterior over the constellation, uniform prior."""
    var = max(var, 1e-30)
    logw = -np.abs(x_tilde[:, None] - mu * A.points[None, :]) ** 2 / var
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    w /= w.sum(axis=1, keepdims=True)
    mean = w @ A.points
    var_post = w @ (np.abs(A.points) ** 2) - np.abs(mean) ** 2
    return mean, np.maximum(var_post, 0.0)


def _sic_mmse_sweep(r: np.ndarray, eff: EffectiveChannel, sigma_z2: float,
                    state: _SicMmseState) -> bool:
    """One full sweep over delay rows; returns True if a ridge was needed."""
    params = state.params
    M, N, MN = params.M, params.N, params.mn
    A = state.A
    L_g = eff.L_g
    sigma = sigma_z2
    ridge_used = False
    if sigma <= 0.0:
        sigma = _ZERO_NOISE_RIDGE
        ridge_used = True
    safe_map = np.where(eff.offset_map < 0, 0, eff.offset_map)
    dead = eff.offset_map < 0
    eye = np.eye(L_g)

    for m in range(M):
        delta_r = r - eff.matvec(state.s_mean)
        q_m = m + M * np.arange(N)
        rows = (q_m[:, None] + eff.offsets[None, :]) % MN        # (N, L_g)
        cols = (q_m[:, None] + eff.window[None, :]) % MN          # (N, W)
        g_q = eff.band[:, q_m].T                                  # (N, L_g)
        Gq = eff.band[safe_map[None, :, :], cols[:, None, :]]     # (N, L_g, W)
        Gq[:, dead] = 0.0
        v_cols = np.tile(state.v_row, N)[cols]                    # (N, W)
        A_mat = Gq * np.sqrt(v_cols)[:, None, :]
        C = A_mat @ A_mat.conj().transpose(0, 2, 1) + sigma * eye[None, :, :]
        f = np.linalg.solve(C, g_q[:, :, None])[:, :, 0]          # (N, L_g)
        r_tilde = delta_r[rows] + g_q * state.s_mean[q_m][:, None]
        s_tilde = np.einsum("ni,ni->n", f.conj(), r_tilde)
        mu = np.einsum("ni,ni->n", f.conj(), g_q).real

        x_tilde = np.fft.fft(s_tilde, norm="ortho")
        mu_bar = float(np.mean(mu))
        v_prior = state.v_row[m]
        var_bar = float(np.mean(np.maximum(mu - mu ** 2 * v_prior, 0.0)))

        mean, var_post = _soft_symbol_posterior(x_tilde, mu_bar, var_bar, A)
        keep = state.pilot_mask[m]
        mean[keep] = state.X_mean[m, keep]
        var_post[keep] = 0.0
        state.X_mean[m, :] = mean
        state.X_var[m, :] = var_post
        state.s_mean[q_m] = np.fft.ifft(mean, norm="ortho")
        state.v_row[m] = var_post.mean()
    return ridge_used


def sic_mmse_detect(Y: DDFrame, eff: EffectiveChannel, sigma_z2: float,
                    A: Constellation, I_DET: int = 8,
                    pilot_mask: np.ndarray | None = None,
                    pilot_values: np.ndarray | None = None) -> DetectionResult:
    """Iterative soft SIC-MMSE with known channel.

    Per delay row, the residual is recomputed, each Doppler sample is MMSE
    equalized against its sub-channel, the row is rotated to the DD domain
    for symbol-wise soft ML, and the updated posteriors feed back as priors.
    Positions under pilot_mask are clamped to pilot_values and never updated.
    """
    params = eff.params
    Y.check_dims(params)
    r = np.fft.ifft(np.asarray(Y.grid), axis=1, norm="ortho").ravel(order="F")
    state = _SicMmseState(params, A, pilot_mask, pilot_values)
    ridge = False
    for _ in range(I_DET):
        ridge |= _sic_mmse_sweep(r, eff, sigma_z2, state)
    hard = _hard_decide(state, A)
    return DetectionResult(hard=hard, soft=state.X_mean.copy(),
                           variances=state.X_var.copy(), ridge_used=ridge)


def _hard_decide(state: _SicMmseState, A: Constellation) -> DDFrame:
    d = np.abs(state.X_mean[..., None] - A.points) ** 2
    hard = A.points[np.argmin(d, axis=-1)]
    hard[state.pilot_mask] = state.X_mean[state.pilot_mask]
    return DDFrame(grid=hard, role="composite")


DECISIONS_CSV_HEADER = "m,n,re_symbol,im_symbol,bits"


def export_decisions_csv(path: str, frame: DDFrame, A: Constellation,
                         data_mask: np.ndarray | None = None) -> None:
    """Write hard symbol decisions and their bit labels as CSV rows.

    data_mask selects the cells to export (defaults to the whole grid);
    pilot cells are normally excluded by the caller.
    """
    grid = np.asarray(frame.grid)
    if data_mask is None:
        data_mask = np.ones(grid.shape, dtype=bool)
    bits = A.hard_bits(grid)
    with open(path, "w") as fh:
        fh.write(DECISIONS_CSV_HEADER + "\n")
        for m in range(grid.shape[0]):
            for n in range(grid.shape[1]):
                if not data_mask[m, n]:
                    continue
                label = "".join(str(b) for b in bits[m, n])
                fh.write(f"{m},{n},{grid[m, n].real!r},{grid[m, n].imag!r},{label}\n")


def jcedd(Y: DDFrame, X_c: DDFrame, sigma_z2: float, A: Constellation,
          cfg: SensingConfig, params: SystemParams, pulses: PulseBank,
          ref: np.ndarray, I_JCEDD: int = 8) -> DetectionResult:
    """Joint channel estimation and data detection.

    Alternates: cancel the current data image to isolate the pilot, estimate
    paths by grid-evolution pursuit, rebuild the effective channel, run one
    SIC-MMSE sweep with the pilot column clamped to the known pilot frame.
    Returns data decisions (pilot cells carry the pilot) plus the final path
    estimates.
    """
    Y.check_dims(params)
    X_c.check_dims(params)
    pilot_mask = np.zeros((params.M, params.N), dtype=bool)
    pilot_mask[:, 0] = True  # pilot owns the whole n = 0 Doppler column

    r = np.fft.ifft(np.asarray(Y.grid), axis=1, norm="ortho").ravel(order="F")
    state = _SicMmseState(params, A, pilot_mask, np.asarray(X_c.grid))
    from .channel import AtomCache
    cache = AtomCache(X_c, params, pulses, resolution_bits=max(12, cfg.L + 2))
    estimates: list = []
    ridge = False
    for _ in range(I_JCEDD):
        X_d_hat = DDFrame(grid=state.X_mean - np.asarray(X_c.grid), role="data")
        if estimates:
            Y_d = dd_response(X_d_hat, estimates_to_channel(estimates), params, pulses)
            data_prior = Y_d
        else:
            data_prior = None
        res = omp_grid_evolution(Y, X_c, cfg, params, pulses, ref,
                                 cache=cache, data_prior=data_prior)
        if not res.estimates:
            continue
        estimates = res.estimates
        eff = build_effective_channel(estimates_to_channel(estimates), params, pulses)
        ridge |= _sic_mmse_sweep(r, eff, sigma_z2, state)
    hard = _hard_decide(state, A)
    return DetectionResult(hard=hard, soft=state.X_mean.copy(),
                           variances=state.X_var.copy(), ridge_used=ridge,
                           estimates=list(estimates))
