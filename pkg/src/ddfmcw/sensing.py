"""Chirp compression in the DD domain, matching pursuit with grid evolution,
and data-aided sensing with iterative data-interference cancellation.

Compression correlates each Doppler column of the received frame against the
conjugated pilot reference sequence, concentrating each path's energy into a
Nyquist-shaped delay profile and a Dirichlet-shaped Doppler profile. The
pursuit then refines delay/Doppler estimates on a virtual grid whose spacing
halves every round, and re-fits all path gains by least squares after each
new path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import AtomCache, ChannelRealization, PathParams, dd_response
from .params import DDFrame, SystemParams
from .pulses import PulseBank

# Pursuit stops chasing residual energy below this fraction of the frame
# energy; prevents fitting numerical dust in noiseless runs.
_PURSUIT_ENERGY_FLOOR = 1e-12


@dataclass(frozen=True)
class PathEstimate:
    """Estimated path: complex gain, delay/Doppler bins, refinement depth."""

    h_hat: complex
    l_hat: float
    k_hat: float
    refinement_level: int = 0


@dataclass(frozen=True)
class SensingConfig:
    P_max: int = 4
    L: int = 10
    I_DAS: int = 4
    neighborhood: int = 3

    def __post_init__(self):
        if self.P_max < 1:
            raise ValueError("P_max must be >= 1")
        if self.L < 0:
            raise ValueError("grid-evolution depth must be >= 0")
        if self.neighborhood < 1 or self.neighborhood % 2 == 0:
            raise ValueError("neighborhood must be a positive odd grid side")


@dataclass
class SensingResult:
    estimates: list
    residual_energies: list = field(default_factory=list)
    rank_deficient: bool = False


def dd_chirp_compress(Y: DDFrame, ref: np.ndarray) -> DDFrame:
    """Per-column circular correlation of the frame against the reference.

    D[m_dot, n] = sum_m conj(ref[(m - m_dot) mod M]) Y[m, n], evaluated with
    length-M FFTs. The conjugation makes the zero-autocorrelation property of
    the chirp concentrate each path at its delay bin.
    """
    ref = np.asarray(ref, dtype=np.complex128)
    M = Y.grid.shape[0]
    if ref.shape != (M,):
        raise ValueError(f"reference length {ref.shape} does not match frame delay size {M}")
    spec_ref = np.fft.fft(ref)
    D = np.fft.ifft(np.fft.fft(Y.grid, axis=0) * np.conj(spec_ref)[:, None], axis=0)
    return DDFrame(grid=D, role="ddr")


def dd_chirp_compress_direct(Y: DDFrame, ref: np.ndarray) -> DDFrame:
    """O(M^2 N) double-loop form of the compression; test oracle."""
    ref = np.asarray(ref, dtype=np.complex128)
    M, N = Y.grid.shape
    D = np.zeros((M, N), dtype=np.complex128)
    for m_dot in range(M):
        coeffs = np.conj(ref[(np.arange(M) - m_dot) % M])
        D[m_dot, :] = coeffs @ Y.grid
    return DDFrame(grid=D, role="ddr")


def _signed_doppler(n: int, N: int) -> float:
    """DFT column index to signed Doppler bin in (-N/2, N/2]."""
    return float(n) if n <= N // 2 else float(n - N)


def _pursuit_value(cache: AtomCache, l: float, k: float, resid: np.ndarray) -> float:
    u, v, norm2 = cache.get(l, k)
    inner = u.conj() @ resid @ v.conj()
    return float(np.abs(inner) ** 2 / norm2)


def _refine_estimate(cache: AtomCache, resid: np.ndarray, l0: float, k0: float,
                     cfg: SensingConfig, l_hi: float) -> tuple[float, float, float]:
    """Grid evolution: neighborhood search with spacing halved each round.

    The incumbent is always among the candidates, so the objective is
    non-decreasing over rounds. Delay candidates outside [0, l_hi) are
    skipped.
    """
    half = cfg.neighborhood // 2
    steps = np.arange(-half, half + 1)
    best_l, best_k = l0, k0
    best_val = _pursuit_value(cache, l0, k0, resid)
    for level in range(1, cfg.L + 1):
        spacing = 2.0 ** -level
        for dl in steps:
            for dk in steps:
                cand_l = best_l + dl * spacing
                cand_k = best_k + dk * spacing
                if dl == 0 and dk == 0:
                    continue
                if not 0.0 <= cand_l < l_hi:
                    continue
                val = _pursuit_value(cache, cand_l, cand_k, resid)
                if val > best_val:
                    best_val, best_l, best_k = val, cand_l, cand_k
    return best_l, best_k, best_val


def omp_grid_evolution(Y: DDFrame, pilot: DDFrame, cfg: SensingConfig,
                       params: SystemParams, pulses: PulseBank,
                       ref: np.ndarray, cache: AtomCache | None = None,
                       data_prior: DDFrame | None = None) -> SensingResult:
    """Successive path extraction with per-path grid evolution and joint
    least-squares gain refit.

    Stops at P_max paths, when the residual energy stops decreasing, or when
    the pursuit gain falls below the numerical-dust floor. A rank-deficient
    atom stack drops the newest path and stops, flagged on the result.
    """
    if cache is None:
        cache = AtomCache(pilot, params, pulses, resolution_bits=max(12, cfg.L + 2))
    work = np.asarray(Y.grid)
    if data_prior is not None:
        work = work - np.asarray(data_prior.grid)
    y_vec = work.ravel(order="F")
    frame_energy = float(np.sum(np.abs(work) ** 2))
    floor = _PURSUIT_ENERGY_FLOOR * max(frame_energy, 1e-300)

    result = SensingResult(estimates=[])
    atoms: list[np.ndarray] = []
    ls_paths: list[tuple[float, float]] = []
    gains = np.zeros(0, dtype=np.complex128)
    resid = work.copy()
    result.residual_energies.append(frame_energy)

    for p in range(1, cfg.P_max + 1):
        D = dd_chirp_compress(DDFrame(grid=resid, role="received"), ref)
        peak = np.unravel_index(np.argmax(np.abs(D.grid)), D.grid.shape)
        l0 = float(min(peak[0], params.l_max - 1))
        k0 = _signed_doppler(int(peak[1]), params.N)

        l_hat, k_hat, best_val = _refine_estimate(cache, resid, l0, k0, cfg, float(params.l_max))
        if best_val <= floor:
            break

        u, v, _ = cache.get(l_hat, k_hat)
        atoms.append(np.outer(u, v).ravel(order="F"))
        ls_paths.append((l_hat, k_hat))
        stack = np.column_stack(atoms)
        gains, _, rank, _ = np.linalg.lstsq(stack, y_vec, rcond=None)
        if rank < len(atoms):
            atoms.pop()
            ls_paths.pop()
            result.rank_deficient = True
            break

        resid_vec = y_vec - stack @ gains
        resid = resid_vec.reshape(work.shape, order="F")
        result.residual_energies.append(float(np.sum(np.abs(resid_vec) ** 2)))
        if result.residual_energies[-1] >= result.residual_energies[-2]:
            break

    result.estimates = [
        PathEstimate(h_hat=complex(g), l_hat=l, k_hat=k, refinement_level=cfg.L)
        for g, (l, k) in zip(gains[:len(ls_paths)], ls_paths)
    ]
    return result


def estimates_to_channel(estimates) -> ChannelRealization:
    paths = tuple(PathParams(h=e.h_hat, l=e.l_hat, k=e.k_hat) for e in estimates)
    return ChannelRealization(paths=paths)


def das(Y: DDFrame, pilot: DDFrame, X_d_known: DDFrame, cfg: SensingConfig,
        params: SystemParams, pulses: PulseBank, ref: np.ndarray,
        cache: AtomCache | None = None) -> SensingResult:
    """Data-aided sensing: alternate path estimation with cancellation of the
    channel-distorted known data component.

    The first iteration runs the pursuit on the raw frame (data acts as
    noise); each subsequent iteration rebuilds the data's distorted image
    under the current estimates and subtracts it before re-estimating.
    """
    if cache is None:
        cache = AtomCache(pilot, params, pulses, resolution_bits=max(12, cfg.L + 2))
    result = SensingResult(estimates=[])
    data_prior: DDFrame | None = None
    for _ in range(cfg.I_DAS):
        result = omp_grid_evolution(Y, pilot, cfg, params, pulses, ref,
                                    cache=cache, data_prior=data_prior)
        if not result.estimates:
            data_prior = None
            continue
        chan_est = estimates_to_channel(result.estimates)
        data_prior = dd_response(X_d_known, chan_est, params, pulses)
    return result


def data_interference_energy(Y: DDFrame, pilot: DDFrame, estimates,
                             params: SystemParams, pulses: PulseBank) -> float:
    """Residual energy after removing the estimated pilot image; the part
    DAS iterations are meant to shrink when data dominates it."""
    chan_est = estimates_to_channel(estimates)
    pilot_image = dd_response(pilot, chan_est, params, pulses)
    return float(np.sum(np.abs(np.asarray(Y.grid) - pilot_image.grid) ** 2))


ESTIMATES_CSV_HEADER = "trial_id,p,re_h,im_h,l,k"


def export_estimates_csv(path: str, estimates, trial_id: int = 0,
                         append: bool = False) -> None:
    """Write path estimates as CSV rows (trial_id, p, re(h), im(h), l, k)."""
    mode = "a" if append else "w"
    with open(path, mode) as fh:
        if not append:
            fh.write(ESTIMATES_CSV_HEADER + "\n")
        for p, e in enumerate(estimates, start=1):
            fh.write(f"{trial_id},{p},{e.h_hat.real!r},{e.h_hat.imag!r},"
                     f"{e.l_hat!r},{e.k_hat!r}\n")
