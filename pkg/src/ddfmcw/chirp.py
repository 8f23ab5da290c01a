"""Discrete chirp sequences, their autocorrelation properties, and pilot
frame construction.

The workhorse pilot is the unit-rate quadratic chirp c[m] = exp(j pi m^2 / M),
which has exactly zero cyclic autocorrelation at every nonzero lag whenever M
is even. Embedding it (scaled) in the n = 0 Doppler column of a DD frame
produces a repeated chirp train in the time domain with a near-constant
envelope, which is what makes the pilot low-PAPR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import DDFrame, SystemParams

PILOT_KINDS = ("dd_srn_fmcw", "ddip")

# Relative tolerance for floating-point integrality tests. Products like
# f_c * T can be ~1e5, so the test is scaled by the magnitude of the value.
_INTEGRALITY_RTOL = 1e-9


@dataclass(frozen=True)
class ChirpSequence:
    """Unit-modulus complex sequence of length M."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.complex128))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ChirpParams:
    """Carrier, chirp rate, block duration, and length for condition checks."""

    f_c: float
    epsilon: float
    T: float
    M: int


def make_chirp(M: int) -> ChirpSequence:
    """Quadratic-phase sequence exp(j pi m^2 / M); requires even M."""
    if M <= 0 or M % 2 != 0:
        raise ValueError(f"chirp length must be a positive even integer, got {M}")
    m = np.arange(M)
    return ChirpSequence(values=np.exp(1j * np.pi * (m * m % (2 * M)) / M))


def cyclic_autocorr(seq, zeta: int) -> complex:
    """Cyclic autocorrelation sum_m c[m] conj(c[(m + zeta) mod M])."""
    c = seq.values if isinstance(seq, ChirpSequence) else np.asarray(seq, dtype=np.complex128)
    M = len(c)
    if M < 1:
        raise ValueError("sequence must be non-empty")
    shifted = np.roll(c, -int(zeta))
    return complex(np.sum(c * np.conj(shifted)))


def cyclic_autocorr_all_lags(seq) -> np.ndarray:
    """All M cyclic autocorrelation values at once via length-M FFTs."""
    c = seq.values if isinstance(seq, ChirpSequence) else np.asarray(seq, dtype=np.complex128)
    spec = np.fft.fft(c)
    return np.fft.ifft(np.abs(spec) ** 2).conj()


def _is_integer(x: float) -> bool:
    return abs(x - round(x)) <= _INTEGRALITY_RTOL * max(1.0, abs(x))


@dataclass(frozen=True)
class ZcaCheck:
    holds: bool
    failed: tuple


def check_zca_conditions(cp: ChirpParams, exact_products: bool = False) -> ZcaCheck:
    """Evaluate the three chirp-parameter conditions for cyclic orthogonality.

    (a) epsilon T^2 / M integral, (b) that integer coprime with M,
    (c) f_c T + epsilon T^2 / 2 integral.

    Products like f_c * T can be huge, so floating-point integrality is
    tested at relative tolerance 1e-9; pass exact_products=True to assert the
    products are exactly integral by construction and bypass the tolerance.
    """
    if cp.T <= 0 or cp.M <= 0:
        raise ValueError("T and M must be positive")
    failed = []
    eps_T2 = cp.epsilon * cp.T ** 2
    fcT = cp.f_c * cp.T
    if exact_products:
        eps_T2 = round(eps_T2)
        fcT = round(fcT)

    rate_ratio = eps_T2 / cp.M
    cond_a = _is_integer(rate_ratio)
    if not cond_a:
        failed.append("a")

    if cond_a and math.gcd(int(round(rate_ratio)), cp.M) == 1:
        pass
    else:
        failed.append("b")

    if not _is_integer(fcT + eps_T2 / 2.0):
        failed.append("c")

    return ZcaCheck(holds=not failed, failed=tuple(failed))


def sampled_chirp(cp: ChirpParams, m) -> np.ndarray:
    """Samples of the infinite-time linear chirp at integer bin offsets m."""
    m = np.asarray(m, dtype=np.float64)
    phase = cp.f_c * cp.T / cp.M * m + cp.epsilon * cp.T ** 2 / (2.0 * cp.M ** 2) * m * m
    return np.exp(2j * np.pi * (phase - np.round(phase)))


def linear_autocorr(cp: ChirpParams, zeta: int, M: int) -> complex:
    """Windowed (non-cyclic) autocorrelation of the sampled chirp.

    sum_{m=0}^{M-1} c[m] conj(c[m + zeta]) with samples drawn from the
    infinite sequence, so no index wrapping occurs.
    """
    m = np.arange(M)
    return complex(np.sum(sampled_chirp(cp, m) * np.conj(sampled_chirp(cp, m + zeta))))


def build_pilot_frame(params: SystemParams, kind: str, E_c: float) -> DDFrame:
    """Pilot DD frame with total energy M * N * E_c, confined to Doppler column 0.

    dd_srn_fmcw spreads sqrt(N E_c) * c[m] down the whole column; ddip puts a
    single impulse of energy M * N * E_c at delay bin l_max.
    """
    if E_c <= 0:
        raise ValueError(f"E_c must be positive, got {E_c}")
    grid = np.zeros((params.M, params.N), dtype=np.complex128)
    if kind == "dd_srn_fmcw":
        c = make_chirp(params.M)
        grid[:, 0] = np.sqrt(params.N * E_c) * c.values
    elif kind == "ddip":
        grid[pilot_impulse_bin(params), 0] = np.sqrt(params.M * params.N * E_c)
    else:
        raise ValueError(f"unknown pilot kind {kind!r}, expected one of {PILOT_KINDS}")
    return DDFrame(grid=grid, role="pilot")


def pilot_impulse_bin(params: SystemParams) -> int:
    """Delay bin of the impulse pilot: l_max, so echoes stay clear of bin 0."""
    return params.l_max


def pilot_reference_sequence(params: SystemParams, kind: str) -> np.ndarray:
    """Length-M compression reference with norm-squared M.

    For the chirp pilot this is the chirp itself; for the impulse pilot it is
    a scaled impulse at the pilot bin, so correlation against it reduces to
    reading the received column at the echo offset.
    """
    if kind == "dd_srn_fmcw":
        return make_chirp(params.M).values
    if kind == "ddip":
        ref = np.zeros(params.M, dtype=np.complex128)
        ref[pilot_impulse_bin(params)] = np.sqrt(params.M)
        return ref
    raise ValueError(f"unknown pilot kind {kind!r}, expected one of {PILOT_KINDS}")
