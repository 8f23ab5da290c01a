"""Square-root-raised-cosine subpulse, its raised-cosine autocorrelation, the
periodic Dirichlet kernel, and the analytic sensitivities used by the Fisher
information assembly.

All pulse samplers work in normalized time: the unit is one delay bin (T/M
seconds), so the Nyquist zeros of the raised cosine sit at nonzero integers
and rc(0) = 1. The SRRC is normalized to unit energy on that time scale,
which makes a synthesized waveform's mean power equal the frame's mean
symbol power.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Width of the window around removable singularities inside which the closed
# forms are replaced by their limit plus a first-order correction. The plain
# expressions stay accurate (rel. err ~ eps/width) down to ~1e-8.
_SINGULARITY_WINDOW = 1e-7


def _as_array(t):
    return np.asarray(t, dtype=np.float64)


def srrc(t, beta: float):
    """Unit-energy square-root-raised-cosine pulse sampled at offset t (bins).

    Removable singularities at t = 0 and |t| = 1/(4 beta) are evaluated by
    their analytic limits, with a linear correction inside a narrow window.
    """
    t = _as_array(t)
    if beta == 0.0:
        return np.sinc(t)
    out = np.empty_like(t)
    t0 = 1.0 / (4.0 * beta)

    near_zero = np.abs(t) < _SINGULARITY_WINDOW
    near_t0 = np.abs(np.abs(t) - t0) < _SINGULARITY_WINDOW
    regular = ~(near_zero | near_t0)

    tr = t[regular]
    num = np.sin(np.pi * tr * (1.0 - beta)) + 4.0 * beta * tr * np.cos(np.pi * tr * (1.0 + beta))
    den = np.pi * tr * (1.0 - (4.0 * beta * tr) ** 2)
    out[regular] = num / den

    # a(0) limit; the pulse is even so the linear term vanishes there.
    out[near_zero] = 1.0 - beta + 4.0 * beta / np.pi

    if np.any(near_t0):
        limit = (beta / np.sqrt(2.0)) * (
            (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
            + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
        )
        slope = _limit_slope(lambda x: srrc(x, beta), t0)
        tt = t[near_t0]
        out[near_t0] = limit + np.sign(tt) * slope * (np.abs(tt) - t0)
    return out if out.ndim else float(out)


def rc(t_bar, beta: float):
    """Raised-cosine Nyquist pulse at offset t_bar from its peak (bins).

    rc(0) = 1, rc(k) = 0 for nonzero integer k, and the removable singularity
    at |t_bar| = 1/(2 beta) evaluates to (pi/4) sinc(1/(2 beta)).
    """
    t = _as_array(t_bar)
    if beta == 0.0:
        return np.sinc(t)
    out = np.empty_like(t)
    t0 = 1.0 / (2.0 * beta)

    near_t0 = np.abs(np.abs(t) - t0) < _SINGULARITY_WINDOW
    regular = ~near_t0

    tr = t[regular]
    out[regular] = np.sinc(tr) * np.cos(np.pi * beta * tr) / (1.0 - (2.0 * beta * tr) ** 2)

    if np.any(near_t0):
        limit = (np.pi / 4.0) * np.sinc(t0)
        slope = _limit_slope(lambda x: rc(x, beta), t0)
        tt = t[near_t0]
        out[near_t0] = limit + np.sign(tt) * slope * (np.abs(tt) - t0)

    # Snap exact integer offsets to their exact Nyquist values so on-grid
    # delays yield genuinely single-tap support.
    rounded = np.round(t)
    exact_int = t == rounded
    if np.any(exact_int):
        out[exact_int] = np.where(rounded[exact_int] == 0.0, 1.0, 0.0)
    return out if out.ndim else float(out)


def _limit_slope(f, t0: float, h: float = 1e-4) -> float:
    """One-sided stable slope estimate just off a removable singularity."""
    return float((f(t0 + h) - f(t0 - h)) / (2.0 * h))


def rc_slope(t_bar, beta: float):
    """d/dt of the raised cosine; odd function, zero at the peak.

    The removable singularity at |t_bar| = 1/(2 beta) has a finite limit
    obtained from the second-order expansion of numerator and denominator.
    """
    t = _as_array(t_bar)
    if beta == 0.0:
        # derivative of sinc
        out = np.zeros_like(t)
        nz = np.abs(t) >= _SINGULARITY_WINDOW
        tn = t[nz]
        out[nz] = (np.cos(np.pi * tn) - np.sinc(tn)) / tn
        return out if out.ndim else float(out)

    out = np.zeros_like(t)
    t0 = 1.0 / (2.0 * beta)
    near_zero = np.abs(t) < _SINGULARITY_WINDOW
    near_t0 = np.abs(np.abs(t) - t0) < _SINGULARITY_WINDOW
    regular = ~(near_zero | near_t0)

    tr = t[regular]
    den = 1.0 - (2.0 * beta * tr) ** 2
    s = np.sinc(tr)
    ds = (np.cos(np.pi * tr) - s) / tr
    cosb = np.cos(np.pi * beta * tr)
    sinb = np.sin(np.pi * beta * tr)
    out[regular] = (ds * cosb - np.pi * beta * s * sinb) / den \
        + s * cosb * (8.0 * beta ** 2 * tr) / den ** 2

    if np.any(near_t0):
        # L'Hopital applied twice at the double zero of numerator/denominator.
        s0 = np.sinc(t0)
        ds0 = (np.cos(np.pi * t0) - s0) / t0
        limit = (np.pi / 4.0) * (ds0 - beta * s0)
        tt = t[near_t0]
        out[near_t0] = np.sign(tt) * limit
    return out if out.ndim else float(out)


def rc_derivative_wrt_lp(d, floor_lp, l_p, Q: int, beta: float):
    """Sensitivity of the Nyquist tap rc(d + floor(l_p) - l_p - Q) to l_p.

    At exactly |offset| = 1/(2 beta) this returns 0, matching the published
    closed form; elsewhere it equals minus the raised-cosine slope.
    """
    l_bar = _as_array(d) + _as_array(floor_lp) - _as_array(l_p) - Q
    out = -rc_slope(l_bar, beta)
    if beta > 0:
        exact_branch = np.abs(np.abs(l_bar) * (2.0 * beta) - 1.0) < 1e-12
        out = np.where(exact_branch, 0.0, out)
    return out if np.ndim(out) else float(out)


def dirichlet(x, N: int):
    """Periodic Dirichlet kernel: the normalized N-term geometric phase sum.

    Equals (1/N) sum_{n'=0}^{N-1} exp(j 2 pi x n' / N); returns exactly 1 at
    x = 0 mod N and 0 at other integers.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    x = _as_array(x)
    if N == 1:
        return np.ones(x.shape, dtype=np.complex128) if x.ndim else 1.0 + 0.0j
    y = np.mod(x, N)
    near_mult = np.minimum(y, N - y) < 1e-9
    out = np.empty(x.shape, dtype=np.complex128)

    xr = x[~near_mult]
    out[~near_mult] = (
        np.exp(1j * np.pi * xr * (N - 1) / N)
        * np.sin(np.pi * xr) / (N * np.sin(np.pi * xr / N))
    )
    if np.any(near_mult):
        # Direct summation is exact where the closed form degenerates.
        xn = np.atleast_1d(x[near_mult])
        n_idx = np.arange(N)
        out_vals = np.exp(2j * np.pi * np.outer(xn, n_idx) / N).sum(axis=1) / N
        out[near_mult] = out_vals
    return out if out.ndim else complex(out)


def dirichlet_derivative_wrt_kp(k_bar, N: int):
    """Derivative of the Dirichlet kernel with respect to its Doppler argument.

    Direct evaluation of (j 2 pi / N^2) sum n' exp(j 2 pi n' k_bar / N).
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    k = _as_array(k_bar)
    n_idx = np.arange(N, dtype=np.float64)
    phases = np.exp(2j * np.pi * np.multiply.outer(k, n_idx) / N)
    out = (2j * np.pi / N ** 2) * (phases * n_idx).sum(axis=-1)
    return out if np.ndim(k) else complex(out)


def cp_phase(m, d, n_tilde, floor_lp, M: int, N: int):
    """Phase rotation a frame-wise cyclic prefix imprints on wrapped taps.

    Taps reaching before the frame start pick up exp(-j 2 pi n_tilde / N),
    taps past the frame end the conjugate, in-frame taps are unrotated.
    """
    v = _as_array(m) - _as_array(floor_lp) - _as_array(d)
    nt = _as_array(n_tilde)
    early = np.exp(-2j * np.pi * nt / N)
    late = np.exp(2j * np.pi * nt / N)
    out = np.where(v < 0, early, np.where(v > M - 1, late, np.ones_like(early)))
    return out if np.ndim(out) else complex(out)


@dataclass(frozen=True)
class PulseBank:
    """Precomputed pulse state for one (beta, Q) pair.

    g_taps holds the 2Q+1 causal integer-offset Nyquist taps (all zero except
    the center), kept as a consistency anchor against the continuous sampler.
    Fractional-delay tap vectors and oversampled SRRC tap tables are the hot
    paths. Support beyond Q bins from the peak is truncated to hard zero.
    """

    beta: float
    Q: int
    dt: float = 1.0
    _srrc_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def g_taps(self) -> np.ndarray:
        taps = rc(np.arange(2 * self.Q + 1) - self.Q, self.beta)
        taps.setflags(write=False)
        return taps

    def srrc_sample(self, t):
        t = _as_array(t)
        vals = srrc(t, self.beta)
        return np.where(np.abs(t) > self.Q, 0.0, vals)

    def rc_sample(self, t_bar):
        t = _as_array(t_bar)
        vals = rc(t, self.beta)
        return np.where(np.abs(t) > self.Q, 0.0, vals)

    def taps_for_delay(self, l: float) -> np.ndarray:
        """Nyquist taps rc(d + floor(l) - l) for d in [-Q, Q].

        For integer l this is a unit impulse at d = 0; fractional delays
        spread energy over all 2Q+1 taps.
        """
        d = np.arange(-self.Q, self.Q + 1)
        return self.rc_sample(d + np.floor(l) - l)

    def srrc_taps(self, O: int) -> np.ndarray:
        """SRRC samples on an O-times oversampled grid spanning [-Q, Q]."""
        if O not in self._srrc_cache:
            j = np.arange(-self.Q * O, self.Q * O + 1)
            taps = self.srrc_sample(j / O)
            taps.setflags(write=False)
            self._srrc_cache[O] = taps
        return self._srrc_cache[O]
