"""DD-domain transmitter and receiver: grid <-> delay-time <-> time-sample
transforms, cyclic-prefix handling, and oversampled waveform synthesis.

Time is measured in delay bins (one bin = T/M seconds). A DD frame X maps to
time samples s = vec(X F_N^H) with the unitary DFT; the continuous waveform
superimposes SRRC pulses at unit spacing. Matched filtering correlates with
the same SRRC and samples at integer bins, so in the identity channel the
round trip is the identity up to pulse truncation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .params import DDFrame, SystemParams, frame_from_vec
from .pulses import PulseBank


def oddm_modulate(X: DDFrame, params: SystemParams) -> np.ndarray:
    """DD grid to symbol-rate time samples: s = vec(X F_N^H), length MN."""
    X.check_dims(params)
    x_dt = np.fft.ifft(X.grid, axis=1, norm="ortho")
    return x_dt.ravel(order="F")


def oddm_demodulate(r: np.ndarray, params: SystemParams, role: str = "received") -> DDFrame:
    """Symbol-rate samples back to the DD grid: Y = vec^-1(r) F_N."""
    r = np.asarray(r, dtype=np.complex128)
    if r.size != params.mn:
        raise ValueError(f"expected {params.mn} samples, got {r.size}")
    y_dt = r.reshape((params.M, params.N), order="F")
    return DDFrame(grid=np.fft.fft(y_dt, axis=1, norm="ortho"), role=role)


@dataclass(frozen=True)
class Waveform:
    """Oversampled baseband waveform.

    samples[i] is the signal at u = (i - body_start) / O bins; body_start
    marks u = 0 (frame start after the CP). rate is in Hz.
    """

    samples: np.ndarray
    O: int
    rate: float
    start_offset: float  # seconds, relative to the frame start
    body_start: int
    body_len: int

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.samples, dtype=np.complex128))
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def body(self) -> np.ndarray:
        """CP-stripped frame body, the span used for power statistics."""
        return self.samples[self.body_start:self.body_start + self.body_len]

    def mean_power(self) -> float:
        b = self.body()
        return float(np.mean(np.abs(b) ** 2))


def synthesize_waveform(s: np.ndarray, params: SystemParams, pulses: PulseBank,
                        O: int | None = None, with_cp: bool = True) -> Waveform:
    """Shape symbol-rate samples with the SRRC on an O-times oversampled grid.

    With a CP, the last l_max symbols are prepended cyclically before
    shaping. The output covers the CP, the frame body, and Q bins of pulse
    spill on each side.
    """
    O = params.O if O is None else int(O)
    if O < 2:
        raise ValueError(f"oversampling factor must be >= 2, got {O}")
    s = np.asarray(s, dtype=np.complex128)
    if s.size != params.mn:
        raise ValueError(f"expected {params.mn} symbol-rate samples, got {s.size}")
    Q = pulses.Q
    cp_len = params.l_max if with_cp else 0
    s_ext = np.concatenate([s[params.mn - cp_len:], s]) if cp_len else s

    n_out = O * (params.mn + cp_len + 2 * Q) + 1
    train = np.zeros(n_out, dtype=np.complex128)
    first_symbol = (Q) * O  # symbol q = -cp_len sits Q bins after the start
    train[first_symbol:first_symbol + O * s_ext.size:O] = s_ext
    shaped = fftconvolve(train, pulses.srrc_taps(O).astype(np.complex128), mode="same")

    body_start = (Q + cp_len) * O
    return Waveform(
        samples=shaped,
        O=O,
        rate=O * params.M / params.T,
        start_offset=-(Q + cp_len) * params.T / params.M,
        body_start=body_start,
        body_len=O * params.mn,
    )


def matched_filter_sample(w: Waveform, params: SystemParams, pulses: PulseBank) -> np.ndarray:
    """SRRC matched filter followed by symbol-rate sampling at integer bins.

    Returns the MN frame-body samples; raises if the waveform is too short
    to cover them.
    """
    needed = w.body_start + (params.mn - 1) * w.O + 1
    if w.samples.size < needed:
        raise ValueError(
            f"waveform has {w.samples.size} samples, needs at least {needed} to cover the frame")
    taps = pulses.srrc_taps(w.O).astype(np.complex128)
    # Correlation with a real symmetric pulse equals convolution with it.
    filtered = fftconvolve(w.samples, taps, mode="same") / w.O
    return filtered[w.body_start:w.body_start + params.mn * w.O:w.O]


WAVEFORM_SCHEMA_VERSION = 1


def export_waveform(w: Waveform, params: SystemParams, path_base: str) -> tuple[str, str]:
    """Write interleaved little-endian complex64 samples plus a JSON sidecar."""
    bin_path = path_base + ".cf32"
    meta_path = path_base + ".json"
    data = w.samples.astype("<c8")
    data.tofile(bin_path)
    sidecar = {
        "schema": WAVEFORM_SCHEMA_VERSION,
        "sample_rate_hz": w.rate,
        "num_samples": int(w.samples.size),
        "start_offset_seconds": w.start_offset,
        "dtype": "complex64",
        "byte_order": "little",
        "body_start_index": int(w.body_start),
        "params_hash": params.hash(),
    }
    with open(meta_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    return bin_path, meta_path


def load_waveform(path_base: str) -> tuple[np.ndarray, dict]:
    with open(path_base + ".json") as fh:
        meta = json.load(fh)
    if meta.get("schema") != WAVEFORM_SCHEMA_VERSION:
        raise ValueError(f"unsupported waveform schema: {meta.get('schema')!r}")
    samples = np.fromfile(path_base + ".cf32", dtype="<c8").astype(np.complex128)
    if samples.size != meta["num_samples"]:
        raise ValueError("sample count does not match sidecar")
    return samples, meta


def modulate_to_waveform(X: DDFrame, params: SystemParams, pulses: PulseBank,
                         O: int | None = None, with_cp: bool = True) -> Waveform:
    return synthesize_waveform(oddm_modulate(X, params), params, pulses, O=O, with_cp=with_cp)


def frame_from_time_samples(r: np.ndarray, params: SystemParams, role: str = "received") -> DDFrame:
    return oddm_demodulate(r, params, role=role)


def vec_frame(X: DDFrame) -> np.ndarray:
    return X.vec()


def unvec_frame(v: np.ndarray, params: SystemParams, role: str = "composite") -> DDFrame:
    return frame_from_vec(v, params.M, params.N, role=role)
