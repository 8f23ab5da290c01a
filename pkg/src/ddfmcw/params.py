"""System parameters, delay-Doppler frame container, and power split arithmetic.

Everything here is immutable after construction and safe to share across
parallel workers.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass

import numpy as np

PARAMS_SCHEMA_VERSION = 1

FRAME_ROLES = ("pilot", "data", "composite", "received", "ddr")


@dataclass(frozen=True)
class SystemParams:
    """Static scalars shared by every module.

    M, N are the delay / Doppler grid sizes, T the symbol-block duration in
    seconds, f_c the carrier in Hz, beta the SRRC roll-off, Q the half-span
    pulse truncation in symbol intervals, O the oversampling factor used for
    waveform synthesis, and l_max the cyclic-prefix length in delay bins.
    """

    M: int
    N: int
    T: float
    f_c: float
    beta: float
    Q: int
    O: int
    l_max: int

    @property
    def mn(self) -> int:
        return self.M * self.N

    @property
    def delay_resolution(self) -> float:
        return self.T / self.M

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / (self.N * self.T)

    @property
    def bandwidth(self) -> float:
        """Nominal bandwidth M/T in Hz."""
        return self.M / self.T

    @property
    def frame_duration(self) -> float:
        return self.N * self.T

    def to_json(self) -> str:
        doc = {
            "schema": PARAMS_SCHEMA_VERSION,
            "M": self.M,
            "N": self.N,
            "T": self.T,
            "f_c": self.f_c,
            "beta": self.beta,
            "Q": self.Q,
            "O": self.O,
            "l_max": self.l_max,
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "SystemParams":
        doc = json.loads(text)
        version = doc.get("schema")
        if version != PARAMS_SCHEMA_VERSION:
            raise ValueError(f"unsupported params schema version: {version!r}")
        return make_params(
            M=int(doc["M"]),
            N=int(doc["N"]),
            T=float(doc["T"]),
            f_c=float(doc["f_c"]),
            beta=float(doc["beta"]),
            Q=int(doc["Q"]),
            O=int(doc["O"]),
            l_max=int(doc["l_max"]),
        )

    def hash(self) -> str:
        """Short stable digest used to tag CSV outputs and sidecars."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def make_params(
    M: int = 256,
    N: int = 64,
    T: float = 66.67e-6,
    f_c: float = 5e9,
    beta: float = 0.15,
    Q: int = 20,
    O: int = 8,
    l_max: int = 128,
) -> SystemParams:
    """Validate and build a parameter set.

    M must be even: the unit-rate quadratic chirp pilot only has zero cyclic
    autocorrelation for even sequence lengths.
    """
    if M <= 0 or M % 2 != 0:
        raise ValueError(f"M must be a positive even integer (chirp pilot requirement), got {M}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    if f_c < 0:
        raise ValueError(f"f_c must be non-negative, got {f_c}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    if Q < 1:
        raise ValueError(f"Q must be an integer >= 1, got {Q}")
    if O < 2:
        raise ValueError(f"oversampling factor O must be >= 2, got {O}")
    if not 0 <= l_max < M:
        raise ValueError(f"l_max must satisfy 0 <= l_max < M, got l_max={l_max}, M={M}")
    return SystemParams(M=int(M), N=int(N), T=float(T), f_c=float(f_c),
                        beta=float(beta), Q=int(Q), O=int(O), l_max=int(l_max))


def desk_params(**overrides) -> SystemParams:
    """Reduced-scale defaults that keep a full Monte Carlo point under a minute."""
    kw = dict(M=64, N=16, T=66.67e-6, f_c=5e9, beta=0.15, Q=20, O=8, l_max=16)
    kw.update(overrides)
    return make_params(**kw)


@dataclass(frozen=True)
class DDFrame:
    """An M x N complex delay-Doppler symbol grid plus a role tag.

    Grids are stored delay-major: row index is the delay bin, column index the
    Doppler bin, and vectorization is column-stacking (Fortran order).
    """

    grid: np.ndarray
    role: str = "composite"

    def __post_init__(self):
        if self.role not in FRAME_ROLES:
            raise ValueError(f"unknown frame role {self.role!r}, expected one of {FRAME_ROLES}")
        g = np.asarray(self.grid, dtype=np.complex128)
        if g.ndim != 2:
            raise ValueError(f"grid must be 2-D, got shape {g.shape}")
        g = np.ascontiguousarray(g)
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    @property
    def M(self) -> int:
        return self.grid.shape[0]

    @property
    def N(self) -> int:
        return self.grid.shape[1]

    def energy(self) -> float:
        return float(np.sum(np.abs(self.grid) ** 2))

    def vec(self) -> np.ndarray:
        """Column-stacking vectorization, length M*N."""
        return self.grid.ravel(order="F")

    def check_dims(self, params: SystemParams) -> "DDFrame":
        if self.grid.shape != (params.M, params.N):
            raise ValueError(
                f"frame shape {self.grid.shape} does not match params ({params.M}, {params.N})")
        return self

    def to_bytes(self) -> bytes:
        """Bit-exact serialization (npz container)."""
        buf = io.BytesIO()
        np.savez(buf, grid=self.grid, role=np.array(self.role))
        return buf.getvalue()

    @staticmethod
    def from_bytes(data: bytes) -> "DDFrame":
        with np.load(io.BytesIO(data)) as archive:
            return DDFrame(grid=archive["grid"], role=str(archive["role"]))


def frame_from_vec(v: np.ndarray, M: int, N: int, role: str = "composite") -> DDFrame:
    v = np.asarray(v)
    if v.size != M * N:
        raise ValueError(f"vector length {v.size} does not match {M}x{N}")
    return DDFrame(grid=v.reshape((M, N), order="F"), role=role)


@dataclass(frozen=True)
class PowerAllocation:
    """Chirp power E_c, data power E_s (both time-averaged, linear scale)."""

    E_c: float
    E_s: float

    @property
    def rho(self) -> float:
        """Chirp-to-data power ratio."""
        return self.E_c / self.E_s

    @property
    def total(self) -> float:
        return self.E_c + self.E_s


def split_power(rho: float, total_power: float) -> PowerAllocation:
    """Split a total mean power into chirp and data shares with E_c/E_s = rho."""
    if rho <= 0:
        raise ValueError(f"rho must be positive (a pilotless frame is not representable), got {rho}")
    if total_power <= 0:
        raise ValueError(f"total_power must be positive, got {total_power}")
    E_s = total_power / (1.0 + rho)
    E_c = rho * E_s
    return PowerAllocation(E_c=E_c, E_s=E_s)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * np.log10(x)
