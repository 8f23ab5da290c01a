"""Experiment orchestration: declarative configs, seeded parallel Monte
Carlo, metric aggregation, and CSV emission.

Reproducibility contract: every trial derives its own counter-based RNG
stream from (master seed, experiment kind, role, indices), so results are
byte-identical for any worker count. Channel draws are keyed by trial only,
giving every sweep point the same seeded channel set; noise and data draws
are keyed by (point, trial).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    ccdf_analytic,
    crb,
    empirical_ccdf,
    ideal_chirp_delay_ambiguity,
    linear_fmcw_psd,
    papr,
    pilot_ambiguity_surface,
    practical_chirp_delay_ambiguity,
    psd_analytic,
)
from .channel import ChannelRealization, add_noise, dd_response, sample_channel
from .chirp import build_pilot_frame, pilot_impulse_bin, pilot_reference_sequence
from .detection import build_effective_channel, jcedd, make_constellation, sic_mmse_detect
from .modem import modulate_to_waveform
from .params import DDFrame, SystemParams, db_to_linear, split_power
from .pulses import PulseBank
from .sensing import SensingConfig, das, estimates_to_channel, omp_grid_evolution

EXPERIMENT_KINDS = (
    "papr-ccdf", "psd", "ambiguity", "chirp-compression",
    "ber-vs-esn0", "nmse-vs-esn0", "nrmse-vs-esn0",
    "ber-vs-rho", "nrmse-vs-rho", "crb",
)

CSV_HEADER = ["x", "metric", "mean", "stderr", "trials", "params_hash"]


@dataclass(frozen=True)
class ChannelProfile:
    P: int = 2
    l_max_chan: float = 8.0
    k_max: float = 2.0
    min_gain2: float = 0.05
    min_sep: float = 1.0
    sigma_from: str = "es"  # "es": sigma = Es*10^(-x/10); "total": total power

    @staticmethod
    def paper(params: SystemParams) -> "ChannelProfile":
        return ChannelProfile(P=4,
                              l_max_chan=33.36e-6 * params.M / params.T,
                              k_max=5003.46 * params.N * params.T,
                              min_gain2=0.0, min_sep=1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: SystemParams
    seed: int = 0
    trials: int = 200
    sweep: tuple = ()
    pilot_kinds: tuple = ("dd_srn_fmcw",)
    receivers: tuple = ()            # ber experiments; default set per kind
    rho_db: float = -8.0             # CDPR for fixed-rho experiments
    total_snr_db: float = 16.0       # for the fixed-total-power sweeps
    channel: ChannelProfile = field(default_factory=ChannelProfile)
    constellation: str = "qam4"
    P_max: int = 4
    L: int = 10
    I_DAS: int = 4
    I_DET: int = 8
    I_JCEDD: int = 8

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(self.sweep) == 0:
            raise ValueError("sweep must be non-empty")
        for pk in self.pilot_kinds:
            if pk not in ("dd_srn_fmcw", "ddip"):
                raise ValueError(f"unknown pilot kind {pk!r}")

    def to_json(self) -> str:
        doc = dataclasses.asdict(self)
        doc["params"] = json.loads(self.params.to_json())
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        doc["params"] = SystemParams.from_json(json.dumps(doc["params"]))
        doc["channel"] = ChannelProfile(**doc["channel"])
        doc["sweep"] = tuple(doc["sweep"])
        doc["pilot_kinds"] = tuple(doc["pilot_kinds"])
        doc["receivers"] = tuple(doc.get("receivers", ()))
        return ExperimentConfig(**doc)


@dataclass(frozen=True)
class CurvePoint:
    x: float
    metric: str
    mean: float
    stderr: float
    trials: int
    params_hash: str


def rng_stream(seed: int, *keys) -> np.random.Generator:
    """Counter-based generator derived from the master seed and a key tuple."""
    digest = hashlib.sha256(repr((seed,) + keys).encode()).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest[:16], "little")))


# ---------------------------------------------------------------------------
# Metrics


def nmse_vs_virtual_ddip(estimates, true_chan: ChannelRealization,
                         params: SystemParams, pulses: PulseBank) -> float:
    """Channel-estimate quality as the normalized error between the noiseless
    responses a unit-energy impulse pilot would see under the true and the
    estimated channels."""
    grid = np.zeros((params.M, params.N), dtype=np.complex128)
    grid[pilot_impulse_bin(params), 0] = 1.0
    probe = DDFrame(grid=grid, role="pilot")
    ref = dd_response(probe, true_chan, params, pulses)
    est = dd_response(probe, estimates_to_channel(estimates), params, pulses)
    denom = ref.energy()
    if denom == 0:
        raise ValueError("true channel produced a zero response")
    return float(np.sum(np.abs(np.asarray(est.grid) - ref.grid) ** 2) / denom)


def nrmse(estimates, truths, axis: str, l_span: float, k_span: float) -> float:
    """RMS of greedily matched per-path errors on one axis, normalized by the
    axis span; unmatched true paths count at the full span.

    Association picks globally nearest (estimate, truth) pairs in the
    span-normalized (delay, Doppler) plane, so it is invariant to input
    ordering.
    """
    if axis not in ("delay", "doppler"):
        raise ValueError(f"axis must be 'delay' or 'doppler', got {axis!r}")
    normalizer = l_span if axis == "delay" else k_span
    if normalizer <= 0:
        raise ValueError("normalizer span must be positive")
    if not truths:
        raise ValueError("ground-truth path list is empty")
    pairs = []
    for i, e in enumerate(estimates):
        for j, t in enumerate(truths):
            d = np.hypot((e.l_hat - t.l) / l_span, (e.k_hat - t.k) / k_span)
            pairs.append((d, i, j))
    pairs.sort()
    used_e: set = set()
    used_t: set = set()
    errors = []
    for d, i, j in pairs:
        if i in used_e or j in used_t:
            continue
        used_e.add(i)
        used_t.add(j)
        t, e = truths[j], estimates[i]
        err = (e.l_hat - t.l) if axis == "delay" else (e.k_hat - t.k)
        errors.append(err / normalizer)
    errors.extend([1.0] * (len(truths) - len(used_t)))
    return float(np.sqrt(np.mean(np.square(errors))))


# ---------------------------------------------------------------------------
# Shared per-trial context


class _Context:
    """Heavy shared state rebuilt once per worker process per config."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.params = cfg.params
        self.pulses = PulseBank(beta=cfg.params.beta, Q=cfg.params.Q)
        self.A = make_constellation(cfg.constellation)
        self.sensing = SensingConfig(P_max=cfg.P_max, L=cfg.L, I_DAS=cfg.I_DAS)
        self.pilots = {}
        self.refs = {kind: pilot_reference_sequence(cfg.params, kind)
                     for kind in ("dd_srn_fmcw", "ddip")}

    def pilot(self, kind: str, E_c: float) -> DDFrame:
        key = (kind, round(E_c, 15))
        if key not in self.pilots:
            self.pilots[key] = build_pilot_frame(self.params, kind, E_c)
        return self.pilots[key]

    def draw_channel(self, trial: int) -> ChannelRealization:
        ch = self.cfg.channel
        rng = rng_stream(self.cfg.seed, self.cfg.kind, "chan", trial)
        return sample_channel(rng, ch.P, ch.l_max_chan, ch.k_max,
                              min_gain2=ch.min_gain2, min_sep=ch.min_sep)

    def data_frame(self, rng, E_sym: float, skip_pilot_col: bool = True):
        bits = rng.integers(0, 2, (self.params.M, self.params.N, self.A.bits_per_symbol))
        syms = self.A.map_bits(bits) * np.sqrt(E_sym)
        if skip_pilot_col:
            syms[:, 0] = 0.0
            bits = bits[:, 1:]
        return bits, syms

    def powers(self, rho_db: float):
        """Pilot/data powers for unit-mean-energy data symbols at the grid."""
        E_sym = 1.0
        E_s = E_sym * (self.params.N - 1) / self.params.N
        E_c = db_to_linear(rho_db) * E_s
        return E_c, E_s, E_sym


_CONTEXT_CACHE: dict = {}


def _context_for(cfg_json: str) -> _Context:
    ctx = _CONTEXT_CACHE.get(cfg_json)
    if ctx is None:
        ctx = _Context(ExperimentConfig.from_json(cfg_json))
        _CONTEXT_CACHE[cfg_json] = ctx
    return ctx


def _worker(task):
    cfg_json, fn_name, point_idx, trial = task
    ctx = _context_for(cfg_json)
    return _TRIAL_FNS[fn_name](ctx, point_idx, trial)


def _run_trials(cfg: ExperimentConfig, fn_name: str, point_idx: int,
                n_trials: int, threads: int):
    tasks = [(cfg.to_json(), fn_name, point_idx, t) for t in range(n_trials)]
    if threads <= 1:
        return [_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_worker, tasks, chunksize=max(1, n_trials // (4 * threads))))


# ---------------------------------------------------------------------------
# Trial functions (top level, importable by worker processes)


def _trial_papr(ctx: _Context, point_idx: int, trial: int):
    cfg = ctx.cfg
    rho_db = cfg.sweep[point_idx]
    E_c, E_s, E_sym = ctx.powers(rho_db)
    rng = rng_stream(cfg.seed, cfg.kind, "trial", point_idx, trial)
    _, syms = ctx.data_frame(rng, E_sym)
    out = []
    for kind in cfg.pilot_kinds:
        pilot_grid = np.asarray(ctx.pilot(kind, E_c).grid)
        w = modulate_to_waveform(DDFrame(pilot_grid + syms), ctx.params, ctx.pulses,
                                 with_cp=False)
        out.append(papr(w))
    # pure-data baseline, all MN cells carrying unit-energy symbols
    rng2 = rng_stream(cfg.seed, cfg.kind, "data_only", point_idx, trial)
    _, syms_full = ctx.data_frame(rng2, 1.0, skip_pilot_col=False)
    w = modulate_to_waveform(DDFrame(syms_full), ctx.params, ctx.pulses, with_cp=False)
    out.append(papr(w))
    return out


def _frame_through_channel(ctx: _Context, pilot_kind: str, rho_db: float,
                           chan: ChannelRealization, sigma_z2: float, rng):
    E_c, E_s, E_sym = ctx.powers(rho_db)
    pilot = ctx.pilot(pilot_kind, E_c)
    bits, syms = ctx.data_frame(rng, E_sym)
    X = DDFrame(np.asarray(pilot.grid) + syms)
    Y = dd_response(X, chan, ctx.params, ctx.pulses)
    Y = add_noise(Y, sigma_z2, rng)
    return bits, syms, pilot, Y


def _sigma_for(ctx: _Context, rho_db: float, snr_db: float) -> float:
    E_c, E_s, E_sym = ctx.powers(rho_db)
    if ctx.cfg.channel.sigma_from == "total":
        return (E_c + E_s) * db_to_linear(-snr_db)
    return E_sym * db_to_linear(-snr_db)


def _trial_ber(ctx: _Context, point_idx: int, trial: int):
    """Bit errors and counts for each configured receiver at one sweep point."""
    cfg = ctx.cfg
    if cfg.kind == "ber-vs-rho":
        rho_db = cfg.sweep[point_idx]
        snr_db = cfg.total_snr_db
        # fixed total power: sigma relative to E_c + E_s
        E_c, E_s, E_sym = ctx.powers(rho_db)
        sigma = (E_c + E_s) * db_to_linear(-snr_db)
    else:
        rho_db = cfg.rho_db
        snr_db = cfg.sweep[point_idx]
        sigma = _sigma_for(ctx, rho_db, snr_db)
    chan = ctx.draw_channel(trial)
    receivers = cfg.receivers or ("perfect_csi", "jcedd:dd_srn_fmcw", "jcedd:ddip")
    out = []
    for recv in receivers:
        rng = rng_stream(cfg.seed, cfg.kind, "trial", point_idx, trial, recv)
        if recv == "perfect_csi":
            # pure data frame, every cell used, known channel
            bits, syms = ctx.data_frame(rng, 1.0, skip_pilot_col=False)
            Y = add_noise(dd_response(DDFrame(syms), chan, ctx.params, ctx.pulses),
                          sigma, rng)
            eff = build_effective_channel(chan, ctx.params, ctx.pulses)
            det = sic_mmse_detect(Y, eff, sigma, ctx.A, I_DET=cfg.I_DET)
            errs = int(np.sum(ctx.A.hard_bits(det.hard.grid) != bits))
            total = bits.size
        else:
            pilot_kind = recv.split(":", 1)[1]
            bits, syms, pilot, Y = _frame_through_channel(
                ctx, pilot_kind, rho_db, chan, sigma, rng)
            E_sym = 1.0
            det = jcedd(Y, pilot, sigma, ctx.A.scaled(E_sym), ctx.sensing,
                        ctx.params, ctx.pulses, ctx.refs[pilot_kind],
                        I_JCEDD=cfg.I_JCEDD)
            got = ctx.A.hard_bits(det.hard.grid[:, 1:])
            errs = int(np.sum(got != bits))
            total = bits.size
        out.append((errs, total))
    return out


def _trial_nmse(ctx: _Context, point_idx: int, trial: int):
    """Channel-estimation NMSE per estimator kind at one Es/N0 point."""
    cfg = ctx.cfg
    snr_db = cfg.sweep[point_idx]
    chan = ctx.draw_channel(trial)
    sigma = _sigma_for(ctx, cfg.rho_db, snr_db)
    out = []
    for kind in cfg.pilot_kinds:
        # Superimposed frame through JCEDD's estimator
        rng = rng_stream(cfg.seed, cfg.kind, "trial", point_idx, trial, "jcedd", kind)
        bits, syms, pilot, Y = _frame_through_channel(ctx, kind, cfg.rho_db, chan,
                                                      sigma, rng)
        det = jcedd(Y, pilot, sigma, ctx.A, ctx.sensing, ctx.params, ctx.pulses,
                    ctx.refs[kind], I_JCEDD=cfg.I_JCEDD)
        out.append(nmse_vs_virtual_ddip(det.estimates, chan, ctx.params, ctx.pulses))
        # Pure pilot (no data) through the plain pursuit
        rng = rng_stream(cfg.seed, cfg.kind, "trial", point_idx, trial, "pure", kind)
        E_c, _, _ = ctx.powers(cfg.rho_db)
        pilot = ctx.pilot(kind, E_c)
        Yp = add_noise(dd_response(pilot, chan, ctx.params, ctx.pulses), sigma, rng)
        res = omp_grid_evolution(Yp, pilot, ctx.sensing, ctx.params, ctx.pulses,
                                 ctx.refs[kind])
        out.append(nmse_vs_virtual_ddip(res.estimates, chan, ctx.params, ctx.pulses))
    return out


def _trial_nrmse(ctx: _Context, point_idx: int, trial: int):
    """Data-aided sensing NRMSE (delay, Doppler) per pilot kind, plus the
    matching-bound values from the Fisher information of the known frame."""
    cfg = ctx.cfg
    if cfg.kind == "nrmse-vs-rho":
        rho_db = cfg.sweep[point_idx]
        E_c, E_s, _ = ctx.powers(rho_db)
        sigma = (E_c + E_s) * db_to_linear(-cfg.total_snr_db)
    else:
        rho_db = cfg.rho_db
        sigma = _sigma_for(ctx, rho_db, cfg.sweep[point_idx])
    chan = ctx.draw_channel(trial)
    ch = cfg.channel
    out = []
    for kind in cfg.pilot_kinds:
        rng = rng_stream(cfg.seed, cfg.kind, "trial", point_idx, trial, kind)
        bits, syms, pilot, Y = _frame_through_channel(ctx, kind, rho_db, chan, sigma, rng)
        X_d = DDFrame(grid=syms, role="data")
        res = das(Y, pilot, X_d, ctx.sensing, ctx.params, ctx.pulses, ctx.refs[kind])
        out.append(nrmse(res.estimates, chan.paths, "delay", ch.l_max_chan, 2 * ch.k_max))
        out.append(nrmse(res.estimates, chan.paths, "doppler", ch.l_max_chan, 2 * ch.k_max))
        X_full = DDFrame(np.asarray(pilot.grid) + syms)
        bounds = crb(chan, X_full, sigma, ctx.params, ctx.pulses)
        out.append(float(np.sqrt(np.mean(bounds.delay_bounds()))) / ch.l_max_chan)
        out.append(float(np.sqrt(np.mean(bounds.doppler_bounds()))) / (2 * ch.k_max))
    return out


def _trial_crb(ctx: _Context, point_idx: int, trial: int):
    cfg = ctx.cfg
    snr_db = cfg.sweep[point_idx]
    sigma = _sigma_for(ctx, cfg.rho_db, snr_db)
    chan = ctx.draw_channel(trial)
    ch = cfg.channel
    out = []
    for kind in cfg.pilot_kinds:
        E_c, _, _ = ctx.powers(cfg.rho_db)
        pilot = ctx.pilot(kind, E_c)
        bounds = crb(chan, pilot, sigma, ctx.params, ctx.pulses)
        out.append(float(np.sqrt(np.mean(bounds.delay_bounds()))) / ch.l_max_chan)
        out.append(float(np.sqrt(np.mean(bounds.doppler_bounds()))) / (2 * ch.k_max))
    return out


_TRIAL_FNS = {
    "papr": _trial_papr,
    "ber": _trial_ber,
    "nmse": _trial_nmse,
    "nrmse": _trial_nrmse,
    "crb": _trial_crb,
}


# ---------------------------------------------------------------------------
# CSV / manifest plumbing


def _fmt(x) -> str:
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def write_csv(path: str, rows, header=CSV_HEADER) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _points_to_rows(points):
    return [(p.x, p.metric, p.mean, p.stderr, p.trials, p.params_hash) for p in points]


def _mean_stderr(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, stderr


# ---------------------------------------------------------------------------
# Experiment implementations


def _run_papr_ccdf(cfg: ExperimentConfig, out_dir: str, threads: int):
    ctx = _Context(cfg)
    h = cfg.params.hash()
    gamma_db = np.linspace(2.0, 24.0, 221)
    points = []
    labels = [f"oddm_fmcw" if k == "dd_srn_fmcw" else "oddm_ddip" for k in cfg.pilot_kinds]
    for pi, rho_db in enumerate(cfg.sweep):
        results = _run_trials(cfg, "papr", pi, cfg.trials, threads)
        arr = np.asarray(results)  # (trials, len(pilot_kinds)+1)
        for col, label in enumerate(labels + ["oddm_data_only"]):
            tail = empirical_ccdf(arr[:, col], gamma_db)
            se = np.sqrt(np.maximum(tail * (1 - tail), 0) / arr.shape[0])
            metric = f"ccdf_empirical:{label}:rho_db={rho_db:g}"
            points.extend(CurvePoint(float(g), metric, float(t), float(s),
                                     cfg.trials, h)
                          for g, t, s in zip(gamma_db, tail, se))
        rho = db_to_linear(rho_db)
        ana = ccdf_analytic(rho, cfg.params.mn, 10 ** (gamma_db / 10.0))
        metric = f"ccdf_analytic:oddm_fmcw:rho_db={rho_db:g}"
        points.extend(CurvePoint(float(g), metric, float(t), 0.0, cfg.trials, h)
                      for g, t in zip(gamma_db, ana))
    # deterministic pilot-only PAPR markers
    for kind, label in (("dd_srn_fmcw", "pilot_only_fmcw"), ("ddip", "pilot_only_ddip")):
        w = modulate_to_waveform(ctx.pilot(kind, 1.0), cfg.params, ctx.pulses,
                                 with_cp=False)
        points.append(CurvePoint(0.0, f"papr_db:{label}", papr(w), 0.0, 1, h))
    path = os.path.join(out_dir, "papr_ccdf.csv")
    write_csv(path, _points_to_rows(points))
    return [path]


def _run_psd(cfg: ExperimentConfig, out_dir: str, threads: int):
    ctx = _Context(cfg)
    params = cfg.params
    h = params.hash()
    rho_db = cfg.rho_db
    E_c, E_s, E_sym = ctx.powers(rho_db)
    alloc = split_power(db_to_linear(rho_db), E_c + E_s)
    # simulated periodogram
    rng0 = rng_stream(cfg.seed, cfg.kind, "psd")
    acc = None
    for _ in range(cfg.trials):
        _, syms = ctx.data_frame(rng0, E_sym)
        grid = np.asarray(ctx.pilot("dd_srn_fmcw", E_c).grid) + syms
        w = modulate_to_waveform(DDFrame(grid), params, ctx.pulses)
        body = w.body()
        dt = 1.0 / w.rate
        P = np.abs(np.fft.fft(body) * dt) ** 2 / params.frame_duration
        acc = P if acc is None else acc + P
    acc /= cfg.trials
    freqs = np.fft.fftfreq(body.size, d=dt)
    order = np.argsort(freqs)
    freqs, acc = freqs[order], acc[order]
    ana = psd_analytic(freqs, params, alloc)
    lin = linear_fmcw_psd(freqs, params, total_power=alloc.E_c)
    points = []
    for metric, values in (
        ("psd_analytic_pilot", ana["pilot"]),
        ("psd_analytic_data", ana["data"]),
        ("psd_analytic_total", ana["total"]),
        ("psd_simulated_total", acc),
        ("psd_linear_fmcw", lin),
    ):
        trials = cfg.trials if metric == "psd_simulated_total" else 1
        points.extend(CurvePoint(float(f), metric, float(v), 0.0, trials, h)
                      for f, v in zip(freqs, values))
    path = os.path.join(out_dir, "psd.csv")
    write_csv(path, _points_to_rows(points))
    return [path]


def _run_ambiguity(cfg: ExperimentConfig, out_dir: str, threads: int):
    ctx = _Context(cfg)
    params = cfg.params
    h = params.hash()
    paths = []
    kinds = list(cfg.pilot_kinds) + ["linear_fmcw"]
    for kind in kinds:
        tau, nu, A = pilot_ambiguity_surface(params, ctx.pulses, kind)
        i0, j0 = np.argmin(np.abs(tau)), np.argmin(np.abs(nu))
        mag_db = 20 * np.log10(np.maximum(np.abs(A) / np.abs(A[i0, j0]), 1e-12))
        path = os.path.join(out_dir, f"ambiguity_{kind}.csv")
        with open(path, "w") as fh:
            fh.write("tau_bins,nu_bins,mag_db,params_hash\n")
            for i, t in enumerate(tau):
                for j, v in enumerate(nu):
                    fh.write(f"{_fmt(float(t))},{_fmt(float(v))},{_fmt(float(mag_db[i, j]))},{h}\n")
        paths.append(path)
    return paths


def _run_chirp_compression(cfg: ExperimentConfig, out_dir: str, threads: int):
    ctx = _Context(cfg)
    params = cfg.params
    h = params.hash()
    from .analysis import synthesize_symbol_train, ambiguity_numeric
    from .chirp import make_chirp
    M = params.M
    T, eps = 1.0, float(M)  # unit block duration, chirp rate M/T^2
    tau = np.asarray(cfg.sweep, dtype=float)  # lags in units of T
    points = []
    ideal = np.abs(ideal_chirp_delay_ambiguity(tau, T, eps)) / T
    prac = np.abs(practical_chirp_delay_ambiguity(tau, T, eps)) / T
    # numeric autocorrelation of the pulse-shaped discrete chirp
    O = params.O
    base = make_chirp(M).values
    sig = synthesize_symbol_train(base, ctx.pulses, O, 0, M)
    dt = 1.0 / (O * M)  # in units of T
    shifts = np.round(tau / dt).astype(int)
    t_axis = np.arange(sig.size) * dt
    filt = np.abs(ambiguity_numeric(sig, sig, dt, shifts, np.array([0.0]), t_axis))[:, 0]
    filt = filt * (M / filt.max()) / M  # normalize peak to 1
    for metric, vals in (("chirp_ambiguity:ideal", ideal),
                         ("chirp_ambiguity:windowed", prac),
                         ("chirp_ambiguity:srn_filtered", filt)):
        points.extend(CurvePoint(float(t), metric, float(v), 0.0, 1, h)
                      for t, v in zip(tau, vals))
    path = os.path.join(out_dir, "chirp_compression.csv")
    write_csv(path, _points_to_rows(points))
    return [path]


def _run_ber_like(cfg: ExperimentConfig, out_dir: str, threads: int, fname: str):
    h = cfg.params.hash()
    receivers = cfg.receivers or ("perfect_csi", "jcedd:dd_srn_fmcw", "jcedd:ddip")
    points = []
    for pi, x in enumerate(cfg.sweep):
        results = _run_trials(cfg, "ber", pi, cfg.trials, threads)
        for col, recv in enumerate(receivers):
            errs = sum(r[col][0] for r in results)
            total = sum(r[col][1] for r in results)
            ber = errs / total
            se = float(np.sqrt(max(ber * (1 - ber), 0) / total))
            points.append(CurvePoint(float(x), f"ber:{recv}", ber, se, cfg.trials, h))
    path = os.path.join(out_dir, fname)
    write_csv(path, _points_to_rows(points))
    return [path]


def _run_metric_table(cfg: ExperimentConfig, out_dir: str, threads: int,
                      fn_name: str, metric_names, fname: str):
    h = cfg.params.hash()
    points = []
    for pi, x in enumerate(cfg.sweep):
        results = _run_trials(cfg, fn_name, pi, cfg.trials, threads)
        arr = np.asarray(results, dtype=float)
        for col, name in enumerate(metric_names):
            mean, se = _mean_stderr(arr[:, col])
            points.append(CurvePoint(float(x), name, mean, se, cfg.trials, h))
    path = os.path.join(out_dir, fname)
    write_csv(path, _points_to_rows(points))
    return [path]


def run_experiment(cfg: ExperimentConfig, out_dir: str, threads: int = 1):
    """Dispatch one experiment; returns the list of CSV paths written.

    Writes a run manifest capturing the resolved configuration alongside the
    data files.
    """
    os.makedirs(out_dir, exist_ok=True)
    if cfg.kind == "papr-ccdf":
        files = _run_papr_ccdf(cfg, out_dir, threads)
    elif cfg.kind == "psd":
        files = _run_psd(cfg, out_dir, threads)
    elif cfg.kind == "ambiguity":
        files = _run_ambiguity(cfg, out_dir, threads)
    elif cfg.kind == "chirp-compression":
        files = _run_chirp_compression(cfg, out_dir, threads)
    elif cfg.kind in ("ber-vs-esn0", "ber-vs-rho"):
        files = _run_ber_like(cfg, out_dir, threads, cfg.kind.replace("-", "_") + ".csv")
    elif cfg.kind == "nmse-vs-esn0":
        names = []
        for kind in cfg.pilot_kinds:
            names += [f"nmse:jcedd:{kind}", f"nmse:pure:{kind}"]
        files = _run_metric_table(cfg, out_dir, threads, "nmse", names, "nmse_vs_esn0.csv")
    elif cfg.kind in ("nrmse-vs-esn0", "nrmse-vs-rho"):
        names = []
        for kind in cfg.pilot_kinds:
            names += [f"nrmse_delay:das:{kind}", f"nrmse_doppler:das:{kind}",
                      f"crb_nrmse_delay:{kind}", f"crb_nrmse_doppler:{kind}"]
        files = _run_metric_table(cfg, out_dir, threads, "nrmse", names,
                                  cfg.kind.replace("-", "_") + ".csv")
    elif cfg.kind == "crb":
        names = []
        for kind in cfg.pilot_kinds:
            names += [f"crb_nrmse_delay:{kind}", f"crb_nrmse_doppler:{kind}"]
        files = _run_metric_table(cfg, out_dir, threads, "crb", names, "crb.csv")
    else:  # pragma: no cover - guarded by the config validator
        raise ValueError(f"unhandled kind {cfg.kind}")

    manifest = {
        "schema": 1,
        "config": json.loads(cfg.to_json()),
        "params_hash": cfg.params.hash(),
        "files": [os.path.basename(f) for f in files],
        "association_rule": "greedy nearest truth in span-normalized (l, k) distance",
        "rng": "Philox streams keyed by (seed, kind, role, point, trial)",
    }
    manifest_path = os.path.join(out_dir, f"manifest_{cfg.kind.replace('-', '_')}.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return files + [manifest_path]
