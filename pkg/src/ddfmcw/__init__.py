"""Waveform-level simulation toolkit for a chirp-pilot delay-Doppler ISAC
system: frame construction, doubly-selective channel models, super-resolution
sensing, iterative detection, and closed-form performance analysis."""

from .params import (
    DDFrame,
    PowerAllocation,
    SystemParams,
    desk_params,
    make_params,
    split_power,
)
from .pulses import PulseBank, dirichlet, rc, srrc
from .chirp import ChirpParams, ChirpSequence, build_pilot_frame, check_zca_conditions, make_chirp
from .modem import Waveform, matched_filter_sample, oddm_demodulate, oddm_modulate, synthesize_waveform
from .channel import (
    ChannelRealization,
    PathParams,
    add_noise,
    apply_channel_symbol_rate,
    atom,
    dd_response,
    sample_channel,
)
from .sensing import PathEstimate, SensingConfig, das, dd_chirp_compress, omp_grid_evolution
from .detection import (
    Constellation,
    EffectiveChannel,
    build_effective_channel,
    jcedd,
    make_constellation,
    sic_mmse_detect,
)
from .analysis import ambiguity_dd_approx, ccdf_analytic, crb, fisher, marcum_q1, papr, psd_analytic
from .harness import ChannelProfile, ExperimentConfig, nmse_vs_virtual_ddip, nrmse, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ChannelProfile", "ChannelRealization", "ChirpParams", "ChirpSequence",
    "Constellation", "DDFrame", "EffectiveChannel", "ExperimentConfig",
    "PathEstimate", "PathParams", "PowerAllocation", "PulseBank",
    "SensingConfig", "SystemParams", "Waveform",
    "add_noise", "ambiguity_dd_approx", "apply_channel_symbol_rate", "atom",
    "build_effective_channel", "build_pilot_frame", "ccdf_analytic",
    "check_zca_conditions", "crb", "das", "dd_chirp_compress", "dd_response",
    "desk_params", "dirichlet", "fisher", "jcedd", "make_chirp",
    "make_constellation", "make_params", "marcum_q1",
    "matched_filter_sample", "nmse_vs_virtual_ddip", "nrmse",
    "oddm_demodulate", "oddm_modulate", "omp_grid_evolution", "papr",
    "psd_analytic", "rc", "run_experiment", "sample_channel",
    "sic_mmse_detect", "split_power", "srrc", "synthesize_waveform",
]
