import json
import os

import numpy as np
import pytest

from ddfmcw.channel import ChannelRealization, PathParams
from ddfmcw.cli import main as cli_main
from ddfmcw.harness import (
    ChannelProfile,
    CurvePoint,
    ExperimentConfig,
    nmse_vs_virtual_ddip,
    nrmse,
    rng_stream,
    run_experiment,
)
from ddfmcw.params import make_params
from ddfmcw.pulses import PulseBank
from ddfmcw.sensing import PathEstimate


def _params(M=32, N=8):
    return make_params(M=M, N=N, T=1.0, f_c=0.0, beta=0.15, Q=20, O=8, l_max=M // 4)


def test_config_validation():
    with pytest.raises(ValueError, match="kind"):
        ExperimentConfig(kind="nope", params=_params(), sweep=(1.0,))
    with pytest.raises(ValueError, match="sweep"):
        ExperimentConfig(kind="psd", params=_params(), sweep=())
    with pytest.raises(ValueError, match="trials"):
        ExperimentConfig(kind="psd", params=_params(), sweep=(0.0,), trials=0)
    with pytest.raises(ValueError, match="pilot"):
        ExperimentConfig(kind="psd", params=_params(), sweep=(0.0,),
                         pilot_kinds=("zadoff",))


def test_config_json_round_trip():
    cfg = ExperimentConfig(kind="ber-vs-esn0", params=_params(), seed=7, trials=3,
                           sweep=(8.0, 12.0), receivers=("perfect_csi",),
                           channel=ChannelProfile(P=3, l_max_chan=5.0, k_max=1.0))
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


def test_rng_streams_independent_and_deterministic():
    a = rng_stream(1, "ber", "trial", 0, 0).standard_normal(4)
    b = rng_stream(1, "ber", "trial", 0, 0).standard_normal(4)
    c = rng_stream(1, "ber", "trial", 0, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_nrmse_exact_and_definition():
    truths = (PathParams(1.0 + 0j, 2.0, 0.5), PathParams(0.5 + 0j, 6.0, -1.0))
    ests = [PathEstimate(1.0, 2.0, 0.5), PathEstimate(0.5, 6.0, -1.0)]
    assert nrmse(ests, truths, "delay", 8.0, 4.0) == 0.0
    assert nrmse(ests, truths, "doppler", 8.0, 4.0) == 0.0
    one = [PathEstimate(1.0, 2.5, 0.5)]
    assert nrmse(one, (truths[0],), "delay", 8.0, 4.0) == pytest.approx(0.5 / 8.0)


def test_nrmse_permutation_invariant():
    rng = np.random.default_rng(0)
    truths = tuple(PathParams(1.0 + 0j, float(rng.uniform(0, 8)),
                              float(rng.uniform(-2, 2))) for _ in range(3))
    ests = [PathEstimate(1.0, t.l + 0.05, t.k - 0.02) for t in truths]
    base = nrmse(ests, truths, "delay", 8.0, 4.0)
    for perm in ([2, 0, 1], [1, 2, 0], [2, 1, 0]):
        assert nrmse([ests[i] for i in perm], truths, "delay", 8.0, 4.0) == base


def test_nrmse_unmatched_truth_counts_full_span():
    truths = (PathParams(1.0 + 0j, 2.0, 0.0), PathParams(1.0 + 0j, 6.0, 0.0))
    ests = [PathEstimate(1.0, 2.0, 0.0)]
    val = nrmse(ests, truths, "delay", 8.0, 4.0)
    assert val == pytest.approx(np.sqrt((0.0 + 1.0) / 2))


def test_nmse_vs_virtual_ddip_cases():
    params = _params()
    bank = PulseBank(beta=0.15, Q=20)
    chan = ChannelRealization(paths=(PathParams(0.8 + 0.2j, 3.0, 1.0),))
    exact = [PathEstimate(0.8 + 0.2j, 3.0, 1.0)]
    assert nmse_vs_virtual_ddip(exact, chan, params, bank) <= 1e-24
    assert nmse_vs_virtual_ddip([], chan, params, bank) == pytest.approx(1.0)
    eps = 0.05
    off = [PathEstimate(0.8 + 0.2j + eps, 3.0, 1.0)]
    expected = eps ** 2 / abs(0.8 + 0.2j) ** 2
    assert nmse_vs_virtual_ddip(off, chan, params, bank) == pytest.approx(expected, rel=1e-9)


def test_papr_experiment_writes_curvepoint_csv(tmp_path):
    cfg = ExperimentConfig(kind="papr-ccdf", params=_params(), trials=30,
                           sweep=(-5.0,), pilot_kinds=("dd_srn_fmcw", "ddip"))
    files = run_experiment(cfg, str(tmp_path), threads=1)
    csv = [f for f in files if f.endswith(".csv")][0]
    lines = open(csv).read().splitlines()
    assert lines[0] == "x,metric,mean,stderr,trials,params_hash"
    metrics = {line.split(",")[1] for line in lines[1:]}
    assert "ccdf_empirical:oddm_fmcw:rho_db=-5" in metrics
    assert "ccdf_analytic:oddm_fmcw:rho_db=-5" in metrics
    assert "ccdf_empirical:oddm_ddip:rho_db=-5" in metrics
    assert "papr_db:pilot_only_fmcw" in metrics
    manifest = [f for f in files if f.endswith(".json")][0]
    doc = json.load(open(manifest))
    assert doc["params_hash"] == cfg.params.hash()
    assert doc["config"]["trials"] == 30


def test_ber_experiment_emits_all_receiver_curves(tmp_path):
    # Default receiver set: perfect CSI plus JCEDD with both pilot kinds,
    # three curves per sweep point.
    cfg = ExperimentConfig(kind="ber-vs-esn0", params=_params(M=16, N=8), trials=2,
                           sweep=(12.0,), channel=ChannelProfile(P=1, l_max_chan=3.0,
                                                                 k_max=1.0),
                           L=4, I_DET=2, I_JCEDD=2, seed=9)
    files = run_experiment(cfg, str(tmp_path), threads=1)
    csv = [f for f in files if f.endswith(".csv")][0]
    metrics = {line.split(",")[1] for line in open(csv).read().splitlines()[1:]}
    assert metrics == {"ber:perfect_csi", "ber:jcedd:dd_srn_fmcw", "ber:jcedd:ddip"}


def test_ambiguity_experiment_writes_surfaces(tmp_path):
    params = make_params(M=16, N=8, T=1.0, f_c=0.0, beta=0.15, Q=10, O=4, l_max=4)
    cfg = ExperimentConfig(kind="ambiguity", params=params, trials=1, sweep=(0.0,),
                           pilot_kinds=("dd_srn_fmcw", "ddip"))
    files = run_experiment(cfg, str(tmp_path), threads=1)
    names = {os.path.basename(f) for f in files}
    assert {"ambiguity_dd_srn_fmcw.csv", "ambiguity_ddip.csv",
            "ambiguity_linear_fmcw.csv"} <= names
    for f in files:
        if not f.endswith(".csv"):
            continue
        lines = open(f).read().splitlines()
        assert lines[0] == "tau_bins,nu_bins,mag_db,params_hash"
        mags = np.array([float(l.split(",")[2]) for l in lines[1:]])
        assert mags.max() == pytest.approx(0.0, abs=1e-9)  # normalized peak


def test_crb_experiment_deterministic_single_trial(tmp_path):
    cfg = ExperimentConfig(kind="crb", params=_params(), trials=1, sweep=(10.0, 20.0),
                           pilot_kinds=("dd_srn_fmcw", "ddip"),
                           channel=ChannelProfile(P=1, l_max_chan=5.0, k_max=1.0))
    files = run_experiment(cfg, str(tmp_path), threads=1)
    csv = [f for f in files if f.endswith(".csv")][0]
    rows = [l.split(",") for l in open(csv).read().splitlines()[1:]]
    assert len(rows) == 2 * 4  # 2 sweep points x 2 kinds x 2 axes
    assert all(r[3] == "0" for r in rows)  # single trial: no spread


def test_reproducibility_across_worker_counts(tmp_path):
    cfg = ExperimentConfig(kind="nrmse-vs-esn0", params=_params(), trials=3,
                           sweep=(14.0,), pilot_kinds=("dd_srn_fmcw",),
                           channel=ChannelProfile(P=1, l_max_chan=5.0, k_max=1.0),
                           L=6, I_DAS=2, seed=11)
    f1 = run_experiment(cfg, str(tmp_path / "a"), threads=1)
    f2 = run_experiment(cfg, str(tmp_path / "b"), threads=2)
    body1 = open([f for f in f1 if f.endswith(".csv")][0]).read()
    body2 = open([f for f in f2 if f.endswith(".csv")][0]).read()
    assert body1 == body2


def test_channel_set_shared_across_sweep_points(tmp_path):
    # The channel stream is keyed by trial only: both sweep points see the
    # same seeded channel set, making monotone-trend comparisons paired.
    from ddfmcw.harness import _Context
    cfg = ExperimentConfig(kind="ber-vs-esn0", params=_params(), trials=2,
                           sweep=(8.0, 20.0))
    ctx = _Context(cfg)
    assert ctx.draw_channel(0) == ctx.draw_channel(0)
    c0 = ctx.draw_channel(0)
    c1 = ctx.draw_channel(1)
    assert c0 != c1


def test_cli_runs_and_exit_codes(tmp_path):
    params_doc = json.loads(_params().to_json())
    config = {
        "trials": 5,
        "sweep": [-5.0],
        "params": params_doc,
        "pilot_kinds": ["dd_srn_fmcw"],
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    out_dir = tmp_path / "out"
    rc = cli_main(["papr-ccdf", "--config", str(cfg_path), "--out", str(out_dir),
                   "--seed", "1"])
    assert rc == 0
    assert (out_dir / "papr_ccdf.csv").exists()
    assert (out_dir / "manifest_papr_ccdf.json").exists()

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli_main(["papr-ccdf", "--config", str(bad), "--out", str(out_dir)]) == 2

    wrong_kind = tmp_path / "wrong.json"
    wrong_kind.write_text(json.dumps({"kind": "psd"}))
    assert cli_main(["papr-ccdf", "--config", str(wrong_kind), "--out", str(out_dir)]) == 2


def test_cli_threads_env(monkeypatch, tmp_path):
    from ddfmcw.cli import _threads
    import argparse
    ns = argparse.Namespace(threads=None)
    monkeypatch.setenv("DDFMCW_THREADS", "3")
    assert _threads(ns) == 3
    monkeypatch.setenv("DDFMCW_THREADS", "junk")
    with pytest.raises(ValueError):
        _threads(ns)
    ns = argparse.Namespace(threads=5)
    assert _threads(ns) == 5


def test_stderr_shrinks_with_trials(tmp_path):
    # Standard errors follow 1/sqrt(trials) on a fluctuating metric.
    cfg16 = ExperimentConfig(kind="nmse-vs-esn0", params=_params(), trials=16,
                             sweep=(10.0,), pilot_kinds=("dd_srn_fmcw",),
                             channel=ChannelProfile(P=1, l_max_chan=5.0, k_max=1.0),
                             L=4, I_JCEDD=2, seed=2)
    cfg64 = ExperimentConfig(**{**json.loads(cfg16.to_json()),
                                "params": cfg16.params,
                                "channel": cfg16.channel,
                                "trials": 64})
    files16 = run_experiment(cfg16, str(tmp_path / "s16"), threads=1)
    files64 = run_experiment(cfg64, str(tmp_path / "s64"), threads=1)

    def stderr_of(files, metric):
        csv = [f for f in files if f.endswith(".csv")][0]
        for line in open(csv).read().splitlines()[1:]:
            parts = line.split(",")
            if parts[1] == metric:
                return float(parts[3])
        raise AssertionError("metric missing")

    s16 = stderr_of(files16, "nmse:pure:dd_srn_fmcw")
    s64 = stderr_of(files64, "nmse:pure:dd_srn_fmcw")
    assert s64 == pytest.approx(s16 / 2.0, rel=0.7)
