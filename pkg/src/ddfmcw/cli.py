"""Command-line entry point: one subcommand per experiment kind.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .harness import EXPERIMENT_KINDS, ChannelProfile, ExperimentConfig, run_experiment
from .params import desk_params, make_params

_DEFAULT_SWEEPS = {
    "papr-ccdf": [-10.0, -5.0, 0.0],
    "psd": [0.0],
    "ambiguity": [0.0],
    "chirp-compression": [-0.5 + i / 1000.0 for i in range(1001)],
    "ber-vs-esn0": [8.0, 12.0, 16.0, 20.0],
    "nmse-vs-esn0": [8.0, 12.0, 16.0, 20.0],
    "nrmse-vs-esn0": [8.0, 12.0, 16.0, 20.0],
    "ber-vs-rho": [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0],
    "nrmse-vs-rho": [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0],
    "crb": [8.0, 12.0, 16.0, 20.0],
}

_DEFAULT_TRIALS = {"desk": 200, "paper": 2000}
_CCDF_TRIALS = {"desk": 10_000, "paper": 100_000}


def _default_config(kind: str, scale: str, seed: int) -> ExperimentConfig:
    if scale == "paper":
        # Full-scale profile; the CP covers the 33.36 us maximum delay
        # spread (ceil of 128.1 bins).
        params = make_params(l_max=129)
        channel = ChannelProfile.paper(params)
    else:
        params = desk_params()
        channel = ChannelProfile()
    trials = _CCDF_TRIALS[scale] if kind == "papr-ccdf" else _DEFAULT_TRIALS[scale]
    if kind in ("psd", "ambiguity", "chirp-compression"):
        trials = 200 if kind == "psd" else 1
    pilot_kinds = ("dd_srn_fmcw", "ddip")
    if kind == "psd":
        pilot_kinds = ("dd_srn_fmcw",)
    return ExperimentConfig(
        kind=kind, params=params, seed=seed, trials=trials,
        sweep=tuple(_DEFAULT_SWEEPS[kind]), pilot_kinds=pilot_kinds,
        channel=channel)


def _load_config(kind: str, args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        doc.setdefault("kind", kind)
        if doc["kind"] != kind:
            raise ValueError(f"config kind {doc['kind']!r} does not match subcommand {kind!r}")
        base = _default_config(kind, args.scale, args.seed)
        merged = json.loads(base.to_json())
        merged.update(doc)
        if "params" in doc:
            filled = json.loads(base.params.to_json())
            filled.update(doc["params"])
            merged["params"] = filled
        if "channel" in doc:
            ch = json.loads(json.dumps(merged["channel"]))
            merged["channel"] = ch
        cfg = ExperimentConfig.from_json(json.dumps(merged))
    else:
        cfg = _default_config(kind, args.scale, args.seed)
    if args.seed is not None:
        cfg = ExperimentConfig.from_json(
            json.dumps({**json.loads(cfg.to_json()), "seed": args.seed}))
    return cfg


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("DDFMCW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValueError(f"invalid DDFMCW_THREADS value {env!r}") from exc
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddfmcw",
        description="Monte Carlo and analysis experiments for the chirp-pilot "
                    "delay-Doppler ISAC toolkit")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", type=str, default=None,
                       help="JSON config; missing fields take scale defaults")
        p.add_argument("--out", type=str, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (fallback: DDFMCW_THREADS, then 1)")
        p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.kind, args)
        threads = _threads(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        files = run_experiment(cfg, args.out, threads=threads)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
