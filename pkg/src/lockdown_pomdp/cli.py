"""Command-line entry point: ``lockdown-pomdp {fit,optimize,band,analyze}``.

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataio, pipeline
from .pipeline import RunManifest, Settings

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3


def parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, text = pair.partition("=")
        if not sep or not key:
            raise dataio.ConfigError(f"--set expects key=value, got {pair!r}")
        try:
            out[key.strip()] = json.loads(text)
        except json.JSONDecodeError:
            out[key.strip()] = text
    return out


def _prepare(args):
    config = dataio.load_region_config(args.config)
    overrides = parse_overrides(args.set)
    config, settings = pipeline.apply_overrides(config, Settings(), overrides)
    return config, settings, overrides


def _manifest(command, args, overrides, settings, **paths) -> RunManifest:
    return RunManifest(
        command=command,
        seed=args.seed,
        out=str(args.out),
        config=str(args.config),
        overrides=dict(sorted(overrides.items())),
        settings=pipeline.asdict(settings),
        **{k: None if v is None else str(v) for k, v in paths.items()},
    )


def cmd_fit(args) -> None:
    config, settings, overrides = _prepare(args)
    data = dataio.load_case_csv(args.data)
    result, spec = pipeline.run_fit(config, data, settings, args.seed)
    pipeline.write_fit_outputs(args.out, result, spec)
    _manifest("fit", args, overrides, settings, data=args.data).write(args.out)


def cmd_optimize(args) -> None:
    config, settings, overrides = _prepare(args)
    params, spec, schedule = pipeline.load_fit_outputs(config, args.fit)
    result = pipeline.run_optimize(config, params, spec, schedule, settings, args.seed)
    pipeline.write_optimize_outputs(args.out, result)
    _manifest("optimize", args, overrides, settings, fit=args.fit).write(args.out)


def cmd_band(args) -> None:
    config, settings, overrides = _prepare(args)
    params, spec, schedule = pipeline.load_fit_outputs(config, args.fit)
    policy_path = Path(args.policy)
    if policy_path.is_dir():
        policy_path = policy_path / "policy.csv"
    thr, _ = dataio.read_policy(policy_path)
    band = pipeline.run_band(config, params, spec, schedule, thr, settings, args.seed)
    pipeline.write_band_outputs(args.out, config, band)
    _manifest("band", args, overrides, settings, fit=args.fit, policy=args.policy).write(args.out)


def cmd_analyze(args) -> None:
    config, settings, overrides = _prepare(args)
    data = dataio.load_case_csv(args.data)
    result, spec = pipeline.run_fit(config, data, settings, args.seed)
    pipeline.write_fit_outputs(args.out, result, spec)
    # continue from the serialized fit so analyze matches fit -> optimize -> band
    params, spec, schedule = pipeline.load_fit_outputs(config, args.out)
    opt = pipeline.run_optimize(config, params, spec, schedule, settings, args.seed)
    pipeline.write_optimize_outputs(args.out, opt)
    band = pipeline.run_band(config, params, spec, schedule, opt.policy, settings, args.seed)
    pipeline.write_band_outputs(args.out, config, band)
    pipeline.write_summary(args.out, config, opt)
    _manifest("analyze", args, overrides, settings, data=args.data).write(args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lockdown-pomdp",
        description="Calibrate a partially observed SEIRD model and search threshold lockdown policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="region JSON file or bundled code (MI, TX, ...)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE",
            help="override a setting or region field, e.g. --set n_runs=10 --set c_l=1500000",
        )

    p = sub.add_parser("fit", help="calibrate transition and testing probabilities")
    common(p)
    p.add_argument("--data", required=True, type=Path, help="case CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("optimize", help="search the threshold policy over the test period")
    common(p)
    p.add_argument("--fit", required=True, type=Path, help="fit directory or fit.csv")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("band", help="sensitivity bands under the chosen policy")
    common(p)
    p.add_argument("--fit", required=True, type=Path, help="fit directory or fit.csv")
    p.add_argument("--policy", required=True, type=Path, help="optimize directory or policy.csv")
    p.set_defaults(func=cmd_band)

    p = sub.add_parser("analyze", help="fit, optimize and band in one go")
    common(p)
    p.add_argument("--data", required=True, type=Path, help="case CSV")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
