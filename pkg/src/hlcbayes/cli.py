"""Command line entry points: sp, pe, mc and serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import audio as audio_mod
from . import comparison, fitting, model
from .compressor import characterize, run_sequence, write_gain_trace
from .model import Theta, default_priors
from .service import ServerConfig, serve

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_FILE = 2


def _theta_from_args(args) -> Theta:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(str(path))
        return model.theta_from_config(path.read_text())
    return Theta.make(args.alpha, args.beta, args.obs_var, args.gain_prec)


def _priors_from_args(args) -> model.ThetaPriors:
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(str(path))
        return model.priors_from_config(path.read_text())
    return default_priors()


def _load_training(path_str: str) -> fitting.TrainingSet:
    path = Path(path_str)
    if not path.exists():
        raise FileNotFoundError(str(path))
    return fitting.TrainingSet.from_jsonl(path.read_text())


def cmd_sp(args) -> int:
    theta = _theta_from_args(args)
    if args.input:
        in_path = Path(args.input)
        if not in_path.exists():
            raise FileNotFoundError(str(in_path))
        result = audio_mod.process_file(
            in_path, theta, out_path=args.output, trace_path=args.trace
        )
        print(f"processed {in_path} -> {args.output or '(no output written)'}")
        print(f"frames = {len(result.levels)}  clipped_samples = {result.clip_count}")
    else:
        levels_cycle = [float(v) for v in args.levels.split(",")]
        block = max(1, args.steps // 8)
        seq: list[float] = []
        while len(seq) < args.steps:
            for lv in levels_cycle:
                seq.extend([lv] * block)
        seq = np.array(seq[: args.steps])
        states = run_sequence(seq, theta)
        if args.output:
            with open(args.output, "w") as fh:
                write_gain_trace(fh, seq, states)
            print(f"trace written to {args.output}")
        else:
            write_gain_trace(sys.stdout, seq, states)
    lo, hi = (55.0, 80.0)
    if args.levels:
        vals = sorted(float(v) for v in args.levels.split(","))
        lo, hi = vals[0], vals[-1]
    if lo == hi:
        print("single probe level, skipping dynamic range characterization")
        return EXIT_OK
    char = characterize(theta, lo, hi)
    print(f"CR = {char.compression_ratio:.6g}")
    print(f"attack_steps = {char.attack_steps}")
    print(f"release_steps = {char.release_steps}")
    for level, gain in sorted(char.steady_gain_per_level.items()):
        print(f"steady_gain[{level:g} dB] = {gain:.6g} dB")
    return EXIT_OK


def cmd_pe(args) -> int:
    data = _load_training(args.data)
    priors = _priors_from_args(args)
    result = fitting.estimate(data, priors, fitting.FitConfig(iterations=args.iters))
    report = fitting.report_posteriors(result.posteriors)
    if result.warning:
        print(f"warning: {result.warning}", file=sys.stderr)
    if args.output:
        Path(args.output).write_text(report)
        print(f"posterior report written to {args.output}")
    else:
        sys.stdout.write(report)
    return EXIT_OK


def cmd_mc(args) -> int:
    data = _load_training(args.data)
    priors = _priors_from_args(args)
    result = comparison.compare_models(
        data,
        priors,
        comparison.NestingSpec(omega=args.omega),
        fitting.FitConfig(iterations=args.iters),
    )
    report = result.report()
    if args.output:
        Path(args.output).write_text(report)
        print(f"comparison report written to {args.output}")
    else:
        sys.stdout.write(report)
    return EXIT_OK


def cmd_serve(args) -> int:
    config = ServerConfig(
        host=args.host,
        port=args.port,
        audio_path=args.audio,
        db_path=args.db,
        log_path=args.log,
        seed=args.seed,
    )
    serve(config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlcbayes",
        description="Hearing loss compensation by inference: gain filtering, "
        "fitting from preferred examples, model comparison, and the "
        "personalization loop service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_theta_flags(p):
        p.add_argument("--alpha", type=float, default=2.0, help="loss-curve slope")
        p.add_argument("--beta", type=float, default=-90.0, help="loss-curve offset (dB)")
        p.add_argument("--obs-var", type=float, default=10.0, help="observation variance (dB^2)")
        p.add_argument("--gain-prec", type=float, default=1.0, help="gain-transition precision")
        p.add_argument("--config", help="key = value config file with theta entries")

    sp = sub.add_parser("sp", help="run the gain filter on audio or a synthetic level sequence")
    add_theta_flags(sp)
    sp.add_argument("--levels", default="80,55", help="comma-separated dB levels to alternate")
    sp.add_argument("--steps", type=int, default=200, help="length of the synthetic sequence")
    sp.add_argument("--input", help="input WAV file")
    sp.add_argument("--output", help="output WAV (with --input) or CSV trace path")
    sp.add_argument("--trace", help="CSV gain trace path (with --input)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_sp)

    pe = sub.add_parser("pe", help="fit parameter posteriors from training data")
    pe.add_argument("--data", required=True, help="training set, JSON lines")
    pe.add_argument("--iters", type=int, default=200)
    pe.add_argument("--config", help="config file with prior entries")
    pe.add_argument("--output", help="report path (default: stdout)")
    pe.add_argument("--seed", type=int, default=0)
    pe.set_defaults(func=cmd_pe)

    mc = sub.add_parser("mc", help="score the gain constraint with a Bayes factor")
    mc.add_argument("--data", required=True, help="training set, JSON lines")
    mc.add_argument("--omega", type=float, default=0.25, help="upper edge of the nested interval")
    mc.add_argument("--iters", type=int, default=200)
    mc.add_argument("--config", help="config file with prior entries")
    mc.add_argument("--output", help="report path (default: stdout)")
    mc.add_argument("--seed", type=int, default=0)
    mc.set_defaults(func=cmd_mc)

    sv = sub.add_parser("serve", help="run the personalization loop service")
    sv.add_argument("--port", type=int, default=8347)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--seed", type=int, default=0)
    sv.add_argument("--audio", help="demo WAV (synthesized when missing)")
    sv.add_argument("--db", help="preference database path (JSON lines)")
    sv.add_argument("--log", help="appraisal log path (JSON lines)")
    sv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
