"""Command-line surface tying the certification pipeline together.

One run per invocation.  Exit codes: 0 = ran and certified / completed,
1 = ran and not certified, 2 = usage or validation error.  All range and
dimension checks happen before any sampling starts.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .certify import (
    CertificationSpec,
    certify,
    estimate_success_probability,
    DEFAULT_ESTIMATE_CONFIDENCE,
)
from .errors import ConfigError, ProbcertError
from .linear import generate_linear_classifier
from .modelio import (
    build_report,
    certificate_to_dict,
    estimate_to_dict,
    load_model,
    radius_result_to_dict,
    save_model,
    seed_to_dict,
    write_report,
    write_trace_csv,
)
from .network import ALL_TARGETS, MarginSpec
from .radius import RadiusSearchSpec, RadiusSearchStatus, max_radius
from .sampling import (
    Empirical,
    Gaussian,
    NoiseModel,
    SampleSeed,
    UniformBall,
    noise_spec_from_dict,
    p_from_json,
    p_to_json,
)

DEFAULT_DELTA = 1e-5
DEFAULT_ESTIMATE_SAMPLES = 48000


def _add_common_flags(sub: argparse.ArgumentParser, with_alpha: bool) -> None:
    sub.add_argument("--model", required=True, help="model JSON file")
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--input", help="JSON file holding the nominal input vector")
    group.add_argument("--input-inline", help="nominal input vector as inline JSON")
    sub.add_argument("--true-class", required=True, type=int, help="0-based true class index")
    sub.add_argument(
        "--target-class",
        required=True,
        help="0-based target class index, or 'all' for the one-shot minimum margin",
    )
    sub.add_argument(
        "--noise",
        default="uniform_ball",
        choices=["uniform_ball", "gaussian", "empirical"],
        help="noise distribution kind",
    )
    sub.add_argument("--p", default="inf", choices=["1", "2", "inf"], help="lp-ball norm order")
    if with_alpha:
        sub.add_argument("--alpha", type=float, help="lp-ball radius (uniform_ball noise)")
        sub.add_argument("--sigma", type=float, help="std deviation (gaussian noise)")
        sub.add_argument("--noise-file", help="JSON file of noise vectors (empirical noise)")
    sub.add_argument("--eps", required=True, type=float, help="permissible misclassification probability")
    sub.add_argument(
        "--delta",
        type=float,
        default=DEFAULT_DELTA,
        help=f"certificate failure probability (default {DEFAULT_DELTA})",
    )
    sub.add_argument("--seed", required=True, type=int, help="root seed")
    sub.add_argument("--stream", type=int, default=0, help="stream id (default 0)")
    sub.add_argument("--clamp", action="store_true", help="clip sampled inputs into [0, 1] (changes the distribution)")
    sub.add_argument("--threads", type=int, default=1, help="worker cap for margin evaluation")
    sub.add_argument("--out", help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probcert",
        description="Certify classifier robustness to random input noise from samples.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_cert = commands.add_parser("certify", help="one certificate at a fixed noise model")
    _add_common_flags(p_cert, with_alpha=True)
    p_cert.add_argument("--n", type=int, help="sample count override (>= the guarantee threshold)")

    p_rad = commands.add_parser("max-radius", help="bisection for the largest certifiable ball radius")
    _add_common_flags(p_rad, with_alpha=False)
    p_rad.add_argument("--alpha-lo", required=True, type=float, help="lower radius endpoint")
    p_rad.add_argument("--alpha-hi", required=True, type=float, help="upper radius endpoint")
    p_rad.add_argument("--tol", required=True, type=float, help="absolute radius tolerance")
    p_rad.add_argument("--max-iter", type=int, default=64, help="iteration cap (default 64)")
    p_rad.add_argument("--trace", help="write the per-iteration trace CSV here")

    p_est = commands.add_parser("estimate", help="a posteriori Monte Carlo estimate of P(margin >= 0)")
    _add_common_flags(p_est, with_alpha=True)
    p_est.add_argument(
        "--samples",
        type=int,
        default=DEFAULT_ESTIMATE_SAMPLES,
        help=f"Monte Carlo sample count (default {DEFAULT_ESTIMATE_SAMPLES})",
    )
    p_est.add_argument(
        "--confidence",
        type=float,
        default=DEFAULT_ESTIMATE_CONFIDENCE,
        help="confidence level of the lower Clopper-Pearson bound",
    )

    p_gen = commands.add_parser("gen-linear", help="generate a random linear classifier model file")
    p_gen.add_argument("--nx", required=True, type=int, help="input dimension")
    p_gen.add_argument("--ny", required=True, type=int, help="number of classes")
    p_gen.add_argument("--seed", required=True, type=int, help="root seed")
    p_gen.add_argument("--stream", type=int, default=0, help="stream id (default 0)")
    p_gen.add_argument("--out", required=True, help="model file to write")

    return parser


def _parse_input_vector(args) -> list:
    if args.input_inline is not None:
        text = args.input_inline
        origin = "--input-inline"
    else:
        try:
            text = Path(args.input).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read input file {args.input}: {exc}") from None
        origin = args.input
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from None
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{origin}: expected a nonempty JSON array of numbers")
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(f"{origin}: expected a nonempty JSON array of numbers") from None
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{origin}: input must be a flat array of finite numbers")
    return arr.tolist()


def _parse_target_class(text: str):
    if text == ALL_TARGETS:
        return ALL_TARGETS
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"--target-class must be an integer or 'all', got {text!r}") from None


def _noise_dict_from_args(args) -> dict:
    if args.noise == "uniform_ball":
        if args.alpha is None:
            raise ConfigError("--alpha is required for uniform_ball noise")
        return {"kind": "uniform_ball", "p": p_to_json(p_from_json(args.p)), "alpha": args.alpha}
    if args.noise == "gaussian":
        if args.sigma is None:
            raise ConfigError("--sigma is required for gaussian noise")
        return {"kind": "gaussian", "sigma": args.sigma}
    if args.noise_file is None:
        raise ConfigError("--noise-file is required for empirical noise")
    try:
        deltas = json.loads(Path(args.noise_file).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read noise file {args.noise_file}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.noise_file}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from None
    return {"kind": "empirical", "deltas": deltas}


def _common_config(args, command: str) -> dict:
    return {
        "command": command,
        "model": args.model,
        "input": _parse_input_vector(args),
        "margin": {"true_class": args.true_class, "target_class": _parse_target_class(args.target_class)},
        "epsilon": args.eps,
        "delta_confidence": args.delta,
        "seed": {"root_seed": args.seed, "stream_id": args.stream},
        "clamp01": bool(args.clamp),
        "threads": args.threads,
    }


def _margin_spec(config: dict) -> MarginSpec:
    m = config["margin"]
    return MarginSpec(true_class=m["true_class"], target_class=m["target_class"])


def _seed(config: dict) -> SampleSeed:
    return SampleSeed(config["seed"]["root_seed"], config["seed"]["stream_id"])


def _run_certify(args) -> int:
    config = _common_config(args, "certify")
    config["noise"] = _noise_dict_from_args(args)
    config["n_override"] = args.n
    # Range checks come before the model is even opened.
    spec = CertificationSpec(args.eps, args.delta, _margin_spec(config))
    noise = noise_spec_from_dict(config["noise"])
    net = load_model(args.model)
    model = NoiseModel(np.asarray(config["input"]), noise, clamp01=config["clamp01"])
    started = time.perf_counter()
    cert = certify(net, model, spec, _seed(config), n_override=args.n, threads=args.threads)
    duration = time.perf_counter() - started
    report = build_report("certify", config, certificate_to_dict(cert), duration)
    _emit(report, args.out)
    print(
        f"certify: certified={cert.certified} r_hat={cert.r_hat!r} N={cert.n_samples} "
        f"epsilon={cert.epsilon} delta={cert.delta_confidence}"
    )
    return 0 if cert.certified else 1


def _run_max_radius(args) -> int:
    config = _common_config(args, "max-radius")
    config["noise"] = {"kind": "uniform_ball", "p": p_to_json(p_from_json(args.p))}
    if args.noise != "uniform_ball":
        raise ConfigError("max-radius searches over uniform_ball noise only")
    config.update(
        {
            "alpha_lo": args.alpha_lo,
            "alpha_hi": args.alpha_hi,
            "tolerance": args.tol,
            "max_iterations": args.max_iter,
        }
    )
    spec = RadiusSearchSpec(
        alpha_lo=args.alpha_lo,
        alpha_hi=args.alpha_hi,
        tolerance=args.tol,
        p=p_from_json(args.p),
        cert_spec=CertificationSpec(args.eps, args.delta, _margin_spec(config)),
        max_iterations=args.max_iter,
    )
    net = load_model(args.model)
    started = time.perf_counter()
    result = max_radius(
        net,
        np.asarray(config["input"]),
        spec,
        _seed(config),
        threads=args.threads,
        clamp01=config["clamp01"],
    )
    duration = time.perf_counter() - started
    report = build_report("max-radius", config, radius_result_to_dict(result), duration)
    _emit(report, args.out)
    if args.trace:
        write_trace_csv(result, args.trace)
    lo, hi = result.final_interval
    print(
        f"max-radius: status={result.status.value} alpha={result.alpha!r} "
        f"interval=[{lo!r}, {hi!r}] iterations={len(result.trace)}"
    )
    return 0 if result.status is RadiusSearchStatus.CERTIFIED else 1


def _run_estimate(args) -> int:
    config = _common_config(args, "estimate")
    config["noise"] = _noise_dict_from_args(args)
    config["samples"] = args.samples
    config["confidence"] = args.confidence
    # estimation itself needs no epsilon; it is validated and echoed so the
    # report can be read against 1 - eps.
    CertificationSpec(args.eps, args.delta, _margin_spec(config))
    noise = noise_spec_from_dict(config["noise"])
    net = load_model(args.model)
    model = NoiseModel(np.asarray(config["input"]), noise, clamp01=config["clamp01"])
    started = time.perf_counter()
    est = estimate_success_probability(
        net,
        model,
        _margin_spec(config),
        args.samples,
        _seed(config),
        confidence=args.confidence,
        threads=args.threads,
    )
    duration = time.perf_counter() - started
    report = build_report("estimate", config, estimate_to_dict(est), duration)
    _emit(report, args.out)
    print(
        f"estimate: point_estimate={est.point_estimate!r} "
        f"lower_bound={est.lower_confidence_bound!r} successes={est.successes}/{est.m}"
    )
    return 0


def _run_gen_linear(args) -> int:
    seed = SampleSeed(args.seed, args.stream)
    net = generate_linear_classifier(args.nx, args.ny, seed)
    metadata = {
        "generator": "uniform01-linear",
        "n_x": args.nx,
        "n_y": args.ny,
        "seed": seed_to_dict(seed),
    }
    save_model(net, args.out, metadata=metadata)
    print(f"gen-linear: wrote nx={args.nx} ny={args.ny} model to {args.out}")
    return 0


def _emit(report: dict, out_path) -> None:
    if out_path:
        write_report(report, out_path)
    else:
        print(json.dumps(report, indent=2))


def config_to_argv(config: dict) -> list:
    """Rebuild the argv for a recorded run configuration (report replay)."""
    command = config["command"]
    if command == "gen-linear":
        raise ValueError("gen-linear runs are replayed from their metadata, not a report")
    argv = [
        command,
        "--model", config["model"],
        "--input-inline", json.dumps(config["input"]),
        "--true-class", str(config["margin"]["true_class"]),
        "--target-class", str(config["margin"]["target_class"]),
        "--eps", repr(config["epsilon"]),
        "--delta", repr(config["delta_confidence"]),
        "--seed", str(config["seed"]["root_seed"]),
        "--stream", str(config["seed"]["stream_id"]),
        "--threads", str(config["threads"]),
    ]
    if config.get("clamp01"):
        argv.append("--clamp")
    noise = config["noise"]
    argv += ["--noise", noise["kind"], "--p", str(noise.get("p", "inf"))]
    if command == "certify":
        argv += ["--alpha", repr(noise["alpha"])]
        if config.get("n_override") is not None:
            argv += ["--n", str(config["n_override"])]
    elif command == "max-radius":
        argv += [
            "--alpha-lo", repr(config["alpha_lo"]),
            "--alpha-hi", repr(config["alpha_hi"]),
            "--tol", repr(config["tolerance"]),
            "--max-iter", str(config["max_iterations"]),
        ]
    elif command == "estimate":
        if noise["kind"] == "uniform_ball":
            argv += ["--alpha", repr(noise["alpha"])]
        elif noise["kind"] == "gaussian":
            argv += ["--sigma", repr(noise["sigma"])]
        argv += ["--samples", str(config["samples"]), "--confidence", repr(config["confidence"])]
    else:
        raise ValueError(f"unknown command {command!r}")
    return argv


def run_command(argv) -> int:
    """Parse argv, run the pipeline, and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    handlers = {
        "certify": _run_certify,
        "max-radius": _run_max_radius,
        "estimate": _run_estimate,
        "gen-linear": _run_gen_linear,
    }
    try:
        return handlers[args.command](args)
    except (ProbcertError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
