"""Command line entry point: ``rootcp run ...`` (also ``python -m rootcp``)."""

from __future__ import annotations

import argparse
import sys

from .bench import CsvError, MethodSpec, SyntheticSpec, load_csv, run_benchmark
from .core import ConformalConfig, InvalidInputError
from .regressors import make_regressor
from .smooth import ENVELOPES, SmoothingConfig

EXIT_OK, EXIT_CONFIG, EXIT_INIT = 0, 2, 3

_CLI_METHODS = {"full", "split", "interp", "smooth", "oracle", "ridge-exact"}


def _synthetic(text: str) -> SyntheticSpec:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected n,p,informative,noise")
    try:
        n, p, k = (int(v) for v in parts[:3])
        noise = float(parts[3])
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as n,p,informative,noise") from None
    return SyntheticSpec(n=n, p=p, n_informative=k, noise_sd=noise)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rootcp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="benchmark conformal intervals over repeated hold-outs")
    run.add_argument(
        "--method", action="append", required=True,
        help="full, split, interp, smooth, oracle or ridge-exact; repeat or comma-separate",
    )
    run.add_argument("--model", choices=["ridge", "lasso", "knn"], default="ridge")
    run.add_argument("--lam", type=float, default=None, help="ridge/lasso penalty (default 1.0)")
    run.add_argument("--k", type=int, default=5, help="neighbours for knn")
    run.add_argument("--tol", type=float, default=None, help="lasso duality-gap tolerance")
    run.add_argument("--tol-scale", type=float, default=1e-8,
                     help="lasso tolerance as a multiple of ||y||^2 when --tol is not given")
    run.add_argument("--alpha", type=float, default=0.1)
    run.add_argument("--eps", type=float, default=None,
                     help="root tolerance in response units (default 1e-4 x response range)")
    run.add_argument("--max-fits", type=int, default=256)
    run.add_argument("--gamma", type=float, default=100.0)
    run.add_argument("--envelope", choices=ENVELOPES, default="sigmoid")
    run.add_argument("--d", type=int, default=8, help="query fits for interp")
    run.add_argument("--repeats", type=int, default=100)
    run.add_argument("--seed", type=int, default=0)
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--synthetic", type=_synthetic, metavar="n,p,informative,noise")
    src.add_argument("--data", metavar="PATH")
    run.add_argument("--out", default="-", help="output file, '-' for stdout")
    run.add_argument("--format", choices=["json", "table", "csv"], default="json")
    run.add_argument("--timing", action="store_true",
                     help="include wall-clock times in json/csv output (makes it non-reproducible)")
    return parser


def _methods(args):
    names = [m.strip() for item in args.method for m in item.split(",") if m.strip()]
    unknown = [m for m in names if m not in _CLI_METHODS]
    if unknown:
        raise InvalidInputError(f"unknown method(s): {', '.join(unknown)}")
    smoothing = SmoothingConfig(gamma=args.gamma, envelope=args.envelope)
    return [MethodSpec(name, d=args.d, smoothing=smoothing) for name in names]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        methods = _methods(args)
        cfg = ConformalConfig(alpha=args.alpha, epsilon=args.eps, max_fits=args.max_fits)
        params = {"k": args.k, "tol": args.tol, "tol_scale": args.tol_scale}
        if args.lam is not None:
            params["lam"] = args.lam
        regressor = make_regressor(args.model, **params)
        if args.synthetic is not None:
            source = SyntheticSpec(**{**args.synthetic.__dict__, "seed": args.seed})
        else:
            source = load_csv(args.data)
        if "ridge-exact" in [m.name for m in methods] and args.model != "ridge":
            raise InvalidInputError("ridge-exact requires --model ridge")
        report = run_benchmark(methods, source, regressor, cfg, args.repeats, args.seed)
    except (InvalidInputError, CsvError, OSError) as exc:
        print(f"rootcp: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.format == "json":
        text = report.to_json(timing=args.timing)
    elif args.format == "table":
        text = report.to_table()
    else:
        text = None
    if args.out == "-":
        if text is None:
            report.to_csv(sys.stdout, timing=args.timing)
        else:
            sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            if text is None:
                report.to_csv(fh, timing=args.timing)
            else:
                fh.write(text)

    init_failures = [r for r in report.per_rep if r.error and r.error.startswith("InitializationError")]
    if init_failures:
        print(f"rootcp: {len(init_failures)} repetition(s) failed to initialize", file=sys.stderr)
        return EXIT_INIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
