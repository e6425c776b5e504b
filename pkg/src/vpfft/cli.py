"""Command line interface: ``vpfft solve|compare|synth|verify``.

Exit codes: 0 success, 2 configuration error, 3 solver failure (including a
run stopped early by exhausted softening), 4 input/output error.
"""
import argparse
import os
import sys

from . import driver as D
from . import kernels
from . import microstructure as MS
from . import spectral as S
from . import verify as V

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

# key -> (type, default); config-file keys mirror the long flags
OPTIONS = {
    "micro": (str, None),
    "format": (str, "ascii-grid"),
    "preset": (str, "hardening"),
    "scheme": (str, "be"),
    "theta": (float, 0.5),
    "ig": (str, "classical"),
    "steps": (int, 100),
    "eps_final": (float, None),
    "rate": (float, 0.01),
    "out": (str, "out"),
    "crop": (int, None),
    "newton_tol": (float, 1e-8),
    "newton_max": (int, 25),
    "cg_tol": (float, 1e-10),
    "repetitions": (int, 1),
    "backend": (str, None),
}


class ConfigError(ValueError):
    pass


def read_config_file(path):
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in OPTIONS:
                raise ConfigError(f"{path}:{lineno}: unknown or malformed entry {line!r}")
            values[key] = value.strip()
    return values


def resolve_options(args, skip=()):
    """Merge defaults, the config file and the command line (in that order)."""
    merged = {k: d for k, (_, d) in OPTIONS.items()}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in OPTIONS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    out = {}
    for key, value in merged.items():
        if key in skip:
            continue
        typ = OPTIONS[key][0]
        try:
            out[key] = None if value is None else typ(value)
        except ValueError:
            raise ConfigError(f"option {key}: cannot convert {value!r} to {typ.__name__}") from None
    return out


def build_config(opts):
    if not opts.get("micro"):
        raise ConfigError("a microstructure file is required (--micro)")
    if opts["format"] not in ("ascii-grid", "pgm"):
        raise ConfigError(f"unknown format {opts['format']!r}")
    try:
        solver = S.SolverConfig(
            newton_tol=opts["newton_tol"], newton_max=opts["newton_max"],
            cg_tol=opts["cg_tol"], ig_mode=opts.get("ig", "classical"),
        )
        load = D.preset_load(opts["preset"], opts["steps"], opts["rate"], opts["eps_final"])
        return D.RunConfig(
            catalog=D.preset_catalog(opts["preset"]), load=load, solver=solver,
            micro=opts["micro"], format=opts["format"], crop=opts["crop"],
            scheme=opts["scheme"], theta=opts["theta"], repetitions=opts["repetitions"],
            out_dir=opts["out"], backend=opts["backend"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _add_run_flags(p, with_ig):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--micro", help="microstructure file")
    p.add_argument("--format", choices=["ascii-grid", "pgm"])
    p.add_argument("--preset", choices=sorted(D.PRESETS))
    p.add_argument("--scheme", choices=["be", "trapz"])
    p.add_argument("--theta", type=float)
    if with_ig:
        p.add_argument("--ig", choices=["classical", "improved"])
    p.add_argument("--steps", type=int)
    p.add_argument("--eps-final", dest="eps_final", type=float)
    p.add_argument("--rate", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--crop", type=int, help="top-left square section size")
    p.add_argument("--newton-tol", dest="newton_tol", type=float)
    p.add_argument("--newton-max", dest="newton_max", type=int)
    p.add_argument("--cg-tol", dest="cg_tol", type=float)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--backend", choices=["compiled", "python"])


def make_parser():
    parser = argparse.ArgumentParser(prog="vpfft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("solve", help="run one load program"), True)
    _add_run_flags(sub.add_parser("compare", help="classical vs improved initial guess"), False)
    p = sub.add_parser("synth", help="write a centered-inclusion ascii-grid")
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--ny", type=int)
    p.add_argument("--vf", type=float, default=0.17)
    p.add_argument("--shape", choices=["disc", "square"], default="disc")
    p.add_argument("--out", help="output file (default stdout)")
    p = sub.add_parser("verify", help="run the material oracles")
    p.add_argument("--out", default="verify", help="output directory")
    p.add_argument("--fd-points", dest="fd_points", type=int, default=100)
    return parser


def _solve(args, compare):
    opts = resolve_options(args, skip=("ig",) if compare else ())
    config = build_config(opts)
    if config.backend == "compiled" and "compiled" not in kernels.available_backends():
        raise ConfigError("compiled backend requested but the extension is not built")
    report = D.compare(config) if compare else D.run(config)
    csv_path, txt_path = D.emit_reports(report, config.out_dir)
    for k, v in report.summary().items():
        print(f"{k} = {v}")
    print(f"wrote {csv_path} and {txt_path}")
    reports = (report.classical, report.improved) if compare else (report,)
    for r in reports:
        if not r.complete:
            print(f"incomplete {r.ig_mode} run: {r.message}", file=sys.stderr)
            return EXIT_SOLVER
    return EXIT_OK


def _synth(args):
    try:
        grid = MS.synth_inclusion(args.nx, args.ny or args.nx, args.vf, args.shape)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    text = MS.emit_grid(grid)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _verify(args):
    results = V.run_suite(args.fd_points)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "verify.csv")
    V.write_results(results, path)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} (limit {r.limit:g})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_SOLVER


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return _synth(args)
        if args.command == "verify":
            return _verify(args)
        return _solve(args, args.command == "compare")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, MS.MicrostructureError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except S.SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
