"""Command-line front end.

    doublinglab lyapunov --lambda 2 --f cosine --grid -4.2:4.2:101 --out curve.csv
    doublinglab bands --theta 1/3 --f table:alt.txt
    doublinglab verify

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

from . import __version__
from .checks import run_all
from .cocycle import CURVE_HEADER, NumericalFailure, lyapunov_curve, sample_sequence
from .config import COMMANDS, ConfigError, ExperimentConfig, parse_f
from .operator import BoundaryCondition, build_halfline_box
from .spectral import DECAY_HEADER, decay_report, eigensolve, eigensolve_arrays, periodic_bands
from .symbolic import evaluate_D, float_orbit, orbit_points

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def _lyapunov(cfg: ExperimentConfig):
    curve = lyapunov_curve(cfg.potential(), cfg.energy_grid(), cfg.n, cfg.samples, cfg.seed,
                           workers=cfg.worker_count())
    return CURVE_HEADER, curve.rows()


def _bands(cfg: ExperimentConfig):
    bands = periodic_bands(cfg.potential(), cfg.sequence())
    rows = [[i, repr(lo), repr(hi), bands.period] for i, (lo, hi) in enumerate(bands.bands)]
    return ["band_index", "E_lower", "E_upper", "period"], rows


def _thetas(cfg: ExperimentConfig, count: int):
    seq = cfg.sequence()
    if seq is not None:
        return [(seq, "theta")]
    return [(sample_sequence(cfg.seed, i, cfg.base), f"{cfg.seed}:{i}") for i in range(count)]


def _spectrum(cfg: ExperimentConfig):
    spec = cfg.potential()
    rows = []
    for omega, label in _thetas(cfg, 1):
        for alpha in cfg.alpha:
            w, _ = eigensolve_arrays(build_halfline_box(spec, omega, cfg.N, BoundaryCondition(alpha)))
            rows += [[repr(alpha), label, k, repr(float(e))] for k, e in enumerate(w)]
    return ["alpha", "seed", "index", "eigenvalue"], rows


def _localize(cfg: ExperimentConfig):
    spec = cfg.potential()
    jobs = [(omega, label, alpha) for omega, label in _thetas(cfg, cfg.samples) for alpha in cfg.alpha]

    def one(job):
        omega, label, alpha = job
        box = build_halfline_box(spec, omega, cfg.N, BoundaryCondition(alpha))
        out = []
        for pair in eigensolve(box):
            rep = decay_report(pair)
            out.append([repr(rep.eigenvalue), "" if rep.rate is None else repr(rep.rate),
                        "" if rep.residual is None else repr(rep.residual),
                        repr(rep.participation_ratio), cfg.N, repr(alpha), label])
        return out

    with ThreadPoolExecutor(max_workers=cfg.worker_count()) as pool:
        batches = list(pool.map(one, jobs))
    return DECAY_HEADER, [row for batch in batches for row in batch]


def _float_demo(cfg: ExperimentConfig):
    omega = cfg.sequence()
    if omega is None:
        omega = sample_sequence(cfg.seed, 0, cfg.base)
    start = evaluate_D(omega).value
    floats = float_orbit(start, cfg.demo_steps, cfg.base)
    symbolic = orbit_points(omega, 0, cfg.demo_steps + 1)
    rows = []
    for k in range(cfg.demo_steps + 1):
        exact = str(evaluate_D(omega.shift(k), exact=True).exact) if omega.is_periodic else ""
        rows.append([k, repr(float(floats[k])), repr(float(symbolic[k])), exact])
    zero = next((k for k in range(1, cfg.demo_steps + 1) if floats[k] == 0.0), None)
    note = f"float orbit reaches 0 at step {zero}" if zero else "float orbit did not reach 0"
    print(note, file=sys.stderr)
    return ["step", "float_orbit", "symbolic_orbit", "exact"], rows


def _verify(cfg: ExperimentConfig):
    results = run_all()
    for r in results:
        print(r.line(), file=sys.stderr)
    rows = [[r.name, "PASS" if r.passed else "FAIL", r.cases, r.failures, f"{r.seconds:.3f}"]
            for r in results]
    if not all(r.passed for r in results):
        raise NumericalFailure("structural identity check failed")
    return ["check", "status", "cases", "failures", "seconds"], rows


RUNNERS = {"lyapunov": _lyapunov, "bands": _bands, "spectrum": _spectrum, "localize": _localize,
           "verify": _verify, "float-demo": _float_demo}


def render(cfg: ExperimentConfig, columns, rows, created: str | None = None) -> str:
    created = created or datetime.now(timezone.utc).isoformat(timespec="seconds")
    if cfg.format == "json":
        doc = {"config": cfg.to_dict(), "created": created, "version": __version__,
               "columns": list(columns), "rows": rows}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# doublinglab {__version__}\n{cfg.provenance()}\n# created: {created}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def run(cfg: ExperimentConfig) -> int:
    """Execute one validated config; returns the process exit status."""
    try:
        columns, rows = RUNNERS[cfg.command](cfg)
    except NumericalFailure as exc:
        where = f" (E={exc.energy!r}, seed={exc.seed!r})" if exc.energy is not None else ""
        print(f"numerical failure: {exc}{where}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = render(cfg, columns, rows)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; keep 2 for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--lambda", dest="lambda", type=float, help="coupling constant (> 0)")
    common.add_argument("--f", help="cosine | step:c | table:path | const:v")
    common.add_argument("--base", type=int, help="base m of the map theta -> m theta")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int, help="transfer-matrix steps per sample")
    common.add_argument("--samples", type=int)
    common.add_argument("--grid", help="energy grid lo:hi:count")
    common.add_argument("--N", dest="N", type=int, help="box size")
    common.add_argument("--alpha", help="boundary angle(s), comma separated")
    common.add_argument("--theta", help="seed | p/q | digits:PREFIX(PERIOD)")
    common.add_argument("--demo-steps", dest="demo_steps", type=int)
    common.add_argument("--workers", type=int, help="worker threads (default: all cores)")
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"))

    parser = _Parser(prog="doublinglab", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config", "JSON config must be an object")
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config",)}
    if "f" in flags:
        flags["f"] = parse_f(flags["f"])
    data.update(flags)
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
