"""Command line runner: ``dilated {clt,lln,distance,observable,selfcheck}``.

Exit codes
----------
0  converged / all checks passed
1  selfcheck failure
2  configuration error (bad flag, bad measure spec, measure outside the domain)
3  divergence detected
4  iteration budget exhausted without reaching the target
5  observable exceeded its bound
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import measure as M
from . import selfcheck
from .cltsys import (
    CltSystem,
    ConvergenceReport,
    Kind,
    NotInDomain,
    UnboundedObservable,
    Verdict,
    _jsonable,
    center,
    central_limit,
    observable_clt,
)
from .vspace import DivergenceDetected, MaxIterationsExceeded

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED, EXIT_MAXITER, EXIT_UNBOUNDED = 0, 1, 2, 3, 4, 5

DEFAULT_SEED = 42


class ConfigError(ValueError):
    pass


def default_seed() -> int:
    raw = os.environ.get("DILATED_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"DILATED_SEED must be an integer, got {raw!r}") from None


# -- measure specs --------------------------------------------------------------


def _floats(body: str, n: int | None, spec: str) -> list[float]:
    try:
        vals = [float(x) for x in body.split(",")] if body else []
    except ValueError:
        raise ConfigError(f"bad numbers in measure spec {spec!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"measure spec {spec!r} needs {n} value(s)")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"non-finite value in {spec!r}")
    return vals


def parse_measure(spec: str) -> M.Measure:
    """Parse ``dirac:x``, ``rademacher``, ``bernoulli:p``, ``uniform:a,b,n``,
    ``gaussian:mean,var`` or ``lattice:@file.json``."""
    name, _, body = spec.partition(":")
    try:
        if name == "rademacher" and not body:
            return M.rademacher()
        if name == "dirac":
            return M.dirac(_floats(body, 1, spec)[0])
        if name == "bernoulli":
            return M.bernoulli(_floats(body, 1, spec)[0])
        if name == "uniform":
            a, b, n = _floats(body, 3, spec)
            if n != int(n):
                raise ConfigError("uniform atom count must be an integer")
            return M.uniform(a, b, int(n))
        if name == "gaussian":
            mean, var = _floats(body, 2, spec)
            return M.gaussian(mean, var)
        if name == "lattice" and body.startswith("@"):
            with open(body[1:], encoding="utf-8") as fh:
                return M.measure_from_json(json.load(fh))
    except ConfigError:
        raise
    except (ValueError, OSError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot build measure from {spec!r}: {exc}") from None
    raise ConfigError(f"unknown measure spec {spec!r}")


SAMPLERS: dict[str, Callable[[int, np.random.Generator], np.ndarray]] = {
    "circle": lambda n, rng: rng.uniform(0.0, 2.0 * math.pi, n),
    "uniform": lambda n, rng: rng.uniform(-1.0, 1.0, n),
    "rademacher": lambda n, rng: rng.choice(np.array([-1.0, 1.0]), n),
    "gaussian": lambda n, rng: rng.standard_normal(n),
}


def parse_observable(spec: str) -> Callable[[np.ndarray], np.ndarray]:
    """``cos``, ``sin``, ``identity``, ``poly:c0,c1,...`` or ``const:c``."""
    name, _, body = spec.partition(":")
    if name == "cos" and not body:
        return np.cos
    if name == "sin" and not body:
        return np.sin
    if name == "identity" and not body:
        return lambda x: np.asarray(x, dtype=float)
    if name == "poly":
        coef = _floats(body, None, spec)
        if not coef:
            raise ConfigError("poly needs at least one coefficient")
        return lambda x: np.polynomial.polynomial.polyval(x, coef)
    if name == "const":
        c = _floats(body, 1, spec)[0]
        return lambda x: np.full(np.shape(x), c)
    raise ConfigError(f"unknown observable {spec!r}")


# -- argument parsing ----------------------------------------------------------


def _grid(args) -> M.DualGrid:
    g = M.DualGrid(seed=args.seed)
    return g.dense() if args.grid_dense else g


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 42, or $DILATED_SEED)")
    p.add_argument("--grid-dense", action="store_true", help="double the dual-grid density")
    p.add_argument("--workers", type=int, default=1, help="threads for characteristic functions (default 1)")


def _add_run(p: argparse.ArgumentParser, l_default: float, iters: int, grading_tol: float = 1e-9) -> None:
    p.add_argument("--l", type=float, default=l_default, help=f"Fourier exponent (default {l_default})")
    p.add_argument("--iters", type=int, default=iters, help=f"iteration cap (default {iters})")
    p.add_argument("--target-tol", type=float, default=0.05, help="final distance threshold (default 0.05)")
    p.add_argument("--grading-tol", type=float, default=grading_tol, help=f"allowed grading drift (default {grading_tol:g})")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory (default ./results)")
    _add_common(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dilated",
        description="Limit theorems as fixed points of rescaled self-convolution.",
        epilog="Measure specs: dirac:X rademacher bernoulli:P uniform:A,B,N gaussian:MEAN,VAR lattice:@FILE.json",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clt", help="central limit iteration (l in (2,3))")
    p.add_argument("--measure", default="rademacher", help="initial measure spec (default rademacher)")
    p.add_argument("--center", action="store_true", help="shift the initial lattice measure to mean zero")
    _add_run(p, 2.5, 20)

    p = sub.add_parser("lln", help="law of large numbers iteration (l in (1,2))")
    p.add_argument("--measure", default="bernoulli:0.3", help="initial measure spec (default bernoulli:0.3)")
    _add_run(p, 1.5, 15)

    p = sub.add_parser("distance", help="Fourier l-distance between two measures")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--l", type=float, default=2.5, help="Fourier exponent (default 2.5)")
    _add_common(p)

    p = sub.add_parser("observable", help="central limit of a bounded observable")
    p.add_argument("--sampler", choices=sorted(SAMPLERS), default="circle", help="state sampler (default circle)")
    p.add_argument("--H", dest="observable", default="cos", help="cos | sin | identity | poly:c0,c1,.. | const:c (default cos)")
    p.add_argument("--samples", type=int, default=100_000, help="number of samples (default 100000)")
    p.add_argument("--bins", type=int, default=2048, help="lattice nodes for binning (default 2048)")
    p.add_argument("--bound", type=float, default=1e6, help="abort if |H| exceeds this (default 1e6)")
    _add_run(p, 2.5, 15, grading_tol=1e-8)

    p = sub.add_parser("selfcheck", help="run the property suites")
    p.add_argument("--suite", choices=selfcheck.SUITES, action="append", help="run only this suite (repeatable)")
    p.add_argument("--break-unit", action="store_true", help=argparse.SUPPRESS)
    _add_common(p)
    return parser


# -- commands -------------------------------------------------------------


def _config(args, *skip: str) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("workers", "out", "command") + skip:
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def write_report(report: ConvergenceReport, out: Path, config: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict()
    payload["config"] = config
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
    (out / "report.json").write_text(text, encoding="utf-8")
    (out / "convergence.csv").write_text(report.to_csv(), encoding="utf-8")


def _exit_for(report: ConvergenceReport) -> int:
    return {
        Verdict.CONVERGED: EXIT_OK,
        Verdict.DIVERGED: EXIT_DIVERGED,
        Verdict.INCONCLUSIVE: EXIT_MAXITER,
    }[report.verdict]


def _summary(report: ConvergenceReport) -> str:
    return (
        f"{report.kind} l={report.l:g}: {report.verdict.value} after {report.iterations} iterations, "
        f"d_to_target {report.distance_to_target[0]:.6g} -> {report.distance_to_target[-1]:.6g}, "
        f"ratio {report.empirical_ratio if report.empirical_ratio is None else round(report.empirical_ratio, 6)} "
        f"(bound {report.theoretical_ratio:.6g})"
    )


def _system(kind: Kind, args) -> CltSystem:
    try:
        return CltSystem(kind, args.l, grid=_grid(args), workers=args.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _run_limit(kind: Kind, args) -> int:
    if args.iters < 1:
        raise ConfigError("--iters must be >= 1")
    sys_ = _system(kind, args)
    mu0 = parse_measure(args.measure)
    if getattr(args, "center", False):
        if not isinstance(mu0, M.LatticeMeasure):
            raise ConfigError("--center applies to lattice measures")
        mu0 = center(mu0)
    try:
        report = central_limit(sys_, mu0, args.iters, args.target_tol, args.grading_tol)
    except NotInDomain as exc:
        raise ConfigError(str(exc)) from None
    except DivergenceDetected as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_report(report, args.out, _config(args))
    print(_summary(report))
    return _exit_for(report)


def cmd_clt(args) -> int:
    return _run_limit(Kind.CLT, args)


def cmd_lln(args) -> int:
    return _run_limit(Kind.LLN, args)


def cmd_distance(args) -> int:
    if args.l < 1:
        raise ConfigError("--l must be >= 1")
    mu, nu = parse_measure(args.first), parse_measure(args.second)
    if mu.dim != nu.dim:
        raise ConfigError("measures live in different dimensions")
    try:
        gated = not M.moments_match(mu, nu, args.l)
        d = M.fourier_l_distance(mu, nu, args.l, _grid(args), workers=args.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"d_{args.l:g} = {d!r}" if math.isfinite(d) else f"d_{args.l:g} = inf")
    print("moment gate: " + ("moments below order l differ, distance forced to inf" if gated else "passed"))
    return EXIT_OK


def cmd_observable(args) -> int:
    if args.samples < 1 or args.bins < 1 or args.iters < 1:
        raise ConfigError("--samples, --bins and --iters must be positive")
    sys_ = _system(Kind.CLT, args)
    H = parse_observable(args.observable)
    try:
        report = observable_clt(
            SAMPLERS[args.sampler], H, args.samples, args.bins, sys_, args.iters,
            seed=args.seed, bound=args.bound, target_tol=args.target_tol, grading_tol=args.grading_tol,
        )
    except UnboundedObservable as exc:
        print(f"unbounded observable: {exc}", file=sys.stderr)
        return EXIT_UNBOUNDED
    except NotInDomain as exc:
        raise ConfigError(str(exc)) from None
    except DivergenceDetected as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_report(report, args.out, _config(args))
    print(_summary(report))
    return _exit_for(report)


def cmd_selfcheck(args) -> int:
    ok = True
    for name in args.suite or selfcheck.SUITES:
        res = selfcheck.run_suite(name, seed=args.seed, break_unit=args.break_unit)
        print(res.line())
        if not res.passed:
            ok = False
            break
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "clt": cmd_clt,
    "lln": cmd_lln,
    "distance": cmd_distance,
    "observable": cmd_observable,
    "selfcheck": cmd_selfcheck,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.seed is None:
            args.seed = default_seed()
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MaxIterationsExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MAXITER


if __name__ == "__main__":
    sys.exit(main())
