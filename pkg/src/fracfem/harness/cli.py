"""Command line: ``partition``, ``run``, ``sweep`` and ``check``."""
from __future__ import annotations

import argparse
import json
from fractions import Fraction
import logging
import sys
from pathlib import Path

import numpy as np

from ..lattice import LatticeSpec, distinct_direction_union, freudenthal_partition
from .acceptance import (AcceptanceInputError, check_csv, check_cube_identity, check_determinism,
                         check_slicing, check_structural)
from .config import ConfigError, SweepConfig, format_number, load
from .sweep import _clean, build_problem, run_sweep

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser, config_required: bool = False) -> None:
    p.add_argument("--config", metavar="PATH", required=config_required, help="INI sweep config")
    p.add_argument("--out", metavar="PATH", help="output file or directory")
    p.add_argument("--seed", type=int, help="override the shift seed")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--deterministic", action="store_true", default=None,
                   help="compensated sums and zeroed timings")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracfem",
                                     description="Lattice approximation of piecewise-smooth "
                                                 "displacement fields.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("partition", help="print the Freudenthal simplices of [0,1]^n")
    p.add_argument("n", type=int)
    _common(p)

    p = sub.add_parser("run", help="one (h, y) report as JSON")
    _common(p, config_required=True)
    p.add_argument("--h", help="mesh size (default: first h of the config)")
    p.add_argument("--y", help="shift as comma-separated coordinates (default: random)")

    p = sub.add_parser("sweep", help="full convergence sweep")
    _common(p, config_required=True)

    p = sub.add_parser("check", help="acceptance evaluation of sweep CSVs")
    p.add_argument("csv", nargs="*", help="sweep CSV files")
    p.add_argument("--self-tests", action="store_true",
                   help="also run the criteria that need no sweep data")
    _common(p)
    return parser


def _config(args) -> SweepConfig:
    cfg = load(args.config)
    return cfg.with_overrides(seed=args.seed, threads=args.threads,
                              deterministic=args.deterministic)


def _emit(text: str, out) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_partition(args) -> int:
    n = args.n
    if not 1 <= n <= 8:
        raise ConfigError("n must lie in [1, 8]")
    data = {"n": n, "simplices": [], "direction_union": distinct_direction_union(n).tolist()}
    for s in freudenthal_partition(n):
        es = s.edges
        data["simplices"].append({"permutation": list(s.permutation),
                                  "vertices": s.vertices.tolist(),
                                  "edges": es.directions.tolist(),
                                  "volume": s.volume()})
    _emit(json.dumps(data, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    from ..approximation import reference_bulk, run_approximation

    cfg = _config(args)
    domain, u, dirs = build_problem(cfg)
    h = float(Fraction(args.h)) if args.h else cfg.h[0]
    if args.y:
        y = tuple(float(v) for v in args.y.split(","))
        policy = "fixed"
    else:
        y = tuple(np.random.default_rng(cfg.seed).random(cfg.n))
        policy = f"random:seed={cfg.seed}"
    try:
        spec = LatticeSpec.create(domain, h, y, cfg.enlargement)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    ref = reference_bulk(u, dirs, domain) if cfg.continuum else None
    r = run_approximation(u, dirs, spec, policy, continuum_bulk_u=ref, continuum=cfg.continuum,
                          exact_sum=cfg.deterministic, rtol=cfg.rtol,
                          budget=cfg.budget, lp=cfg.lp)
    _emit(json.dumps(_clean(r.as_dict()), indent=2) + "\n", args.out)
    return EXIT_RUNTIME if r.status.startswith("failed") else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    res = run_sweep(cfg, out=args.out)
    s = res.summary
    print(f"{s['runs']} runs ({s['failed']} failed) -> {res.csv_path}")
    for st in s["per_h"]:
        if st["runs"]:
            print(f"  h={format_number(st['h']):>8}  E1={st['discrete_bulk_mean']:.6g}  "
                  f"E2={st['discrete_surface_mean']:.6g}  lp={st['lp_error_mean']:.3e}  "
                  f"bad/h={st['bad_volume_over_h']:.4g}")
    print(f"  order(bulk)={s['order_bulk_error']:.3f}  order(lp)={s['order_lp_error']:.3f}")
    failed = False
    for c in s["acceptance"]:
        if c["status"] != "n/a":
            print(f"  criterion {c['id']} {c['name']}: {c['status']}")
        failed |= c["status"] == "fail"
    return EXIT_FAIL if failed else EXIT_OK


def cmd_check(args) -> int:
    results = []
    for path in args.csv:
        try:
            results.extend(check_csv(path))
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
    if args.self_tests or not args.csv:
        results += [check_structural(), check_cube_identity(), check_slicing(),
                    check_determinism()]
    lines = [c.line() for c in results]
    print("\n".join(lines))
    if args.out:
        Path(args.out).write_text(json.dumps(_clean([c.as_dict() for c in results]), indent=2) + "\n")
    return EXIT_FAIL if any(c.status == "fail" for c in results) else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    verbs = {"partition": cmd_partition, "run": cmd_run, "sweep": cmd_sweep, "check": cmd_check}
    try:
        return verbs[args.verb](args)
    except (ConfigError, AcceptanceInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        logging.getLogger(__name__).debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
