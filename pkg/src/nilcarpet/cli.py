"""Command-line front end: ``nilcarpet build | sweep | verify | render``.

Exit codes: 0 success, 1 invalid input, 2 computation failure (including
failed verification suites), 3 I/O error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys

from .carpet import EnumerationCapExceeded, delta1_measure_exact, measure_exact
from .config import Config, ConfigError, from_dict, load
from .groups import NoQualifyingPair, ReductionFailed, equivariance_check, pair_length, qualifying_pair
from .hyperbolic import OrbitDegenerate
from .packing import coverage_mc
from .render import PlaneSpecError, render, to_ppm
from .verify import SUITES, UnknownSuite, construct, run_suite

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(path: str, data) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    try:
        with open(path, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot write {path}: {e.strerror or e}") from None


def _config(path: str | None) -> Config:
    if path is None:
        return from_dict({})
    try:
        return load(path)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot read config {path}: {e.strerror or e}") from None


def _stamp(cfg: Config) -> dict:
    return {"config_hash": cfg.hash(), "seed": cfg.seed, "depth": cfg.depth, "pack_depth": cfg.pack_depth}


def cmd_build(args) -> int:
    cfg = _config(args.config)
    con = construct(cfg)
    if not os.path.isdir(args.out):
        try:
            os.makedirs(args.out)
        except OSError as e:
            raise CliError(EXIT_IO, f"cannot create output directory {args.out}: {e.strerror or e}") from None
    from .carpet import carpet_record

    cov, se = coverage_mc(con.packing, con.cells, cfg.sample_count("coverage"), cfg.seed)
    summary = {
        "format": "nilcarpet.summary",
        "version": 1,
        **_stamp(cfg),
        "config": cfg.canonical(),
        "measure_exact": measure_exact(con.carpet),
        "delta1_measure": delta1_measure_exact(con.carpet),
        "removed_cells": len(con.cells),
        "balls": len(con.packing),
        "coverage": cov,
        "coverage_stderr": se,
        "generators_E": len(con.group.steps),
        "generators_H": len(con.group.ball_radii),
        "limit_set_full": con.group.limit_set_full,
    }
    files = {
        "carpet.json": {**carpet_record(con.carpet, con.cells), **_stamp(cfg)},
        "packing.json": {**con.packing.to_record(), **_stamp(cfg)},
        "group.json": {**con.group.to_record(), **_stamp(cfg)},
        "summary.json": summary,
    }
    for name, rec in files.items():
        _write(os.path.join(args.out, name), _dumps(rec))
    print(f"measure_exact={summary['measure_exact']!r} delta1={summary['delta1_measure']!r} "
          f"coverage={cov!r} E={summary['generators_E']} H={summary['generators_H']}")
    return EXIT_OK


def _parse_t(text: str) -> list:
    try:
        ts = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise CliError(EXIT_INVALID, f"t_values: cannot parse {text!r}") from None
    return ts


def cmd_sweep(args) -> int:
    cfg = _config(args.config)
    if args.t:
        cfg = cfg.with_(t_values=_parse_t(args.t))
    con = construct(cfg)
    (i, j), _ = qualifying_pair(con.deformation(1.0))
    n_iter = pair_length(con.group, i, j).n_iter
    out = io.StringIO()
    out.write(f"# config_hash={cfg.hash()} seed={cfg.seed} depth={cfg.depth} pack_depth={cfg.pack_depth} "
              f"pair={i}:{j}\n")
    out.write("t,t1,equiv_dev,ell_ij,ell_err\n")
    for t in cfg.t_values:
        d = con.deformation(t)
        eq = equivariance_check(con.group, d, cfg.sample_count("equivariance"), cfg.seed, cfg.tol("equivariance"))
        ell = pair_length(d.group, i, j, n_iter)
        out.write(f"{t!r},{d.stretch.t1()!r},{eq.max_deviation!r},{ell.refined!r},{ell.error!r}\n")
    _write(args.report, out.getvalue())
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args.config)
    names = list(SUITES) if "all" in args.suite else args.suite
    reports = []
    for name in names:
        rep = run_suite(name, cfg, cfg.seed)
        reports.append(rep)
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} {name}: cases={rep.cases} failures={len(rep.failures)} max_deviation={rep.max_deviation:.3g}")
    if args.report:
        if len(reports) == 1:
            text = reports[0].to_json()
        else:
            text = _dumps({"format": "nilcarpet.reports", "version": 1, **_stamp(cfg),
                           "reports": [json.loads(r.to_json()) for r in reports]})
        _write(args.report, text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_COMPUTE


def cmd_render(args) -> int:
    cfg = _config(args.config)
    con = construct(cfg)
    try:
        img = render(con.carpet, con.packing, args.plane, args.res)
    except PlaneSpecError as e:
        raise CliError(EXIT_INVALID, f"plane: {e}") from None
    except ValueError as e:
        raise CliError(EXIT_INVALID, f"res: {e}") from None
    _write(args.out, to_ppm(img, f"nilcarpet config_hash={cfg.hash()} seed={cfg.seed} plane={args.plane}"))
    return EXIT_OK


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nilcarpet", description="Fat nilpotent carpets and their deformed groups.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="construct carpet, packing and group; write artifacts")
    b.add_argument("--config")
    b.add_argument("--out", required=True, help="output directory")
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("sweep", help="deformation sweep over t")
    s.add_argument("--config")
    s.add_argument("--t", help="comma-separated t values (overrides the config)")
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run property suites")
    v.add_argument("--config")
    v.add_argument("--suite", action="append", required=True, choices=list(SUITES) + ["all"])
    v.add_argument("--report")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("render", help="P6 slice of carpet and packing")
    r.add_argument("--config")
    r.add_argument("--plane", required=True)
    r.add_argument("--res", type=int, required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    try:
        args = parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_INVALID
    except UnknownSuite as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (EnumerationCapExceeded, NoQualifyingPair, ReductionFailed, OrbitDegenerate, ArithmeticError) as e:
        print(f"computation failed: {e}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
