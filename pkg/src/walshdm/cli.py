"""Command line entry point: ``walshdm {run,sweep,decompose,reconstruct,rms}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from walshdm.bvls import BvlsNotConverged
from walshdm.config import ConfigError, bundled_configs, load_config
from walshdm.controller import NumericalFailure, RankDeficientBatch
from walshdm.experiment import OutputConflict, cropped_rms, run_experiment, write_artifacts
from walshdm.fileio import FormatError, read_coeffs, read_surface, write_coeffs, write_surface
from walshdm.walsh import build_basis, project, reconstruct

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("walshdm")


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, field: str | None = None):
        super().__init__(message)
        self.code, self.kind, self.field = code, kind, field

    def record(self) -> dict:
        rec = {"error": self.kind, "message": str(self), "exit_code": self.code}
        if self.field:
            rec["field"] = self.field
        return rec


def _order_for(n: int, order: int | None) -> int:
    v = n.bit_length() - 1
    if 1 << v != n:
        raise CliError(EXIT_CONFIG, "config", f"surface side {n} is not a power of two")
    if order is not None and order != v:
        raise CliError(EXIT_CONFIG, "config", f"--order {order} does not match surface side {n}")
    return v


def cmd_run(args) -> int:
    started = time.time()
    cfg = load_config(args.config, seed=args.seed, output=args.out, crop=args.crop)
    log.info("running %s (seed %d, config %s) -> %s", cfg.name, cfg.seed, cfg.config_hash(), cfg.output)
    result = run_experiment(cfg)
    summary = write_artifacts(result, force=args.force, started=started)
    print(json.dumps({k: summary[k] for k in ("config_hash", "steps", "least_squares_rms_nm", "final_rms_nm")}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    seeds = args.seeds if len(args.seeds) > 1 else list(range(args.seeds[0]))
    base = load_config(args.config, output=args.out, crop=args.crop)
    root = Path(base.output)
    rows = []
    for seed in seeds:
        cfg = load_config(args.config, seed=seed, output=str(root / f"seed_{seed}"), crop=args.crop)
        summary = write_artifacts(run_experiment(cfg), force=args.force, started=time.time())
        rows.append((seed, summary["least_squares_rms_nm"], summary["final_rms_nm"], summary["steps"]))
        log.info("seed %d: ls %.3f nm -> %.3f nm", seed, rows[-1][1], rows[-1][2])
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "sweep.csv", "w") as fh:
        fh.write("seed,least_squares_rms_nm,final_rms_nm,steps\n")
        for seed, ls, fin, steps in rows:
            fh.write(f"{seed},{ls!r},{fin!r},{steps}\n")
    ratio = float(np.median([r[2] for r in rows]) / np.median([r[1] for r in rows]))
    print(json.dumps({"seeds": len(rows), "median_final_over_ls": ratio}))
    return EXIT_OK


def cmd_decompose(args) -> int:
    w = read_surface(args.surface)
    order = _order_for(w.shape[0], args.order)
    basis = build_basis(order, args.modes)
    write_coeffs(args.output, project(basis, w), args.modes)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    a, m = read_coeffs(args.coeffs)
    basis = build_basis(args.order, m)
    write_surface(args.output, reconstruct(basis, a))
    return EXIT_OK


def cmd_rms(args) -> int:
    a, b = read_surface(args.a), read_surface(args.b)
    if a.shape != b.shape:
        raise CliError(EXIT_CONFIG, "config", f"surface shapes differ: {a.shape} vs {b.shape}")
    if 2 * args.crop >= a.shape[0]:
        raise CliError(EXIT_CONFIG, "config", "--crop leaves no pixels", "crop")
    print(repr(cropped_rms(a, b, args.crop)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="walshdm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="calibrate and run the closed loop for one config")
    p.add_argument("--config", required=True, help=f"config path or bundled name ({', '.join(bundled_configs())})")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--crop", type=int, help="also report RMS over the centre, dropping PX pixels per side")
    p.add_argument("--force", action="store_true", help="overwrite results from a different config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one config over several seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=[10],
                   help="explicit seeds, or a single count N meaning 0..N-1")
    p.add_argument("--out")
    p.add_argument("--crop", type=int)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("decompose", help="Walsh coefficients of a surface file")
    p.add_argument("surface")
    p.add_argument("--order", type=int, help="V with n = 2**V (inferred from the file when omitted)")
    p.add_argument("--modes", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct", help="surface file from a coefficient file")
    p.add_argument("coeffs")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("rms", help="RMS difference of two surface files (nm)")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--crop", type=int, default=0)
    p.set_defaults(func=cmd_rms)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        err = exc
    except ConfigError as exc:
        err = CliError(EXIT_CONFIG, "config", str(exc), exc.field)
    except (OutputConflict, FormatError, FileNotFoundError) as exc:
        err = CliError(EXIT_CONFIG, type(exc).__name__, str(exc))
    except ValueError as exc:
        err = CliError(EXIT_CONFIG, "invalid_input", str(exc))
    except (NumericalFailure, RankDeficientBatch, BvlsNotConverged, np.linalg.LinAlgError) as exc:
        err = CliError(EXIT_NUMERIC, "numerical", str(exc))
    print(json.dumps(err.record()), file=sys.stderr)
    return err.code


if __name__ == "__main__":
    sys.exit(main())
