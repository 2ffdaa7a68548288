"""
Command line entry point.

    pilotfree simulate --config run.toml [--out results.csv] [--seed N] [--workers N]
    pilotfree pattern --config run.toml --export patterns.txt
    pilotfree coherence --scs 30e3 --ds 30e-9 --speed 16.7 --carrier 4e9

Exit codes: 0 success, 2 configuration error, 3 numerical or I/O failure.
"""

import argparse
import logging
import math
import sys

import numpy as np

from ..errors import ConfigurationError, PatternInfeasibleError
from ..grid import (
    GridDims,
    coherence_block,
    export_patterns,
    make_layer_patterns,
    partition_subgrids,
    select_pattern_kind,
)
from .config import KMH, load_config
from .results import write_csv, write_meta
from .sim import sweep

log = logging.getLogger("pilotfree")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _simulate(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["output"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        cfg = cfg.replace(**overrides).validate()
    log.info("running %d point(s) x %d seed(s) x %d frame(s)",
             len(cfg.sweep_points), cfg.seeds, cfg.frames_per_seed)
    result = sweep(cfg)
    write_csv(result.rows, cfg.output)
    write_meta(result.meta, cfg.output + ".meta.json")
    print(f"wrote {len(result.rows)} rows to {cfg.output}")
    return EXIT_OK


def _pattern(args):
    cfg = load_config(args.config)
    dims = GridDims(cfg.n_rb, cfg.n_symbols, len(cfg.decoded_layers))
    pt = cfg.points()[0]
    layout = partition_subgrids(dims, pt.n_bsg)
    patterns = make_layer_patterns(dims, layout, pt.kind, cfg.n_per_rb)
    with open(args.export, "w", encoding="utf-8") as fh:
        fh.write(export_patterns(patterns))
    print(f"exported {len(patterns)} layer pattern(s), view length "
          f"{patterns[0].view_length}, {layout.subgrid_count} sub-grid(s) to {args.export}")
    return EXIT_OK


def _fmt_count(x):
    return "unbounded" if math.isinf(x) else f"{int(x)}"


def _coherence(args):
    speed = args.speed if args.speed_kmh is None else args.speed_kmh * KMH
    blk = coherence_block(args.scs, args.ds, speed, args.carrier)
    kind = select_pattern_kind(args.scs, args.ds, speed, args.carrier, args.n_symbols)
    bc = "inf" if math.isinf(blk.bandwidth_hz) else f"{blk.bandwidth_hz / 1e6:.3f} MHz"
    tc = "inf" if math.isinf(blk.time_s) else f"{blk.time_s * 1e3:.3f} ms"
    print(f"coherence bandwidth: {bc} ({_fmt_count(blk.subcarriers)} subcarriers)")
    print(f"coherence time: {tc} ({_fmt_count(blk.symbols)} symbols)")
    print(f"recommended pattern: {kind.value}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="pilotfree", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run a Monte-Carlo sweep")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int, help="master seed (u64)")
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=_simulate)

    pp = sub.add_parser("pattern", help="export the repetition patterns of a config")
    pp.add_argument("--config", required=True)
    pp.add_argument("--export", required=True)
    pp.set_defaults(func=_pattern)

    cp = sub.add_parser("coherence", help="coherence block and recommended pattern")
    cp.add_argument("--scs", type=float, required=True, help="subcarrier spacing [Hz]")
    cp.add_argument("--ds", type=float, required=True, help="rms delay spread [s]")
    g = cp.add_mutually_exclusive_group(required=True)
    g.add_argument("--speed", type=float, help="UE speed [m/s]")
    g.add_argument("--speed-kmh", type=float, help="UE speed [km/h]")
    cp.add_argument("--carrier", type=float, required=True, help="carrier frequency [Hz]")
    cp.add_argument("--n-symbols", type=int, default=14)
    cp.set_defaults(func=_coherence)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "simulate" and args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigurationError, PatternInfeasibleError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, ArithmeticError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
