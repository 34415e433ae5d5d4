"""Command-line entry point.

Exit codes: 0 success, 2 configuration or argument error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (ConfigError, derived_constants, inspect_codebook, inspect_pattern,
                          load_config, run_sweep)

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chirpbeam", description="Near-field chirp beam training")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="TOML experiment config")
        sp.add_argument("--seed", type=int, default=None, help="override run.seed")

    sw = sub.add_parser("sweep", help="run a Monte-Carlo sweep and write CSV + manifest")
    common(sw)
    sw.add_argument("-o", "--output", help="override run.output")

    pa = sub.add_parser("pattern", help="write the k-b coherence map of one chirp")
    common(pa)
    pa.add_argument("--k0", type=float, required=True)
    pa.add_argument("--b0", type=float, required=True)
    pa.add_argument("--res", type=int, nargs=2, default=(64, 256), metavar=("NK", "NB"))
    pa.add_argument("--b-span", type=float, default=None)
    pa.add_argument("-o", "--output", default="pattern.txt")

    cb = sub.add_parser("codebook", help="export a codebook as CSV")
    common(cb)
    cb.add_argument("--which", default="top",
                    help="top, layer:<l>, elementary, dft or distance-ring")
    cb.add_argument("--vectors", action="store_true", help="include codeword entries")
    cb.add_argument("-o", "--output", default="codebook.csv")

    co = sub.add_parser("constants", help="print derived system constants as JSON")
    common(co)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.seed)
        if args.command == "sweep":
            out = Path(args.output or cfg.output)
            res = run_sweep(cfg, out)
            print(f"wrote {len(res.rows)} rows to {out}")
        elif args.command == "pattern":
            out = inspect_pattern(cfg.system, args.k0, args.b0, tuple(args.res), args.output,
                                  args.b_span)
            print(f"wrote {out}")
        elif args.command == "codebook":
            n = inspect_codebook(cfg.system, args.which, args.output, args.vectors, cfg.n_rings)
            print(f"wrote {n} codewords to {args.output}")
            print(json.dumps(derived_constants(cfg.system), indent=2))
        else:
            print(json.dumps(derived_constants(cfg.system), indent=2))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
