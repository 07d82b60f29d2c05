"""Command line entry point.

    toponet run --config e1.yaml --out runs/e1
    toponet generate --config e1.yaml --out runs/e1
    toponet train --out runs/e1            # reuses runs/e1/config.yaml
    toponet run --out runs/e1 --stage analyze --force

Exit codes: 0 success, 1 invalid config or arguments, 2 runtime failure
(training divergence, missing upstream artifacts, unreadable files).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .data import ShapeError
from .io import FormatError
from .network import DivergenceError
from .pipeline import STAGES, StageError, resolve_config, run, run_stage

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    parser = argparse.ArgumentParser(prog="toponet", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + STAGES:
        p = sub.add_parser(name, parents=[common], help=f"{name} stage" if name != "run" else "full pipeline")
        p.add_argument("--config", type=Path, help="experiment YAML file")
        p.add_argument("--out", type=Path, help="output directory (overrides config 'output')")
        p.add_argument("--seed", type=int, help="training seed, overrides the config")
        p.add_argument("--force", action="store_true", help="overwrite this stage's outputs")
        if name == "run":
            p.add_argument("--stage", choices=STAGES, help="run only this stage")
        if name == "trace":
            p.add_argument("--network", type=Path, help="checkpoint to trace (default: OUT/network.txt)")
            p.add_argument("--data", type=Path, help="dataset to trace (default: OUT/dataset.csv)")
    return parser


def _out_dir(args, cfg):
    out = args.out or (Path(cfg.output) if cfg is not None and cfg.output else None)
    if out is None:
        raise ConfigError("no output directory: pass --out or set 'output' in the config")
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = load_config(args.config, args.seed) if args.config else None
        out = _out_dir(args, cfg)
        stage = args.command if args.command != "run" else args.stage
        if stage is None:
            if cfg is None:
                raise ConfigError("run needs --config")
            run(cfg, out)
        else:
            if cfg is None:
                cfg = load_config(out / "config.yaml", args.seed) if (out / "config.yaml").exists() \
                    else None
            cfg = resolve_config(out, cfg)
            extra = {}
            if stage == "trace" and args.command == "trace":
                extra = {"network_path": args.network, "data_path": args.data}
            run_stage(stage, cfg, out, args.force, **extra)
    except (ConfigError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (StageError, FormatError, FileNotFoundError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
