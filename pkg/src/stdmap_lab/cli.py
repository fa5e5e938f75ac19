"""Command line: ``stdmap-lab run|list-presets|report``."""
from __future__ import annotations

import argparse
import sys

from .presets import get_preset, list_presets
from .runner import ConfigError, ExperimentConfig, emit_report, load_config, run

USAGE_ERROR = 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stdmap-lab", description="Standard-map composition experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a config file or a preset")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", metavar="PATH")
    src.add_argument("--preset", metavar="NAME")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--out", metavar="DIR")
    sub.add_parser("list-presets", help="print preset names, runtimes and provenance")
    rep = sub.add_parser("report", help="summarise a finished run directory")
    rep.add_argument("dir")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-presets":
        print(list_presets())
        return 0
    if args.command == "report":
        try:
            print(emit_report(args.dir))
        except FileNotFoundError as e:
            print(f"error: {e}", file=sys.stderr)
            return USAGE_ERROR
        return 0
    try:
        if args.preset:
            cfg = get_preset(args.preset).build(seed=args.seed, threads=args.threads, output=args.out)
        else:
            base = load_config(args.config)
            d = base.to_dict()
            for k in ("seed", "threads"):
                if getattr(args, k) is not None:
                    d[k] = getattr(args, k)
            if args.out is not None:
                d["output"] = args.out
            cfg = ExperimentConfig.from_dict(d)
    except ConfigError as e:
        for p in e.problems:
            print(f"config error: {p}", file=sys.stderr)
        return USAGE_ERROR
    except KeyError as e:
        print(f"error: {e.args[0]}", file=sys.stderr)
        return USAGE_ERROR
    status = run(cfg, preset=args.preset)
    print(emit_report(cfg.output).splitlines()[0])
    return status


if __name__ == "__main__":
    sys.exit(main())
