"""Command-line entry point: one subcommand per experiment."""
from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from ..descriptors import DescriptorError
from .config import COMMON, OPTIONS, SUBCOMMANDS, ConfigError, ExperimentConfig, read_config_file
from .experiments import EXPERIMENTS

HELP = {
    "estimate": "estimate one functional (M, Mstar, Mtilde, MKB, A, ctheta, quasi)",
    "cover": "greedy covering counts N(K, tB)",
    "jl": "empirical JL failure rates",
    "section": "gauge lower bound on random proportional sections",
    "project": "containment PD in C PK for random projections",
    "global": "containment D in C(K + UK) for random rotations",
    "l1": "M-tilde against M* for the l_1 ball",
    "fact": "projection containment with the covering exponent alpha",
}


def _typed(parse):
    def conv(text):
        try:
            return parse(text)
        except ConfigError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return conv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qclab", description="Quasi-convex geometry experiments.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for cmd, (_, keys, defaults) in SUBCOMMANDS.items():
        sp = sub.add_parser(cmd, help=HELP[cmd], description=HELP[cmd])
        sp.add_argument("--config", metavar="FILE", help="key=value file; command-line flags win")
        for key in tuple(keys) + COMMON:
            opt = OPTIONS[key]
            flag = "--" + key.replace("_", "-")
            default = defaults.get(key)
            text = opt.help + (f" (default: {default})" if default is not None and not opt.flag else "")
            if opt.flag:
                sp.add_argument(flag, dest=key, action="store_true", default=argparse.SUPPRESS, help=text)
            else:
                sp.add_argument(flag, dest=key, type=_typed(opt.parse), metavar=opt.metavar,
                                default=argparse.SUPPRESS, help=text)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    base_dir = None
    if getattr(args, "config", None):
        file_values = read_config_file(args.config)
        exp = file_values.pop("experiment", None)
        if exp is not None and exp not in (args.command, SUBCOMMANDS[args.command][0]):
            raise ConfigError(f"config file is for {exp!r}, not {args.command!r}")
        base_dir = os.path.dirname(os.path.abspath(args.config))
        for key in ("output", "centers_out"):
            if key in file_values:
                file_values[key] = os.path.join(base_dir, file_values[key])
        file_values.update(values)
        values = file_values
    return ExperimentConfig.build(args.command, values, base_dir)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one experiment; exit code 0 on success, 2 on bad input, 1 on runtime failure."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = EXPERIMENTS[cfg.command](cfg)
    except (ConfigError, DescriptorError) as exc:
        parser.error(str(exc))
    except Exception as exc:
        print(f"qclab {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if cfg.output is None:
        sys.stdout.write(report.to_csv())
        print(report.summary, file=sys.stderr)
    else:
        report.write(cfg.output)
        print(report.summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
