"""Command-line entry point.

Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
3 data error, 4 runtime/contract error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from maeeg.data import write_eegb
from maeeg.errors import ConfigError, MaeegError
from maeeg.harness.config import OUT_ENV, load_config_file, output_dir, resolve, write_resolved
from maeeg.harness.experiments import COMMANDS, get_dataset

log = logging.getLogger("maeeg")

DESCRIPTIONS = {
    "pretrain": "self-supervised pretraining (maeeg or bendr)",
    "probe": "frozen-encoder linear probe on a checkpoint",
    "finetune": "fine-tune checkpoints (and optionally a random-init baseline)",
    "mask-sweep": "rate x chunks systematic-mask grid over label fractions",
    "span-sweep": "single-span mask sweep for both modes",
    "attention": "dump a head-averaged attention map",
    "report": "render SVG plots and a summary CSV for an output directory",
    "synth": "write the synthetic corpus to an EEGB file",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=["maeeg", "bendr"])
    common.add_argument("--sample-length", type=int, choices=[30, 100])
    common.add_argument("--mask-rate", type=float)
    common.add_argument("--mask-chunks", type=int)
    common.add_argument("--mask-span", type=int)
    common.add_argument("--label-fraction", type=float)
    common.add_argument("--with-baseline", action="store_true", default=None)
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV}/<command> or runs/<command>)")
    common.add_argument("--checkpoint", help="model checkpoint (.maec)")
    common.add_argument("--data", help="EEGB or CSV dataset; synthetic corpus when omitted")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="maeeg", description="Masked auto-encoder pretraining for EEG.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in DESCRIPTIONS.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def _overrides(args) -> dict:
    values = {
        "seed": args.seed,
        "mode": args.mode,
        "sample_length": args.sample_length,
        "mask_rate": args.mask_rate,
        "mask_chunks": args.mask_chunks,
        "mask_span": args.mask_span,
        "label_fraction": args.label_fraction,
        "with_baseline": args.with_baseline,
        "out": args.out,
        "checkpoint": args.checkpoint,
        "data": args.data,
    }
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def cmd_synth(cfg: dict) -> dict:
    out = output_dir(cfg, "synth")
    write_resolved(cfg, out, "synth")
    path = out / "corpus.eegb"
    write_eegb(get_dataset(cfg), path)
    return {"out": out, "path": path}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cfg = resolve(file_values, _overrides(args))
        handler = cmd_synth if args.command == "synth" else COMMANDS[args.command]
        result = handler(cfg)
    except MaeegError as exc:
        print(f"maeeg {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 -- anything else is an unexpected failure
        log.debug("unexpected failure", exc_info=True)
        print(f"maeeg {args.command}: unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"maeeg {args.command}: wrote {result['out']}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
