"""Command line entry point: ``pdcfnet {train,enhance,eval,hist}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import checkpoint
from .errors import CheckpointError, DataError, NumericalError
from .evaluate import evaluate
from .imageio import histogram_dump, load_dataset
from .losses import LossConfig
from .network import NetworkConfig
from .train import TrainConfig, enhance, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pdcfnet", description="Underwater image enhancement with pixel difference convolutions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model on DIR/raw + DIR/ref")
    t.add_argument("--data", required=True)
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--lr", type=float, default=2e-5)
    t.add_argument("--batch", type=int, default=1)
    t.add_argument("--size", type=int, default=256)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--channels", type=int, default=32)
    t.add_argument("--max-steps", type=int, default=None)
    t.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    t.add_argument("--no-pdc", action="store_true", help="swap PDC paths for plain 3x3 convs")
    t.add_argument("--no-l2", action="store_true")
    t.add_argument("--no-ssim-loss", action="store_true")
    t.add_argument("--no-edge-loss", action="store_true")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", default=None, help="epoch log path (default: <out>.log)")

    e = sub.add_parser("enhance", help="run a checkpoint over a directory of images")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--in", dest="inputs", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--size", type=int, default=None)

    v = sub.add_parser("eval", help="compute quality metrics")
    v.add_argument("--pred", required=True)
    v.add_argument("--ref", default=None)
    v.add_argument("--report", required=True, help="output stem; writes .csv and .json")
    v.add_argument("--no-reference", action="store_true")

    h = sub.add_parser("hist", help="dump a 256-bin RGB histogram as CSV")
    h.add_argument("--in", dest="image", required=True)
    h.add_argument("--out", required=True)
    return p


def _train(args) -> None:
    try:
        net = NetworkConfig(base_channels=args.channels, ablate_pdc=args.no_pdc)
        loss = LossConfig(use_l2=not args.no_l2, use_ssim=not args.no_ssim_loss, use_edge=not args.no_edge_loss)
        if not (loss.use_l2 or loss.use_ssim or loss.use_edge):
            raise ValueError("all loss terms disabled")
        cfg = TrainConfig(epochs=args.epochs, lr=args.lr, batch=args.batch, size=args.size, seed=args.seed,
                          loss=loss, network=net, max_steps=args.max_steps, dtype=args.dtype)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    data = load_dataset(args.data, cfg.size)
    result = train(data, cfg, out=args.out, log_path=args.log or f"{args.out}.log")
    print("\n".join(result.log_lines()))


def _enhance(args) -> None:
    model = checkpoint.load(args.ckpt)
    for path in enhance(model, args.inputs, args.out, args.size):
        print(path)


def _eval(args) -> None:
    if args.ref is None and not args.no_reference:
        raise _UsageError("eval needs --ref or --no-reference")
    rep = evaluate(args.pred, args.ref, args.report, args.no_reference)
    print(rep.table_header())
    print(rep.table_row())


def _hist(args) -> None:
    histogram_dump(args.image, args.out)


class _UsageError(Exception):
    pass


COMMANDS = {"train": _train, "enhance": _enhance, "eval": _eval, "hist": _hist}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"pdcfnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError, FileNotFoundError) as exc:
        print(f"pdcfnet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"pdcfnet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
