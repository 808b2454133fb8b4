"""Command line entry points: serve (wire protocol) and finetune."""

from __future__ import annotations

import argparse
import sys

from .config import AdapterConfig
from .serve import EchoBackend, ModelBackend, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facetag-adapter")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("serve", help="answer wire-protocol requests on stdio")
    sp.add_argument("--mode", choices=["echo", "model"], default="model")
    sp.add_argument("--checkpoint", help="checkpoint path or model id (model mode)")
    sp.add_argument("--beam", type=int, default=None, help="override beam width")

    ft = sub.add_parser("finetune", help="fine-tune a seq2seq checkpoint")
    ft.add_argument("--examples", required=True, help="example JSONL file")
    ft.add_argument("--out-dir", required=True)
    ft.add_argument("--fold", type=int, default=None,
                    help="hold this fold out of training")
    ft.add_argument("--model-id", default=None)
    ft.add_argument("--batch-size", type=int, default=None)
    ft.add_argument("--grad-accumulation", type=int, default=None)
    ft.add_argument("--learning-rate", type=float, default=None)
    ft.add_argument("--max-epochs", type=int, default=None)
    ft.add_argument("--patience", type=int, default=None)
    return parser


def config_from_args(args) -> AdapterConfig:
    overrides = {
        name: getattr(args, name)
        for name in (
            "model_id", "batch_size", "grad_accumulation",
            "learning_rate", "max_epochs", "patience",
        )
        if getattr(args, name, None) is not None
    }
    return AdapterConfig(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        if args.mode == "echo":
            backend = EchoBackend()
        else:
            if not args.checkpoint:
                print("serve --mode model needs --checkpoint", file=sys.stderr)
                return 2
            config = AdapterConfig(
                **({"beam_width": args.beam} if args.beam is not None else {})
            )
            backend = ModelBackend(args.checkpoint, config)
        return serve(backend)
    if args.command == "finetune":
        from .model import finetune

        finetune(args.examples, args.out_dir, config_from_args(args), args.fold)
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
