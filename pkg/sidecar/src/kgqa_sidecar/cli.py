"""Standalone CLI: train a toy generator, produce beams files, and embed
relation labels into the core's vector-file formats."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgqa-sidecar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fine-tune the toy generator")
    train.add_argument("--pairs", required=True, help="training pairs JSONL")
    train.add_argument("--out", required=True, help="checkpoint directory")
    train.add_argument("--epochs", type=int, default=250)
    train.add_argument("--lr", type=float, default=3e-3)
    train.add_argument("--seed", type=int, default=0)

    gen = sub.add_parser("generate", help="decode beams for a questions file")
    gen.add_argument("--checkpoint", required=True)
    gen.add_argument("--questions", required=True, help="JSONL with qid + question")
    gen.add_argument("--out", required=True)
    gen.add_argument("--beams", type=int, default=3)
    gen.add_argument("--max-length", type=int, default=96)

    embed = sub.add_parser("embed", help="embed labels into vector files")
    embed.add_argument("--labels", required=True,
                       help="lines of <label> or <id>\\t<label>")
    embed.add_argument("--out", required=True)
    embed.add_argument("--dim", type=int, default=64)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "train":
        from .seq2seq import TrainingJob, train_from_pairs

        out = train_from_pairs(TrainingJob(
            pairs_file=Path(args.pairs), out_dir=Path(args.out),
            epochs=args.epochs, learning_rate=args.lr, seed=args.seed))
        print(f"checkpoint written to {out}")
        return 0
    if args.command == "generate":
        from .generate import GenerationJob, generate_beams

        out = generate_beams(GenerationJob(
            checkpoint_dir=Path(args.checkpoint), questions_file=Path(args.questions),
            out_path=Path(args.out), beam_count=args.beams,
            max_length=args.max_length))
        print(f"beams written to {out}")
        return 0
    from .embed import EmbeddingJob, embed_labels

    out = embed_labels(EmbeddingJob(labels_file=Path(args.labels),
                                    out_path=Path(args.out), dim=args.dim))
    print(f"vectors written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
