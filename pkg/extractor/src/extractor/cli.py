"""extract: batch embedding and response extraction.

Subcommands: embed-images, embed-texts, vqa, caption. Outputs are exactly
the audit toolkit's interchange formats, plus a provenance sidecar JSON
per run.
"""

import argparse
import sys

from .embed import embed_images, embed_texts
from .generate import DEFAULT_TOP_P, run_captioning, run_vqa
from .jobs import ExtractionJob, JobError, load_metadata, resolve_model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extract")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, images=True):
        p.add_argument("--model", required=True,
                       help="model id or local checkpoint directory")
        p.add_argument("--checkpoint", help="checkpoint directory overriding the model id")
        p.add_argument("--out", required=True)
        if images:
            p.add_argument("--images", required=True, help="image directory")
            p.add_argument("--meta", required=True, help="metadata CSV (id,group)")
            p.add_argument("--skip-undecodable", action="store_true")

    common(sub.add_parser("embed-images"))
    p = sub.add_parser("embed-texts")
    common(p, images=False)
    p.add_argument("--prompts", required=True, help="prompts JSON")
    p = sub.add_parser("vqa")
    common(p)
    p.add_argument("--question", required=True)
    p = sub.add_parser("caption")
    common(p)
    p.add_argument("--top-p", type=float, nargs="+", default=list(DEFAULT_TOP_P))
    p.add_argument("--seed", type=int, default=0)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = resolve_model(args.model, args.checkpoint)
        if args.command == "embed-texts":
            n = embed_texts(spec, args.prompts, args.out)
            print(f"embedded {n} texts -> {args.out}")
            return 0
        job = ExtractionJob(
            model=spec,
            image_dir=args.images,
            metadata=load_metadata(args.meta),
            skip_undecodable=getattr(args, "skip_undecodable", False),
        )
        if args.command == "embed-images":
            n = embed_images(job, args.out)
            print(f"embedded {n} images -> {args.out}")
        elif args.command == "vqa":
            n = run_vqa(job, args.question, args.out)
            print(f"wrote {n} answers -> {args.out}")
        elif args.command == "caption":
            n = run_captioning(job, args.out, top_p_values=args.top_p, seed=args.seed)
            print(f"wrote {n} captions -> {args.out}")
        return 0
    except JobError as exc:
        print(f"extract: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
