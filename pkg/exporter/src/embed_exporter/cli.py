"""Command-line interface for the embedding exporter."""

from __future__ import annotations

import argparse
import sys

from .backbone import available_backbones
from .export import ExportSpec, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description=(
            "Export an image dataset as fixed-backbone embeddings in the "
            "binary format used by the incremental-learning engine."
        ),
    )
    parser.add_argument(
        "source",
        help="image directory with one subdirectory per class, or 'cifar100'",
    )
    parser.add_argument("--out", required=True, help="output embedding file")
    parser.add_argument(
        "--backbone",
        default="resnet18",
        choices=available_backbones(),
        help="frozen feature extractor (default resnet18, 512-d)",
    )
    parser.add_argument(
        "--weights",
        default="pretrained",
        choices=("pretrained", "random"),
        help="pretrained ImageNet weights, or seeded random (plumbing tests)",
    )
    parser.add_argument(
        "--class-list",
        help="text file of class names, one per line; defines dense label order",
    )
    parser.add_argument(
        "--split",
        default="train",
        choices=("train", "test"),
        help="split for named datasets such as cifar100",
    )
    parser.add_argument(
        "--dataset-root", help="storage root for named datasets (default ./data)"
    )
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--dim", type=int, help="declared embedding dimension, verified if given"
    )
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExportSpec(
        source=args.source,
        output_path=args.out,
        backbone=args.backbone,
        weights=args.weights,
        class_list=args.class_list,
        split=args.split,
        dataset_root=args.dataset_root,
        batch_size=args.batch_size,
        device=args.device,
        expected_dim=args.dim,
        seed=args.seed,
    )
    try:
        result = export_embeddings(spec)
    except (ValueError, OSError, RuntimeError) as exc:
        # OSError also covers failed pretrained-weight downloads
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {result.count} records ({result.dim}-d) to {result.output_path}; "
        f"metadata at {result.metadata_path}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
