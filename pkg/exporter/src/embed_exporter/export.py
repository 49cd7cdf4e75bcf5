"""One-shot export of an image dataset into the embedding file format.

Images flow through a frozen backbone in evaluation mode with deterministic
preprocessing (resize, center crop, normalize -- never augmentation), and
the pooled penultimate activations are written as float32 records together
with dense integer labels.  A sidecar JSON documents the backbone, the
transform pipeline and the class-list mapping so an export is reproducible
from its metadata alone.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torchvision import transforms

from .backbone import load_backbone, parameter_checksum
from .binfmt import write_embedding_file

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}

TRANSFORM_DESCRIPTION = (
    "RGB -> Resize(256) -> CenterCrop(224) -> ToTensor -> "
    "Normalize(mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225])"
)


def evaluation_transform() -> transforms.Compose:
    return transforms.Compose(
        [
            transforms.Resize(256),
            transforms.CenterCrop(224),
            transforms.ToTensor(),
            transforms.Normalize(
                mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
            ),
        ]
    )


@dataclass(frozen=True)
class ExportSpec:
    """What to export and how."""

    source: str  # image directory (class-per-subdirectory) or "cifar100"
    output_path: str
    backbone: str = "resnet18"
    weights: str = "pretrained"  # or "random" (seeded, offline plumbing only)
    class_list: str | None = None  # text file, one class name per line
    split: str = "train"  # for named datasets with built-in splits
    dataset_root: str | None = None  # storage root for named datasets
    batch_size: int = 64
    device: str = "cpu"
    expected_dim: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class ExportResult:
    output_path: str
    metadata_path: str
    count: int
    dim: int
    class_names: tuple[str, ...]
    checksum_before: str
    checksum_after: str


def _read_class_list(path) -> list[str]:
    names = [line.strip() for line in Path(path).read_text().splitlines()]
    names = [n for n in names if n and not n.startswith("#")]
    if len(set(names)) != len(names):
        raise ValueError(f"{path}: duplicate class names in class list")
    return names


def _scan_image_folder(root: Path) -> tuple[list[str], dict[str, list[Path]]]:
    if not root.is_dir():
        raise FileNotFoundError(f"image directory not found: {root}")
    classes = sorted(d.name for d in root.iterdir() if d.is_dir())
    if not classes:
        raise ValueError(f"{root}: no class subdirectories found")
    files: dict[str, list[Path]] = {}
    for name in classes:
        files[name] = sorted(
            p
            for p in (root / name).iterdir()
            if p.suffix.lower() in _IMAGE_SUFFIXES
        )
    return classes, files


def _resolve_classes(available: list[str], spec: ExportSpec) -> list[str]:
    """Export class order: the class-list file's order, or sorted names."""
    if spec.class_list is None:
        return sorted(available)
    wanted = _read_class_list(spec.class_list)
    missing = [name for name in wanted if name not in set(available)]
    if missing:
        raise ValueError(
            f"class list names classes absent from the dataset: {missing}"
        )
    return wanted


def _iter_image_folder(spec: ExportSpec, class_to_id: dict[str, int],
                       files: dict[str, list[Path]]):
    from PIL import Image

    for name, class_id in class_to_id.items():
        for path in files[name]:
            with Image.open(path) as img:
                yield img.convert("RGB"), class_id


def _iter_cifar100(spec: ExportSpec, class_to_id: dict[str, int], dataset):
    for image, target in zip(dataset.data, dataset.targets):
        name = dataset.classes[target]
        if name in class_to_id:
            from PIL import Image

            yield Image.fromarray(image).convert("RGB"), class_to_id[name]


def export_embeddings(spec: ExportSpec) -> ExportResult:
    """Run the frozen backbone over the dataset and write the binary file."""
    if spec.batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {spec.batch_size}")

    # resolve the dataset before touching the backbone: cheap failures first
    if spec.source == "cifar100":
        from torchvision.datasets import CIFAR100

        root = spec.dataset_root or "data"
        dataset = CIFAR100(root=root, train=spec.split == "train", download=False)
        class_names = _resolve_classes(list(dataset.classes), spec)
        class_to_id = {name: i for i, name in enumerate(class_names)}
        sample_iter = _iter_cifar100(spec, class_to_id, dataset)
    else:
        available, files = _scan_image_folder(Path(spec.source))
        class_names = _resolve_classes(available, spec)
        class_to_id = {name: i for i, name in enumerate(class_names)}
        sample_iter = _iter_image_folder(spec, class_to_id, files)

    model, dim = load_backbone(spec.backbone, weights=spec.weights, seed=spec.seed)
    if spec.expected_dim is not None and spec.expected_dim != dim:
        raise ValueError(
            f"backbone {spec.backbone!r} produces {dim}-d embeddings, "
            f"but {spec.expected_dim} was declared"
        )
    device = torch.device(spec.device)
    model = model.to(device)
    checksum_before = parameter_checksum(model)

    transform = evaluation_transform()
    chunks: list[np.ndarray] = []
    labels: list[int] = []
    batch_images: list[torch.Tensor] = []

    def flush():
        if not batch_images:
            return
        stacked = torch.stack(batch_images).to(device)
        with torch.inference_mode():
            features = model(stacked)
        chunks.append(features.cpu().numpy().astype(np.float32))
        batch_images.clear()

    for image, class_id in sample_iter:
        batch_images.append(transform(image))
        labels.append(class_id)
        if len(batch_images) == spec.batch_size:
            flush()
    flush()

    embeddings = (
        np.concatenate(chunks, axis=0)
        if chunks
        else np.zeros((0, dim), dtype=np.float32)
    )
    if embeddings.shape[1] != dim:
        raise ValueError(
            f"backbone emitted {embeddings.shape[1]}-d features, expected {dim}"
        )
    write_embedding_file(
        spec.output_path, embeddings, np.asarray(labels, dtype=np.int64)
    )
    checksum_after = parameter_checksum(model)
    if checksum_after != checksum_before:
        raise RuntimeError("backbone parameters changed during export")

    metadata_path = f"{spec.output_path}.meta.json"
    class_hash = hashlib.sha256("\n".join(class_names).encode()).hexdigest()
    metadata = {
        "backbone": spec.backbone,
        "weights": spec.weights,
        "embedding_dim": dim,
        "transform": TRANSFORM_DESCRIPTION,
        "source": spec.source,
        "split": spec.split,
        "count": int(embeddings.shape[0]),
        "class_names": list(class_names),
        "class_list_hash": class_hash,
        "parameter_checksum": checksum_after,
    }
    with open(metadata_path, "w") as fh:
        json.dump(metadata, fh, sort_keys=True, indent=2)
        fh.write("\n")

    return ExportResult(
        output_path=str(spec.output_path),
        metadata_path=metadata_path,
        count=int(embeddings.shape[0]),
        dim=dim,
        class_names=tuple(class_names),
        checksum_before=checksum_before,
        checksum_after=checksum_after,
    )
