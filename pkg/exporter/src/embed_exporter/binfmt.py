"""Writer for the embedding file format consumed by the training engine.

Little-endian; header = magic "CEMB", version u32 (=1), dim u32, count u64,
label_width u32 (=4); payload = count interleaved records of
(label u32, dim * float32).  This module implements the published format
directly so the exporter has no dependency on the engine package.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"CEMB"
FORMAT_VERSION = 1
LABEL_WIDTH = 4
HEADER_BYTES = 24


def record_bytes(dim: int) -> int:
    return LABEL_WIDTH + 4 * dim


def file_bytes(dim: int, count: int) -> int:
    """Exact on-disk size of an export with ``count`` ``dim``-d records."""
    return HEADER_BYTES + count * record_bytes(dim)


def write_embedding_file(path, embeddings: np.ndarray, labels: np.ndarray) -> None:
    """Atomically write embeddings/labels in the binary format.

    ``embeddings`` is (count, dim) float32, ``labels`` (count,) unsigned
    ints.  The file appears under ``path`` only once fully written.
    """
    embeddings = np.ascontiguousarray(embeddings, dtype=np.float32)
    labels = np.asarray(labels)
    count, dim = embeddings.shape
    if labels.shape != (count,):
        raise ValueError(
            f"label count {labels.shape} does not match {count} embeddings"
        )
    if labels.size and (labels.min() < 0 or labels.max() > 0xFFFFFFFF):
        raise ValueError("labels must fit in an unsigned 32-bit integer")

    header = MAGIC + struct.pack("<IIQI", FORMAT_VERSION, dim, count, LABEL_WIDTH)

    records = np.empty(
        count, dtype=np.dtype([("label", "<u4"), ("vec", "<f4", (dim,))])
    )
    records["label"] = labels.astype(np.uint32)
    records["vec"] = embeddings

    tmp_path = f"{os.fspath(path)}.tmp"
    with open(tmp_path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())
    os.replace(tmp_path, path)
