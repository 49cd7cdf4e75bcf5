"""Classifier serialization: knowledge triples plus solved weights.

Same binary conventions as the embedding file format: little-endian, a
4-byte magic, a u32 version, then fixed-width fields.  Knowledge is stored
in float64, matching the learner's internal precision.

    header = magic "CCLS" | version u32 (=1) | input_dim u32 | num_classes u32
             | regularization f64 | clamp_epsilon f64
    per class = class_id u32 | sample_count u64 | rank u32
                | moment (input_dim+1) f64
                | basis (input_dim+1)*rank f64 (row-major)
                | singular rank f64
                | weights (input_dim+1) f64
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .errors import DataFormatError
from .rolann import LogisticActivation, NeuronKnowledge, ROLANNClassifier

MAGIC = b"CCLS"
FORMAT_VERSION = 1


def save_classifier(classifier: ROLANNClassifier, path) -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(
        struct.pack(
            "<IIIdd",
            FORMAT_VERSION,
            classifier.input_dim,
            classifier.num_classes,
            classifier.regularization,
            classifier.activation.clamp_epsilon,
        )
    )
    for class_id in classifier.classes:
        knowledge = classifier.knowledge(class_id)
        weights = classifier.weights(class_id)
        buf.write(
            struct.pack("<IQI", class_id, knowledge.sample_count, knowledge.rank)
        )
        buf.write(np.ascontiguousarray(knowledge.moment, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(knowledge.basis, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(knowledge.singular, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(weights, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw = raw
        self.path = path
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.raw):
            raise DataFormatError(
                f"{self.path}: truncated at byte offset {self.offset}, "
                f"needed {n} more bytes, have {len(self.raw) - self.offset}"
            )
        chunk = self.raw[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").copy()


def load_classifier(path) -> ROLANNClassifier:
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), path)
    magic = reader.take(4)
    if magic != MAGIC:
        raise DataFormatError(
            f"{path}: bad magic {magic!r} at byte offset 0, expected {MAGIC!r}"
        )
    version, input_dim, num_classes, regularization, clamp_epsilon = struct.unpack(
        "<IIIdd", reader.take(struct.calcsize("<IIIdd"))
    )
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    classifier = ROLANNClassifier(
        input_dim,
        regularization=regularization,
        activation=LogisticActivation(clamp_epsilon=clamp_epsilon),
    )
    d_aug = input_dim + 1
    for _ in range(num_classes):
        class_id, sample_count, rank = struct.unpack(
            "<IQI", reader.take(struct.calcsize("<IQI"))
        )
        moment = reader.floats(d_aug)
        basis = reader.floats(d_aug * rank).reshape(d_aug, rank)
        singular = reader.floats(rank)
        weights = reader.floats(d_aug)
        classifier._knowledge[class_id] = NeuronKnowledge(
            moment=moment,
            basis=basis,
            singular=singular,
            sample_count=sample_count,
        )
        classifier._weights[class_id] = weights
    if reader.offset != len(reader.raw):
        raise DataFormatError(
            f"{path}: {len(reader.raw) - reader.offset} trailing bytes "
            f"after byte offset {reader.offset}"
        )
    return classifier
