"""Speaker-embedding cosine similarity (SECS) and embedding-file I/O.

Extraction lives behind the adapter boundary; this module only consumes
vectors. Two interchange formats are read: JSON {utterance_id: [floats]}
and the binary sidecar (magic "EMB1").
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .records import MetricRecord

_EMB_MAGIC = b"EMB1"


@dataclass(frozen=True)
class EmbeddingVector:
    utterance_id: str
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError(f"{self.utterance_id}: embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.utterance_id}: embedding has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.size)


def secs(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1], clamped against rounding.

    The challenge reports this as "SECS"; higher means more similar.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    norm_a = float(np.linalg.norm(a.values))
    norm_b = float(np.linalg.norm(b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    value = float(np.dot(a.values, b.values)) / (norm_a * norm_b)
    return float(np.clip(value, -1.0, 1.0))


def reference_centroid(reference: list[EmbeddingVector]) -> EmbeddingVector:
    """Renormalized arithmetic-mean embedding of the reference utterances.

    With a single enrollment utterance this degenerates to that vector's
    direction.
    """
    if not reference:
        raise ValueError("reference embedding list is empty")
    dims = {v.dim for v in reference}
    if len(dims) != 1:
        raise ValueError(f"reference embeddings disagree on dim: {sorted(dims)}")
    mean = np.mean([v.values for v in reference], axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        raise ValueError("reference centroid is the zero vector")
    return EmbeddingVector(utterance_id="<centroid>", values=mean / norm)


def speaker_secs(
    generated: list[EmbeddingVector],
    reference: list[EmbeddingVector],
    condition: str = "",
) -> list[MetricRecord]:
    """Score each generated utterance against the reference centroid."""
    centroid = reference_centroid(reference)
    return [
        MetricRecord(
            utterance_id=vec.utterance_id,
            metric_name="secs",
            value=secs(vec, centroid),
            condition=condition,
        )
        for vec in generated
    ]


def _check_uniform_dim(vectors: list[EmbeddingVector], path: str) -> None:
    dims = {v.dim for v in vectors}
    if len(dims) > 1:
        raise FormatError(f"{path}: embeddings have mixed dims {sorted(dims)}")


def read_embeddings_json(path: str) -> list[EmbeddingVector]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid embedding JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path}: embedding JSON must map utterance_id to a float list")
    vectors = []
    for utt_id in sorted(data):
        try:
            vectors.append(EmbeddingVector(utterance_id=utt_id, values=np.asarray(data[utt_id], dtype=np.float64)))
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}: bad embedding for {utt_id!r}: {exc}") from exc
    _check_uniform_dim(vectors, path)
    return vectors


def read_embeddings_binary(path: str) -> list[EmbeddingVector]:
    """Binary sidecar: "EMB1", u32 dim, u32 count, then per record a
    u32 id length, the id bytes, and dim float32 values (little-endian)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != _EMB_MAGIC:
        raise FormatError(f"{path}: not an EMB1 embedding file")
    dim, count = struct.unpack_from("<II", raw, 4)
    if dim == 0:
        raise FormatError(f"{path}: zero embedding dim")
    pos = 12
    vectors = []
    for _ in range(count):
        if pos + 4 > len(raw):
            raise FormatError(f"{path}: truncated record header")
        (id_len,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        if pos + id_len + 4 * dim > len(raw):
            raise FormatError(f"{path}: truncated record body")
        utt_id = raw[pos : pos + id_len].decode("utf-8")
        pos += id_len
        values = np.frombuffer(raw, dtype="<f4", count=dim, offset=pos).astype(np.float64)
        pos += 4 * dim
        vectors.append(EmbeddingVector(utterance_id=utt_id, values=values))
    return vectors


def read_embeddings(path: str) -> list[EmbeddingVector]:
    """Dispatch on the magic bytes: EMB1 binary, else JSON."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == _EMB_MAGIC:
        return read_embeddings_binary(path)
    return read_embeddings_json(path)


def write_embeddings_binary(vectors: list[EmbeddingVector], path: str) -> None:
    if not vectors:
        raise ValueError("refusing to write an empty embedding file")
    _check_uniform_dim(vectors, path)
    dim = vectors[0].dim
    with open(path, "wb") as fh:
        fh.write(_EMB_MAGIC)
        fh.write(struct.pack("<II", dim, len(vectors)))
        for vec in vectors:
            ident = vec.utterance_id.encode("utf-8")
            fh.write(struct.pack("<I", len(ident)))
            fh.write(ident)
            fh.write(vec.values.astype("<f4").tobytes())
