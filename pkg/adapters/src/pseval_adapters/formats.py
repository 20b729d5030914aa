"""Writers for the harness's interchange formats.

Embedding binary: magic "EMB1", u32 LE dim, u32 LE count, then per record a
u32 id length, the utf-8 id bytes, and dim float32 LE values. Transcripts:
JSON {utterance_id: text}. Metric records: JSON lines.
"""

from __future__ import annotations

import json
import struct

import numpy as np

EMB_MAGIC = b"EMB1"


def write_embeddings(vectors: dict[str, np.ndarray], path: str) -> None:
    if not vectors:
        raise ValueError("no embeddings to write")
    dims = {np.asarray(v).size for v in vectors.values()}
    if len(dims) != 1:
        raise ValueError(f"embeddings have mixed dims {sorted(dims)}")
    (dim,) = dims
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<II", dim, len(vectors)))
        for utt_id in sorted(vectors):
            ident = utt_id.encode("utf-8")
            fh.write(struct.pack("<I", len(ident)))
            fh.write(ident)
            fh.write(np.asarray(vectors[utt_id], dtype="<f4").tobytes())


def write_transcripts(transcripts: dict[str, str], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(transcripts, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


def write_metric_records(records: list[dict], path: str) -> None:
    ordered = sorted(records, key=lambda r: (r.get("condition", ""), r["metric_name"], r["utterance_id"]))
    with open(path, "w", encoding="utf-8") as fh:
        for rec in ordered:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")


def read_finetune_ledger(path: str) -> list[dict]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries
