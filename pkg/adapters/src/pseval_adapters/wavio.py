"""Minimal WAV I/O for the adapters (PCM16 and IEEE float32, mono/stereo).

The adapters talk to the evaluation harness through files only, so they
carry their own small reader/writer instead of importing the harness.
"""

from __future__ import annotations

import struct

import numpy as np


class WavFormatError(Exception):
    pass


def read_wav(path: str) -> tuple[np.ndarray, int]:
    """Return (mono float64 samples, sample_rate)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = pos + 8
        if body + size > len(raw):
            raise WavFormatError(f"{path}: truncated chunk {cid!r}")
        if cid == b"fmt ":
            fmt = struct.unpack_from("<HHIIHH", raw, body)
        elif cid == b"data":
            data = raw[body : body + size]
        pos = body + size + (size & 1)
    if fmt is None or data is None:
        raise WavFormatError(f"{path}: missing fmt/data chunk")
    fmt_tag, channels, rate, _, _, bits = fmt
    if fmt_tag == 1 and bits == 16:
        samples = np.frombuffer(data[: len(data) - len(data) % (2 * channels)], dtype="<i2")
        samples = samples.astype(np.float64) / 32768.0
    elif fmt_tag == 3 and bits == 32:
        samples = np.frombuffer(data[: len(data) - len(data) % (4 * channels)], dtype="<f4")
        samples = samples.astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported encoding (tag {fmt_tag}, {bits}-bit)")
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, int(rate)


def write_wav(samples: np.ndarray, rate: int, path: str, encoding: str = "float32") -> None:
    x = np.asarray(samples, dtype=np.float64)
    if encoding == "pcm16":
        body = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
        fmt_tag, bits = 1, 16
    elif encoding == "float32":
        body = x.astype("<f4").tobytes()
        fmt_tag, bits = 3, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(body), b"WAVE", b"fmt ", 16,
        fmt_tag, 1, rate, rate * align, align, bits, b"data", len(body),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)
