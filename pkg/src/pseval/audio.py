"""Canonical audio representation, WAV I/O, resampling, and power measurement.

Everything downstream (mixing, metrics, evaluation) works on mono
:class:`AudioBuffer` values. Only RIFF/WAVE PCM16 and IEEE float32 files are
supported; stereo is downmixed by channel mean, anything wider is rejected.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import resample_poly

from .errors import (
    ClippingError,
    DegenerateSignalError,
    FormatError,
    UnsupportedCodecError,
)

# Canonical evaluation rate. Corpus audio is resampled to this on ingestion;
# submitted (enhanced) audio must already be at this rate.
EVAL_RATE_HZ = 16000

# Silence gate for active power: 32 ms frames, 50% hop, frames more than
# 40 dB below the loudest frame are excluded. Mirrors the intelligibility
# metric's silence-removal convention so SNR and eSTOI see the same speech.
ACTIVE_FRAME_SECONDS = 0.032
ACTIVE_GATE_DB = 40.0

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# Kaiser beta for the anti-aliasing prototype filter; ~87 dB stopband,
# comfortably past the 60 dB floor the pipeline requires.
_RESAMPLE_KAISER_BETA = 8.6


@dataclass(frozen=True)
class AudioBuffer:
    """Mono sample sequence plus its sample rate.

    Samples are float64, nominally in [-1, 1], and immutable once built.
    """

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer is mono: samples must be 1-D")
        if not isinstance(self.sample_rate_hz, (int, np.integer)) or self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be a positive integer, got {self.sample_rate_hz!r}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("AudioBuffer samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_seconds(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class PowerStats:
    """RMS, peak, and speech-gated mean-square power of a buffer."""

    rms: float
    peak: float
    active_power: float


@dataclass(frozen=True)
class WavInfo:
    """Header-level facts about a WAV file (no sample data read)."""

    sample_rate_hz: int
    num_frames: int
    num_channels: int
    encoding: str  # "pcm16" | "float32"

    @property
    def duration_seconds(self) -> float:
        return self.num_frames / self.sample_rate_hz


def _parse_riff_chunks(raw: bytes, path: str) -> dict[str, tuple[int, int]]:
    """Return {chunk_id: (offset, size)} for the top-level RIFF chunks."""
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")
    chunks: dict[str, tuple[int, int]] = {}
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = pos + 8
        if body + size > len(raw):
            raise FormatError(f"{path}: truncated chunk {cid!r}")
        try:
            key = cid.decode("ascii")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: garbage chunk id {cid!r}") from exc
        chunks.setdefault(key, (body, size))
        pos = body + size + (size & 1)  # chunk bodies are word-aligned
    return chunks


def _parse_fmt(raw: bytes, off: int, size: int, path: str) -> tuple[int, int, int, int]:
    """Return (format_tag, channels, rate, bits) from a fmt chunk."""
    if size < 16:
        raise FormatError(f"{path}: fmt chunk too short ({size} bytes)")
    fmt_tag, channels, rate, _byte_rate, _block_align, bits = struct.unpack_from("<HHIIHH", raw, off)
    if fmt_tag == _WAVE_FORMAT_EXTENSIBLE:
        if size < 40:
            raise FormatError(f"{path}: extensible fmt chunk too short")
        (fmt_tag,) = struct.unpack_from("<H", raw, off + 24)  # first 2 bytes of SubFormat GUID
    return fmt_tag, channels, rate, bits


def _classify_encoding(fmt_tag: int, bits: int, path: str) -> str:
    if fmt_tag == _WAVE_FORMAT_PCM and bits == 16:
        return "pcm16"
    if fmt_tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        return "float32"
    raise UnsupportedCodecError(
        f"{path}: unsupported encoding (format tag {fmt_tag}, {bits}-bit); "
        "only PCM16 and IEEE float32 are readable"
    )


def wav_info(path: str) -> WavInfo:
    """Parse the header of a WAV file without decoding samples."""
    with open(path, "rb") as fh:
        raw = fh.read()
    chunks = _parse_riff_chunks(raw, str(path))
    if "fmt " not in chunks or "data" not in chunks:
        raise FormatError(f"{path}: missing fmt/data chunk")
    fmt_off, fmt_size = chunks["fmt "]
    fmt_tag, channels, rate, bits = _parse_fmt(raw, fmt_off, fmt_size, str(path))
    encoding = _classify_encoding(fmt_tag, bits, str(path))
    if channels < 1:
        raise FormatError(f"{path}: zero channels")
    if channels > 2:
        raise UnsupportedCodecError(f"{path}: {channels} channels; only mono/stereo supported")
    if rate <= 0:
        raise FormatError(f"{path}: non-positive sample rate {rate}")
    _, data_size = chunks["data"]
    bytes_per_frame = channels * (bits // 8)
    return WavInfo(
        sample_rate_hz=int(rate),
        num_frames=data_size // bytes_per_frame,
        num_channels=int(channels),
        encoding=encoding,
    )


def read_wav(path: str) -> AudioBuffer:
    """Read a PCM16 or IEEE float32 WAV file as a mono AudioBuffer.

    PCM16 samples are scaled by 1/32768; stereo is downmixed by channel
    mean. The file's native sample rate is preserved.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    chunks = _parse_riff_chunks(raw, str(path))
    if "fmt " not in chunks or "data" not in chunks:
        raise FormatError(f"{path}: missing fmt/data chunk")
    fmt_off, fmt_size = chunks["fmt "]
    fmt_tag, channels, rate, bits = _parse_fmt(raw, fmt_off, fmt_size, str(path))
    encoding = _classify_encoding(fmt_tag, bits, str(path))
    if channels < 1:
        raise FormatError(f"{path}: zero channels")
    if channels > 2:
        raise UnsupportedCodecError(f"{path}: {channels} channels; only mono/stereo supported")
    if rate <= 0:
        raise FormatError(f"{path}: non-positive sample rate {rate}")

    data_off, data_size = chunks["data"]
    bytes_per_sample = bits // 8
    usable = data_size - (data_size % (channels * bytes_per_sample))
    body = raw[data_off : data_off + usable]
    if encoding == "pcm16":
        samples = np.frombuffer(body, dtype="<i2").astype(np.float64) / 32768.0
    else:
        samples = np.frombuffer(body, dtype="<f4").astype(np.float64)
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    if samples.size and not np.all(np.isfinite(samples)):
        raise FormatError(f"{path}: non-finite samples in float32 data")
    return AudioBuffer(samples=samples, sample_rate_hz=int(rate))


def write_wav(buf: AudioBuffer, path: str, encoding: str = "float32") -> None:
    """Write ``buf`` as a WAV file re-readable by :func:`read_wav`.

    pcm16 raises :class:`ClippingError` for samples outside [-1, 1] rather
    than clipping silently; float32 round-trips float32-representable
    samples exactly.
    """
    if encoding not in ("pcm16", "float32"):
        raise ValueError(f"unknown encoding {encoding!r}")
    x = buf.samples
    if encoding == "pcm16":
        if x.size and (np.min(x) < -1.0 or np.max(x) > 1.0):
            worst = float(np.max(np.abs(x)))
            raise ClippingError(f"{path}: peak {worst:.6f} exceeds [-1, 1] for pcm16 output")
        quantized = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        body = quantized.tobytes()
        fmt_tag, bits = _WAVE_FORMAT_PCM, 16
    else:
        body = x.astype("<f4").tobytes()
        fmt_tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32

    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(body),
        b"WAVE",
        b"fmt ",
        16,
        fmt_tag,
        1,
        buf.sample_rate_hz,
        buf.sample_rate_hz * block_align,
        block_align,
        bits,
        b"data",
        len(body),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def resample(buf: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Band-limited (windowed-sinc, polyphase) resampling.

    Identity when the rate already matches: the samples pass through
    bit-for-bit.
    """
    if not isinstance(target_hz, (int, np.integer)) or target_hz <= 0:
        raise ValueError(f"target_hz must be a positive integer, got {target_hz!r}")
    target_hz = int(target_hz)
    if target_hz == buf.sample_rate_hz:
        return buf
    g = math.gcd(buf.sample_rate_hz, target_hz)
    up, down = target_hz // g, buf.sample_rate_hz // g
    out = resample_poly(buf.samples, up, down, window=("kaiser", _RESAMPLE_KAISER_BETA))
    return AudioBuffer(samples=out, sample_rate_hz=target_hz)


def load_eval_audio(path: str) -> AudioBuffer:
    """Read a corpus WAV and bring it to the canonical evaluation rate."""
    return resample(read_wav(path), EVAL_RATE_HZ)


def _frame_mean_squares(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Mean square of each full frame; one whole-buffer frame if too short."""
    if x.size < frame_len:
        return np.array([float(np.mean(x * x))])
    n_frames = 1 + (x.size - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx]
    return np.mean(frames * frames, axis=1)


def measure_power(buf: AudioBuffer) -> PowerStats:
    """RMS, peak, and active (speech-gated) power of a buffer.

    Active power is the mean square over 32 ms frames within 40 dB of the
    loudest frame; long silences therefore do not dilute it.
    """
    x = buf.samples
    if x.size == 0:
        raise DegenerateSignalError("measure_power: empty buffer")
    rms = float(np.sqrt(np.mean(x * x)))
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        return PowerStats(rms=0.0, peak=0.0, active_power=0.0)

    frame_len = max(1, round(ACTIVE_FRAME_SECONDS * buf.sample_rate_hz))
    hop = max(1, frame_len // 2)
    ms = _frame_mean_squares(x, frame_len, hop)
    loudest = float(np.max(ms))
    if loudest == 0.0:
        return PowerStats(rms=rms, peak=peak, active_power=0.0)
    # 40 dB power gate: keep frames with ms >= loudest * 10^(-40/10)
    gate = loudest * 10.0 ** (-ACTIVE_GATE_DB / 10.0)
    active = ms[ms >= gate]
    return PowerStats(rms=rms, peak=peak, active_power=float(np.mean(active)))
