"""Signal metrics for enhanced speech: SDR, SDRI, eSTOI, external adapters.

SDR here is the plain energy-ratio definition (the same quantity the
fine-tuning loss optimizes), not the BSS-Eval variant with an allowed
distortion filter. eSTOI is implemented natively and in full; PESQ (and
optionally MOS) arrive through a subprocess adapter contract.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, resample
from .errors import (
    AdapterProtocolError,
    AlignmentError,
    ConfigurationError,
    DegenerateSignalError,
    InsufficientSignalError,
    MetricValidationError,
)
from .records import MetricRecord

SDR_CAP_DB = 100.0

# Validation ranges for adapter-supplied scores.
ADAPTER_SCORE_RANGES = {
    "pesq": (-0.5, 4.64),
    "mos": (1.0, 5.0),
}


@dataclass(frozen=True)
class EstoiConfig:
    """Frozen constants of the intelligibility metric.

    These follow the published reference algorithm and are deliberately not
    user-tunable knobs: the score is only comparable across systems if the
    configuration never moves.
    """

    internal_rate_hz: int = 10000
    frame_len: int = 256
    hop: int = 128
    fft_size: int = 512
    num_bands: int = 15
    lowest_band_cf_hz: float = 150.0
    segment_frames: int = 30
    silence_gate_db: float = 40.0

    def __post_init__(self) -> None:
        if self.frame_len != 2 * self.hop:
            raise ValueError("frame_len must equal 2 * hop")
        if self.fft_size < self.frame_len:
            raise ValueError("fft_size must be >= frame_len")
        if self.num_bands < 1:
            raise ValueError("num_bands must be >= 1")


DEFAULT_ESTOI_CONFIG = EstoiConfig()


def _check_pair(reference: AudioBuffer, estimate: AudioBuffer, op: str) -> None:
    if reference.sample_rate_hz != estimate.sample_rate_hz:
        raise AlignmentError(
            f"{op}: rate mismatch {reference.sample_rate_hz} vs {estimate.sample_rate_hz}"
        )
    if len(reference) != len(estimate):
        raise AlignmentError(
            f"{op}: length mismatch {len(reference)} vs {len(estimate)} "
            "(trimming is the pipeline's explicit job, not the metric's)"
        )


def sdr(reference: AudioBuffer, estimate: AudioBuffer) -> float:
    """Energy-ratio SDR in dB, capped to [-100, +100].

    10*log10(sum(s^2) / sum((s_hat - s)^2)); an exact match returns the
    +100 dB cap so perfect reconstruction stays aggregable.
    """
    _check_pair(reference, estimate, "sdr")
    s = reference.samples
    signal_energy = float(np.dot(s, s))
    if signal_energy <= 0.0:
        raise DegenerateSignalError("sdr: silent reference")
    err = estimate.samples - s
    error_energy = float(np.dot(err, err))
    if error_energy == 0.0:
        return SDR_CAP_DB
    value = 10.0 * np.log10(signal_energy / error_energy)
    return float(np.clip(value, -SDR_CAP_DB, SDR_CAP_DB))


def sdri(reference: AudioBuffer, noisy_input: AudioBuffer, enhanced: AudioBuffer) -> float:
    """SDR improvement: sdr(reference, enhanced) - sdr(reference, noisy_input)."""
    return sdr(reference, enhanced) - sdr(reference, noisy_input)


def _hann(n: int) -> np.ndarray:
    # Symmetric Hann without the zero endpoints, as the reference algorithm uses.
    return np.hanning(n + 2)[1:-1]


def _frame(x: np.ndarray, frame_len: int, hop: int, *, include_last: bool) -> np.ndarray:
    """Stack frames of ``x``; framing bound matches the reference algorithm.

    Silence removal includes the final full frame; the STFT stage stops one
    hop earlier. Keeping both conventions is required for fixture-level
    agreement with the reference implementation.
    """
    stop = x.size - frame_len + 1 if include_last else x.size - frame_len
    starts = np.arange(0, max(stop, 0), hop)
    if starts.size == 0:
        return np.empty((0, frame_len))
    idx = starts[:, None] + np.arange(frame_len)[None, :]
    return x[idx]


def _remove_silent_frames(
    x: np.ndarray, y: np.ndarray, frame_len: int, hop: int, gate_db: float
) -> tuple[np.ndarray, np.ndarray]:
    """Drop frames of x (and the paired y frames) > gate_db below the loudest.

    Gating is driven by the reference signal only; the retained frames are
    overlap-added back into time-domain signals.
    """
    w = _hann(frame_len)
    x_frames = _frame(x, frame_len, hop, include_last=True) * w
    y_frames = _frame(y, frame_len, hop, include_last=True) * w
    if x_frames.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    energies_db = 20.0 * np.log10(np.linalg.norm(x_frames, axis=1) + np.finfo(np.float64).eps)
    mask = energies_db > np.max(energies_db) - gate_db
    x_frames, y_frames = x_frames[mask], y_frames[mask]
    n = x_frames.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros(0)
    out_len = (n - 1) * hop + frame_len
    x_out, y_out = np.zeros(out_len), np.zeros(out_len)
    for i in range(n):
        x_out[i * hop : i * hop + frame_len] += x_frames[i]
        y_out[i * hop : i * hop + frame_len] += y_frames[i]
    return x_out, y_out


def _stft_power(x: np.ndarray, cfg: EstoiConfig) -> np.ndarray:
    frames = _frame(x, cfg.frame_len, cfg.hop, include_last=False)
    if frames.shape[0] == 0:
        return np.empty((0, cfg.fft_size // 2 + 1))
    spec = np.fft.rfft(frames * _hann(cfg.frame_len), n=cfg.fft_size)
    return np.abs(spec) ** 2


def _band_matrix(cfg: EstoiConfig) -> np.ndarray:
    """One-third-octave selector matrix (num_bands x fft bins).

    Band edges cf*2^(-1/6), cf*2^(1/6) snap to the nearest FFT bin; each
    band sums the power bins in [low_bin, high_bin).
    """
    freqs = np.linspace(0, cfg.internal_rate_hz, cfg.fft_size + 1)[: cfg.fft_size // 2 + 1]
    k = np.arange(cfg.num_bands, dtype=np.float64)
    lo = cfg.lowest_band_cf_hz * 2.0 ** ((2.0 * k - 1.0) / 6.0)
    hi = cfg.lowest_band_cf_hz * 2.0 ** ((2.0 * k + 1.0) / 6.0)
    obm = np.zeros((cfg.num_bands, freqs.size))
    for i in range(cfg.num_bands):
        lo_bin = int(np.argmin(np.square(freqs - lo[i])))
        hi_bin = int(np.argmin(np.square(freqs - hi[i])))
        obm[i, lo_bin:hi_bin] = 1.0
    return obm


def _row_col_normalize(segments: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-norm each band row, then each frame column.

    Operates on a (..., bands, frames) stack; the trailing two axes are one
    segment's band-energy matrix.
    """
    out = segments - segments.mean(axis=-1, keepdims=True)
    norms = np.sqrt(np.sum(out * out, axis=-1, keepdims=True))
    np.copyto(norms, 1.0, where=norms == 0.0)
    out = out / norms
    out = out - out.mean(axis=-2, keepdims=True)
    norms = np.sqrt(np.sum(out * out, axis=-2, keepdims=True))
    np.copyto(norms, 1.0, where=norms == 0.0)
    return out / norms


def estoi(
    reference: AudioBuffer,
    estimate: AudioBuffer,
    cfg: EstoiConfig = DEFAULT_ESTOI_CONFIG,
) -> float:
    """Extended short-time objective intelligibility, in [-1, 1].

    Pipeline: resample both signals to 10 kHz; drop reference-silent frames
    from both; Hann STFT (256/128/512); group power into 15 one-third-octave
    bands from 150 Hz; per 30-frame segment, mean/variance-normalize band
    rows then frame columns of both band-energy matrices and average the
    column correlations; the score is the mean over segments.
    """
    _check_pair(reference, estimate, "estoi")
    ref = resample(reference, cfg.internal_rate_hz).samples
    est = resample(estimate, cfg.internal_rate_hz).samples
    ref, est = _remove_silent_frames(ref, est, cfg.frame_len, cfg.hop, cfg.silence_gate_db)

    ref_power = _stft_power(ref, cfg)
    est_power = _stft_power(est, cfg)
    n_frames = ref_power.shape[0]
    if n_frames < cfg.segment_frames:
        raise InsufficientSignalError(
            f"estoi: {n_frames} STFT frames after silence gating, need >= {cfg.segment_frames}"
        )
    obm = _band_matrix(cfg)
    ref_bands = np.sqrt(obm @ ref_power.T)  # (bands, frames)
    est_bands = np.sqrt(obm @ est_power.T)

    n_seg = cfg.segment_frames
    # (n_segments, bands, n_seg) sliding stacks over the frame axis
    ref_segments = np.lib.stride_tricks.sliding_window_view(ref_bands, n_seg, axis=1)
    est_segments = np.lib.stride_tricks.sliding_window_view(est_bands, n_seg, axis=1)
    ref_norm = _row_col_normalize(np.moveaxis(ref_segments, 1, 0))
    est_norm = _row_col_normalize(np.moveaxis(est_segments, 1, 0))
    per_segment = np.sum(ref_norm * est_norm, axis=(-2, -1)) / n_seg
    return float(np.mean(per_segment))


def run_external_metric(
    adapter_cmd: str,
    pairs: list[tuple[str, str, str]],
    kind: str = "pesq",
    condition: str = "",
) -> list[MetricRecord]:
    """Score (reference, estimate) file pairs through an external adapter.

    The adapter is invoked as ``<adapter_cmd> <manifest>`` where the
    manifest holds one ``reference_path<TAB>estimate_path`` line per pair;
    it must print one decimal score per line, in order, and exit 0.
    ``pairs`` items are (utterance_id, reference_path, estimate_path).
    """
    if kind not in ADAPTER_SCORE_RANGES:
        raise ValueError(f"unknown external metric kind {kind!r}")
    if not adapter_cmd:
        raise ConfigurationError(f"no {kind} adapter configured")
    if not pairs:
        return []

    lo, hi = ADAPTER_SCORE_RANGES[kind]
    with tempfile.TemporaryDirectory(prefix=f"pseval-{kind}-") as tmp:
        manifest_path = Path(tmp) / "pairs.tsv"
        with open(manifest_path, "w", encoding="utf-8") as fh:
            for _, ref_path, est_path in pairs:
                fh.write(f"{ref_path}\t{est_path}\n")
        argv = shlex.split(adapter_cmd) + [str(manifest_path)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True)
        except FileNotFoundError as exc:
            raise ConfigurationError(f"{kind} adapter not found: {argv[0]}") from exc
    if proc.returncode != 0:
        raise AdapterProtocolError(
            f"{kind} adapter exited with status {proc.returncode}: {proc.stderr.strip()[:500]}"
        )
    lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
    if len(lines) != len(pairs):
        raise AdapterProtocolError(
            f"{kind} adapter printed {len(lines)} scores for {len(pairs)} inputs"
        )
    records = []
    for (utterance_id, _, _), line in zip(pairs, lines):
        try:
            value = float(line)
        except ValueError as exc:
            raise AdapterProtocolError(f"{kind} adapter printed non-numeric score {line!r}") from exc
        if not (lo <= value <= hi):
            raise MetricValidationError(
                f"{kind} score {value} for {utterance_id} outside [{lo}, {hi}]"
            )
        records.append(
            MetricRecord(utterance_id=utterance_id, metric_name=kind, value=value, condition=condition)
        )
    return records
