"""Deterministic DSP fallback features used by the offline backends.

These exist so the adapter pipelines and their file contracts can run and
be tested on a machine with no model weights. They are not substitutes for
the real models' quality; scores from stub backends are only meaningful as
plumbing checks.
"""

from __future__ import annotations

import numpy as np


def _frames(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    if x.size < frame_len:
        x = np.pad(x, (0, frame_len - x.size))
    n = 1 + (x.size - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def band_log_spectrum(x: np.ndarray, rate: int, n_bands: int = 48) -> np.ndarray:
    """Per-frame log band energies on a log-frequency grid, (frames, bands)."""
    frame_len = max(256, int(0.025 * rate))
    frames = _frames(x, frame_len, frame_len // 2) * np.hanning(frame_len)
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    freqs = np.fft.rfftfreq(frame_len, 1.0 / rate)
    edges = np.geomspace(50.0, rate / 2.0, n_bands + 1)
    bands = np.zeros((power.shape[0], n_bands))
    for b in range(n_bands):
        sel = (freqs >= edges[b]) & (freqs < edges[b + 1])
        bands[:, b] = power[:, sel].sum(axis=1) if np.any(sel) else 0.0
    return np.log10(bands + 1e-12)


def spectral_embedding(x: np.ndarray, rate: int, dim: int = 192) -> np.ndarray:
    """Fixed-dim utterance embedding from band-energy statistics."""
    spec = band_log_spectrum(x, rate, n_bands=dim // 4)
    mean = spec.mean(axis=0)
    std = spec.std(axis=0)
    delta = np.abs(np.diff(spec, axis=0)).mean(axis=0) if spec.shape[0] > 1 else np.zeros_like(mean)
    ratio = spec.max(axis=0) - mean
    vec = np.concatenate([mean, std, delta, ratio])[:dim]
    if vec.size < dim:
        vec = np.pad(vec, (0, dim - vec.size))
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def stub_quality_score(reference: np.ndarray, estimate: np.ndarray, rate: int) -> float:
    """Log-spectral-distance pseudo-quality in [0, 1]; 1 means identical."""
    n = min(reference.size, estimate.size)
    if n < 256:
        return 0.0
    ref_spec = band_log_spectrum(reference[:n], rate)
    est_spec = band_log_spectrum(estimate[:n], rate)
    m = min(ref_spec.shape[0], est_spec.shape[0])
    lsd = float(np.sqrt(np.mean((ref_spec[:m] - est_spec[:m]) ** 2)))
    return float(np.exp(-lsd))
