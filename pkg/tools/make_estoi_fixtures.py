"""Generate the committed eSTOI fixture set (run once, outputs in git).

Creates 10 (clean, degraded) speech-like pairs at 10 kHz, scores them with
the loop-based reference oracle, and freezes WAVs plus expected scores
under tests/fixtures/estoi/.

Usage: python tools/make_estoi_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
from estoi_reference_oracle import estoi_reference  # noqa: E402

from pseval.audio import AudioBuffer, write_wav  # noqa: E402

FS = 10000
OUT_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "estoi"


def speechlike(rng: np.random.Generator, seconds: float, fs: int) -> np.ndarray:
    """Harmonic, syllabically modulated signal with pauses and a noise floor."""
    n = int(seconds * fs)
    t = np.arange(n) / fs
    f0 = 120.0 + 40.0 * np.cumsum(rng.normal(0, 0.02, n))  # slow pitch drift
    f0 = np.clip(f0, 80.0, 260.0)
    phase = 2.0 * np.pi * np.cumsum(f0) / fs
    x = np.zeros(n)
    for k in range(1, 9):
        x += (1.0 / k) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    syllable = 0.55 + 0.45 * np.sin(2 * np.pi * rng.uniform(3.0, 5.0) * t + rng.uniform(0, 2 * np.pi))
    x *= syllable
    # carve two pauses so silence gating has work to do
    for _ in range(2):
        start = int(rng.uniform(0.1, 0.8) * n)
        width = int(rng.uniform(0.05, 0.12) * fs)
        ramp = np.ones(n)
        ramp[start : start + width] = 0.02
        x *= ramp
    x += rng.normal(0, 1e-4, n)
    return 0.5 * x / np.max(np.abs(x))


def add_noise(x, rng, snr_db, pink=False):
    noise = rng.normal(0, 1.0, x.size)
    if pink:
        spec = np.fft.rfft(noise)
        freqs = np.maximum(np.fft.rfftfreq(x.size, 1 / FS), 1.0)
        noise = np.fft.irfft(spec / np.sqrt(freqs), n=x.size)
    g = np.sqrt(np.mean(x**2) / (np.mean(noise**2) * 10 ** (snr_db / 10)))
    return x + g * noise


def brickwall(x, lo_hz=None, hi_hz=None):
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size, 1 / FS)
    if hi_hz is not None:
        spec[freqs > hi_hz] = 0
    if lo_hz is not None:
        spec[freqs < lo_hz] = 0
    return np.fft.irfft(spec, n=x.size)


def echo(x, delay_s, gain):
    d = int(delay_s * FS)
    out = x.copy()
    out[d:] += gain * x[:-d]
    return out


def main() -> None:
    rng = np.random.default_rng(20250810)
    degradations = [
        ("white_snr10", lambda x, r: add_noise(x, r, 10.0)),
        ("white_snr0", lambda x, r: add_noise(x, r, 0.0)),
        ("white_snr-5", lambda x, r: add_noise(x, r, -5.0)),
        ("pink_snr5", lambda x, r: add_noise(x, r, 5.0, pink=True)),
        ("lowpass1200", lambda x, r: brickwall(x, hi_hz=1200.0)),
        ("highpass500", lambda x, r: brickwall(x, lo_hz=500.0)),
        ("clip30", lambda x, r: np.clip(x, -0.3 * np.max(np.abs(x)), 0.3 * np.max(np.abs(x)))),
        ("quant4bit", lambda x, r: np.round(x * 8) / 8),
        ("echo40ms", lambda x, r: echo(x, 0.04, 0.5)),
        ("lowpass2k_snr5", lambda x, r: add_noise(brickwall(x, hi_hz=2000.0), r, 5.0)),
    ]
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    expected = {}
    for i, (name, degrade) in enumerate(degradations):
        clean = speechlike(rng, rng.uniform(2.5, 4.0), FS)
        degraded = degrade(clean, rng)
        degraded = 0.9 * degraded / np.max(np.abs(degraded))
        pair_id = f"pair{i:02d}_{name}"
        write_wav(AudioBuffer(clean, FS), str(OUT_DIR / f"{pair_id}_ref.wav"), "float32")
        write_wav(AudioBuffer(degraded, FS), str(OUT_DIR / f"{pair_id}_deg.wav"), "float32")
        # score exactly what a reader will see: float32-quantized samples
        score = estoi_reference(clean.astype(np.float32).astype(np.float64),
                                degraded.astype(np.float32).astype(np.float64), FS)
        expected[pair_id] = score
        print(f"{pair_id}: {score:.6f}")
    with open(OUT_DIR / "expected_scores.json", "w", encoding="utf-8") as fh:
        json.dump(expected, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main()
