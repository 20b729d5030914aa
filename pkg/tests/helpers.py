"""Shared test utilities: speech-like signals and synthetic corpora."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from pseval.audio import AudioBuffer, write_wav

WORDS = (
    "the quick brown fox jumps over a lazy dog while seven wizards "
    "brew quiet tea beside the harbor and children count yellow boats "
    "drifting past tall cliffs under warm evening light"
).split()


def speechlike(rng: np.random.Generator, seconds: float, fs: int) -> np.ndarray:
    """Harmonic signal with pitch drift, syllabic modulation, and pauses."""
    n = int(seconds * fs)
    t = np.arange(n) / fs
    f0 = np.clip(120.0 + 40.0 * np.cumsum(rng.normal(0, 0.02, n)), 80.0, 260.0)
    phase = 2.0 * np.pi * np.cumsum(f0) / fs
    x = np.zeros(n)
    for k in range(1, 9):
        x += (1.0 / k) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    x *= 0.55 + 0.45 * np.sin(2 * np.pi * rng.uniform(3.0, 5.0) * t + rng.uniform(0, 2 * np.pi))
    for _ in range(2):
        start = int(rng.uniform(0.1, 0.8) * n)
        width = int(rng.uniform(0.04, 0.1) * fs)
        x[start : start + width] *= 0.02
    x += rng.normal(0, 1e-4, n)
    return 0.5 * x / np.max(np.abs(x))


def noiselike(rng: np.random.Generator, seconds: float, fs: int) -> np.ndarray:
    """Colored noise with an optional tonal component."""
    n = int(seconds * fs)
    noise = rng.normal(0, 1.0, n)
    spec = np.fft.rfft(noise)
    freqs = np.maximum(np.fft.rfftfreq(n, 1 / fs), 1.0)
    tilt = freqs ** rng.uniform(-0.8, 0.1)
    noise = np.fft.irfft(spec * tilt, n=n)
    if rng.uniform() < 0.3:
        noise += 0.3 * np.sin(2 * np.pi * rng.uniform(100, 2000) * np.arange(n) / fs)
    return 0.3 * noise / np.max(np.abs(noise))


def sentence(rng: np.random.Generator, n_words: int = 8) -> str:
    return " ".join(WORDS[int(i)] for i in rng.integers(0, len(WORDS), n_words))


def build_synthetic_corpus(
    root: Path,
    n_speakers: int = 20,
    utts_per_speaker: int = 60,
    n_noises: int = 88,
    fs: int = 16000,
    seconds_range: tuple[float, float] = (3.05, 3.35),
    seed: int = 12345,
) -> Path:
    """Write a corpus in the layout scan_corpus expects.

    Speakers are half real / half virtual, genders balanced within each
    kind. A few noise files get a different sample rate to exercise
    ingestion resampling.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    meta = {}
    for i in range(n_speakers):
        speaker_id = f"spk{i:03d}"
        kind = "real" if i < n_speakers // 2 else "virtual"
        gender = "m" if (i % (n_speakers // 2)) < (n_speakers // 4) else "f"
        meta[speaker_id] = {"kind": kind, "gender": gender}
        speaker_dir = root / "speech" / speaker_id
        speaker_dir.mkdir(parents=True, exist_ok=True)
        for j in range(utts_per_speaker):
            utt_id = f"{speaker_id}_utt{j:03d}"
            seconds = rng.uniform(*seconds_range)
            x = speechlike(rng, seconds, fs)
            write_wav(AudioBuffer(x, fs), str(speaker_dir / f"{utt_id}.wav"), "pcm16")
            (speaker_dir / f"{utt_id}.txt").write_text(sentence(rng) + "\n", encoding="utf-8")
    (root / "speakers.json").write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")

    noise_dir = root / "noise"
    noise_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n_noises):
        noise_fs = 32000 if i % 29 == 0 else fs
        x = noiselike(rng, rng.uniform(1.0, 4.0), noise_fs)
        write_wav(AudioBuffer(x, noise_fs), str(noise_dir / f"noise{i:03d}.wav"), "pcm16")
    return root
