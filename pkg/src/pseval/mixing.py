"""Deterministic synthesis of noisy mixtures at prescribed SNRs.

The SNR convention: clean power is speech-gated (active power), noise power
is the plain mean square of the segment actually mixed. The noise gain g
solves

    snr_db = 10 * log10(P_active(clean) / (g^2 * MS(noise_segment)))

so re-measuring the SNR of (clean, g * segment) returns snr_db exactly,
before any joint peak normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, measure_power
from .errors import AlignmentError, DegenerateSignalError
from .rng import generator_from_seed, keyed_generator

# Mixtures whose peak exceeds this are scaled down jointly with their clean
# reference so pcm16 export cannot clip. SDR and eSTOI are unaffected by a
# joint rescale.
PEAK_CEILING = 0.999


@dataclass(frozen=True)
class SnrPolicy:
    """Either a discrete SNR set or a continuous uniform range, in dB."""

    kind: str  # "discrete_set" | "uniform_range"
    values: tuple = ()
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self) -> None:
        if self.kind == "discrete_set":
            if not self.values:
                raise ValueError("discrete SNR policy needs a non-empty value set")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        elif self.kind == "uniform_range":
            if not (self.low <= self.high):
                raise ValueError(f"invalid SNR range [{self.low}, {self.high}]")
        else:
            raise ValueError(f"unknown SNR policy kind {self.kind!r}")


# The challenge's fixed policies: test mixtures use the discrete set,
# fine-tuning inputs the continuous range.
PSE_TEST_SNR_POLICY = SnrPolicy(kind="discrete_set", values=(-2.5, 0.0, 2.5))
FINETUNE_SNR_POLICY = SnrPolicy(kind="uniform_range", low=-5.0, high=5.0)


@dataclass
class MixtureSpec:
    """One (clean, noise, SNR, seed) mixing job and its provenance."""

    mixture_id: str
    speaker_id: str
    clean_id: str
    noise_id: str
    snr_db: float
    seed: int
    output_path: str = ""
    reference_path: str = ""
    clean_path: str = ""
    noise_path: str = ""
    role: str = "test"  # "test" | "train" | "validation"
    realized_gain: float | None = None
    joint_scale: float = 1.0

    def to_record(self) -> dict:
        return {
            "mixture_id": self.mixture_id,
            "speaker_id": self.speaker_id,
            "clean_id": self.clean_id,
            "noise_id": self.noise_id,
            "snr_db": self.snr_db,
            "seed": self.seed,
            "output_path": self.output_path,
            "reference_path": self.reference_path,
            "clean_path": self.clean_path,
            "noise_path": self.noise_path,
            "role": self.role,
            "realized_gain": self.realized_gain,
            "joint_scale": self.joint_scale,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "MixtureSpec":
        return cls(**{k: rec[k] for k in (
            "mixture_id", "speaker_id", "clean_id", "noise_id", "snr_db", "seed",
            "output_path", "reference_path", "clean_path", "noise_path", "role",
            "realized_gain", "joint_scale",
        ) if k in rec})


@dataclass(frozen=True)
class MixtureResult:
    """Synthesized mixture plus the (possibly rescaled) clean reference."""

    mixture: AudioBuffer
    reference: AudioBuffer
    realized_gain: float
    joint_scale: float


def solve_gain(clean: AudioBuffer, noise: AudioBuffer, snr_db: float) -> float:
    """Noise gain g so that clean + g*noise sits at ``snr_db``.

    g = sqrt(P_active(clean) / (MS(noise) * 10^(snr_db/10))).
    """
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise AlignmentError(
            f"solve_gain: rate mismatch {clean.sample_rate_hz} vs {noise.sample_rate_hz}"
        )
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    p_clean = measure_power(clean).active_power
    if p_clean <= 0.0:
        raise DegenerateSignalError("solve_gain: clean signal is silent")
    noise_ms = float(np.mean(noise.samples * noise.samples)) if len(noise) else 0.0
    if noise_ms <= 0.0:
        raise DegenerateSignalError("solve_gain: noise signal is silent")
    return float(np.sqrt(p_clean / (noise_ms * 10.0 ** (snr_db / 10.0))))


def _noise_segment(noise: np.ndarray, length: int, seed: int) -> np.ndarray:
    """Loop/crop noise to ``length`` starting at a seeded random offset."""
    offset = int(generator_from_seed(seed).integers(0, noise.size))
    reps = int(np.ceil((offset + length) / noise.size)) + 1
    tiled = np.tile(noise, reps)
    return tiled[offset : offset + length]


def synthesize_mixture(spec: MixtureSpec, clean: AudioBuffer, noise: AudioBuffer) -> MixtureResult:
    """Mix clean speech with gain-scaled noise per ``spec``.

    Output length equals the clean length. If the mixture peak exceeds
    PEAK_CEILING, mixture and clean reference are rescaled jointly and the
    scale recorded. Bit-identical for identical specs.
    """
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise AlignmentError(
            f"synthesize_mixture: rate mismatch {clean.sample_rate_hz} vs {noise.sample_rate_hz}"
        )
    if len(noise) == 0:
        raise DegenerateSignalError("synthesize_mixture: empty noise")
    segment = _noise_segment(noise.samples, len(clean), spec.seed)
    seg_buf = AudioBuffer(samples=segment, sample_rate_hz=clean.sample_rate_hz)
    gain = solve_gain(clean, seg_buf, spec.snr_db)
    mixture = clean.samples + gain * segment
    peak = float(np.max(np.abs(mixture))) if mixture.size else 0.0
    joint_scale = PEAK_CEILING / peak if peak > PEAK_CEILING else 1.0
    reference = clean.samples
    if joint_scale != 1.0:
        mixture = mixture * joint_scale
        reference = reference * joint_scale
    return MixtureResult(
        mixture=AudioBuffer(samples=mixture, sample_rate_hz=clean.sample_rate_hz),
        reference=AudioBuffer(samples=reference, sample_rate_hz=clean.sample_rate_hz),
        realized_gain=gain,
        joint_scale=joint_scale,
    )


def draw_snr(policy: SnrPolicy, master_seed: int, speaker_id: str, utterance_id: str, purpose: str) -> float:
    """Deterministic SNR draw for one (speaker, utterance, purpose) key."""
    rng = keyed_generator(master_seed, speaker_id, utterance_id, purpose)
    if policy.kind == "discrete_set":
        return float(policy.values[int(rng.integers(0, len(policy.values)))])
    return float(rng.uniform(policy.low, policy.high))


def assign_noises(
    speakers: list[str],
    noise_pool: list[str],
    per_speaker: int = 5,
    master_seed: int = 0,
) -> dict[str, list[str]]:
    """Per-speaker noise assignment: ``per_speaker`` distinct ids, seeded.

    Each speaker's draw is keyed independently, so the assignment does not
    depend on the order or number of other speakers.
    """
    pool = sorted(noise_pool)
    if len(pool) < per_speaker:
        raise ValueError(f"noise pool has {len(pool)} ids, need {per_speaker} per speaker")
    assignment: dict[str, list[str]] = {}
    for speaker_id in speakers:
        rng = keyed_generator(master_seed, speaker_id, "noise_assignment")
        picks = rng.choice(len(pool), size=per_speaker, replace=False)
        assignment[speaker_id] = [pool[i] for i in sorted(picks.tolist())]
    return assignment
