"""Planning and execution of the two evaluation phases.

Planning (test-set and fine-tune mixture specs) is a pure function of
(manifest, master_seed) and stays single-threaded. Execution (mixing,
per-utterance metrics) fans out over a worker pool; results are sorted
before any write so parallelism never changes output bytes.
"""

from __future__ import annotations

import functools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .audio import AudioBuffer, EVAL_RATE_HZ, load_eval_audio, read_wav, write_wav
from .embedding_metrics import EmbeddingVector, speaker_secs
from .errors import AlignmentError, EvaluationGapsError, FormatError, InsufficientCorpusError
from .manifest import (
    AUGMENT_CORE_COUNT,
    AUGMENT_EXTRA_COUNT,
    ChallengeManifest,
    SpeakerEntry,
    VALIDATION_SIX_MIN_COUNT,
    VALIDATION_THIRTY_MIN_COUNT,
)
from .mixing import (
    FINETUNE_SNR_POLICY,
    MixtureSpec,
    PSE_TEST_SNR_POLICY,
    draw_snr,
    synthesize_mixture,
)
from .records import MetricRecord
from .rng import derive_seed, keyed_generator
from .signal_metrics import estoi, run_external_metric, sdr
from .text_metrics import align, normalize_text

FINETUNE_REGIMES = ("six_min", "thirty_min")

# Enhanced output may shed up to 10 ms (160 samples at 16 kHz) relative to
# its reference before we call it misaligned.
LENGTH_TOLERANCE_SAMPLES = 160


def plan_pse_testset(manifest: ChallengeManifest) -> list[MixtureSpec]:
    """Full 9 x 5 cross product per speaker: 45 test mixtures each.

    SNRs come from the discrete test policy via per-pair keyed draws;
    everything is reproducible from the manifest's master seed.
    """
    specs = []
    for entry in sorted(manifest.speakers, key=lambda e: e.speaker_id):
        for utt in entry.pse_test:
            for noise_id in entry.noise_ids:
                pair = f"{utt.utterance_id}|{noise_id}"
                snr = draw_snr(
                    PSE_TEST_SNR_POLICY, manifest.master_seed,
                    entry.speaker_id, pair, "pse_test_snr",
                )
                mixture_id = f"{utt.utterance_id}__{noise_id}"
                specs.append(MixtureSpec(
                    mixture_id=mixture_id,
                    speaker_id=entry.speaker_id,
                    clean_id=utt.utterance_id,
                    noise_id=noise_id,
                    snr_db=snr,
                    seed=derive_seed(
                        manifest.master_seed, entry.speaker_id,
                        utt.utterance_id, noise_id, "pse_test_mix",
                    ),
                    output_path=f"pse_test/{entry.speaker_id}/{mixture_id}.wav",
                    reference_path=f"pse_test/{entry.speaker_id}/{mixture_id}.ref.wav",
                    clean_path=utt.path,
                    noise_path=manifest.noise_files[noise_id],
                    role="test",
                ))
    return specs


def _finetune_pools(entry: SpeakerEntry, regime: str) -> tuple[list, list]:
    if regime == "six_min":
        train, val = list(entry.augment_core), list(entry.validation_six_min)
        want_train, want_val = AUGMENT_CORE_COUNT, VALIDATION_SIX_MIN_COUNT
    elif regime == "thirty_min":
        train = list(entry.augment_core) + list(entry.augment_extra)
        val = list(entry.validation_thirty_min)
        want_train = AUGMENT_CORE_COUNT + AUGMENT_EXTRA_COUNT
        want_val = VALIDATION_THIRTY_MIN_COUNT
    else:
        raise ValueError(f"unknown fine-tune regime {regime!r}; expected one of {FINETUNE_REGIMES}")
    if len(train) != want_train or len(val) != want_val:
        raise InsufficientCorpusError(
            f"{entry.speaker_id}: regime {regime} needs {want_train} training and "
            f"{want_val} validation utterances registered, have {len(train)}/{len(val)}"
        )
    return train, val


def plan_finetune_set(manifest: ChallengeManifest, regime: str) -> list[MixtureSpec]:
    """Training and validation mixture specs for one fine-tuning regime.

    Each synthetic clean utterance is paired with a seeded choice among the
    speaker's five noises and a uniform [-5, 5] dB SNR draw. The resulting
    ledger is what the fine-tune runner consumes.
    """
    specs = []
    for entry in sorted(manifest.speakers, key=lambda e: e.speaker_id):
        train, val = _finetune_pools(entry, regime)
        for role, pool in (("train", train), ("validation", val)):
            for utt in pool:
                rng = keyed_generator(
                    manifest.master_seed, entry.speaker_id, utt.utterance_id, "finetune_noise"
                )
                noise_id = entry.noise_ids[int(rng.integers(0, len(entry.noise_ids)))]
                snr = draw_snr(
                    FINETUNE_SNR_POLICY, manifest.master_seed,
                    entry.speaker_id, utt.utterance_id, "finetune_snr",
                )
                mixture_id = f"{utt.utterance_id}__{noise_id}"
                specs.append(MixtureSpec(
                    mixture_id=mixture_id,
                    speaker_id=entry.speaker_id,
                    clean_id=utt.utterance_id,
                    noise_id=noise_id,
                    snr_db=snr,
                    seed=derive_seed(
                        manifest.master_seed, entry.speaker_id,
                        utt.utterance_id, noise_id, "finetune_mix",
                    ),
                    output_path=f"finetune_{regime}/{entry.speaker_id}/{mixture_id}.wav",
                    reference_path=f"finetune_{regime}/{entry.speaker_id}/{mixture_id}.ref.wav",
                    clean_path=utt.path,
                    noise_path=manifest.noise_files[noise_id],
                    role=role,
                ))
    return specs


@functools.lru_cache(maxsize=128)
def _cached_eval_audio(path: str) -> AudioBuffer:
    return load_eval_audio(path)


def synthesize_specs(
    manifest: ChallengeManifest,
    specs: list[MixtureSpec],
    out_root: str,
    parallelism: int = 1,
    encoding: str = "float32",
) -> list[MixtureSpec]:
    """Execute mixing jobs: write mixture + reference WAVs, fill provenance.

    Jobs are independent and may run on any number of workers; the returned
    ledger is sorted and byte-stable either way.
    """
    audio_root = Path(manifest.audio_root)
    out_path = Path(out_root)

    def job(spec: MixtureSpec) -> MixtureSpec:
        clean = _cached_eval_audio(str(audio_root / spec.clean_path))
        noise = _cached_eval_audio(str(audio_root / spec.noise_path))
        result = synthesize_mixture(spec, clean, noise)
        mix_file = out_path / spec.output_path
        ref_file = out_path / spec.reference_path
        mix_file.parent.mkdir(parents=True, exist_ok=True)
        write_wav(result.mixture, str(mix_file), encoding)
        write_wav(result.reference, str(ref_file), encoding)
        return replace(spec, realized_gain=result.realized_gain, joint_scale=result.joint_scale)

    if parallelism <= 1:
        done = [job(s) for s in specs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            done = list(pool.map(job, specs))
    return sorted(done, key=lambda s: (s.speaker_id, s.role, s.mixture_id))


def write_ledger(specs: list[MixtureSpec], path: str) -> None:
    """Mixture provenance ledger: one JSON record per mixture."""
    ordered = sorted(specs, key=lambda s: (s.speaker_id, s.role, s.mixture_id))
    with open(path, "w", encoding="utf-8") as fh:
        for spec in ordered:
            fh.write(json.dumps(spec.to_record(), sort_keys=True))
            fh.write("\n")


def read_ledger(path: str) -> list[MixtureSpec]:
    specs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                specs.append(MixtureSpec.from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad ledger record: {exc}") from exc
    return specs


def _trim_to_min(*buffers: AudioBuffer) -> tuple[AudioBuffer, ...]:
    n = min(len(b) for b in buffers)
    return tuple(
        AudioBuffer(samples=b.samples[:n], sample_rate_hz=b.sample_rate_hz) for b in buffers
    )


def run_pse_eval(
    manifest: ChallengeManifest,
    ledger: list[MixtureSpec],
    enhanced_root: str,
    mix_root: str,
    condition: str = "",
    parallelism: int = 1,
    pesq_adapter: str = "",
) -> list[MetricRecord]:
    """Score one enhanced submission against the planned test mixtures.

    Expects enhanced/{speaker_id}/{mixture_id}.wav for every ledger entry,
    16 kHz only. Either every planned mixture is scored or the gap list is
    raised; no partial-silent results.
    """
    enhanced_path = Path(enhanced_root)
    mix_path = Path(mix_root)
    test_specs = [s for s in ledger if s.role == "test"]

    gaps: list[dict] = []
    jobs: list[tuple[MixtureSpec, Path]] = []
    for spec in sorted(test_specs, key=lambda s: (s.speaker_id, s.mixture_id)):
        candidate = enhanced_path / spec.speaker_id / f"{spec.mixture_id}.wav"
        if not candidate.is_file():
            gaps.append({
                "code": "missing_submission",
                "speaker_id": spec.speaker_id,
                "mixture_id": spec.mixture_id,
                "expected_path": str(candidate),
            })
        else:
            jobs.append((spec, candidate))
    if gaps:
        raise EvaluationGapsError(f"{len(gaps)} planned mixtures lack submissions", gaps)

    def job(item: tuple[MixtureSpec, Path]) -> tuple[list[MetricRecord], dict | None]:
        spec, enh_file = item
        enhanced = read_wav(str(enh_file))
        if enhanced.sample_rate_hz != EVAL_RATE_HZ:
            return [], {
                "code": "bad_sample_rate",
                "speaker_id": spec.speaker_id,
                "mixture_id": spec.mixture_id,
                "sample_rate_hz": enhanced.sample_rate_hz,
            }
        reference = read_wav(str(mix_path / spec.reference_path))
        noisy = read_wav(str(mix_path / spec.output_path))
        if abs(len(enhanced) - len(reference)) > LENGTH_TOLERANCE_SAMPLES:
            return [], {
                "code": "length_mismatch",
                "speaker_id": spec.speaker_id,
                "mixture_id": spec.mixture_id,
                "reference_samples": len(reference),
                "enhanced_samples": len(enhanced),
            }
        reference, noisy, enhanced = _trim_to_min(reference, noisy, enhanced)
        utt = f"{spec.speaker_id}/{spec.mixture_id}"
        sdr_enhanced = sdr(reference, enhanced)
        sdr_noisy = sdr(reference, noisy)
        recs = [
            MetricRecord(utt, "sdr", sdr_enhanced, condition),
            MetricRecord(utt, "sdri", sdr_enhanced - sdr_noisy, condition),
            MetricRecord(utt, "estoi", estoi(reference, enhanced), condition),
        ]
        return recs, None

    if parallelism <= 1:
        outcomes = [job(item) for item in jobs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(job, jobs))

    records: list[MetricRecord] = []
    for recs, gap in outcomes:
        if gap is not None:
            gaps.append(gap)
        records.extend(recs)
    if gaps:
        raise EvaluationGapsError(f"{len(gaps)} submissions unusable", gaps)

    if pesq_adapter:
        pairs = [
            (
                f"{spec.speaker_id}/{spec.mixture_id}",
                str(mix_path / spec.reference_path),
                str(enh_file),
            )
            for spec, enh_file in jobs
        ]
        records.extend(run_external_metric(pesq_adapter, pairs, kind="pesq", condition=condition))
    return sorted(records, key=lambda r: (r.metric_name, r.utterance_id))


def run_tts_eval(
    manifest: ChallengeManifest,
    hypotheses: dict[str, str],
    generated_embeddings: list[EmbeddingVector],
    reference_embeddings: list[EmbeddingVector],
    mos_records: list[MetricRecord] | None = None,
    condition: str = "",
) -> list[MetricRecord]:
    """Per-utterance SECS and WER for generated speech, plus merged MOS.

    All 50 TTS-eval utterances per speaker must be covered by both the
    hypothesis transcripts and the embedding set; the speaker's enrollment
    embedding provides the SECS reference. A missing MOS file simply leaves
    that column absent.
    """
    gen_by_id = {v.utterance_id: v for v in generated_embeddings}
    ref_by_id = {v.utterance_id: v for v in reference_embeddings}
    dims = {v.dim for v in generated_embeddings} | {v.dim for v in reference_embeddings}
    if len(dims) > 1:
        raise AlignmentError(f"embedding sets disagree on dim: {sorted(dims)}")

    gaps: list[dict] = []
    records: list[MetricRecord] = []
    for entry in sorted(manifest.speakers, key=lambda e: e.speaker_id):
        enroll_vec = ref_by_id.get(entry.enrollment.utterance_id)
        if enroll_vec is None:
            gaps.append({
                "code": "missing_reference_embedding",
                "speaker_id": entry.speaker_id,
                "utterance_id": entry.enrollment.utterance_id,
            })
            continue
        for utt in entry.tts_eval:
            hyp_text = hypotheses.get(utt.utterance_id)
            gen_vec = gen_by_id.get(utt.utterance_id)
            if hyp_text is None:
                gaps.append({
                    "code": "missing_transcript",
                    "speaker_id": entry.speaker_id,
                    "utterance_id": utt.utterance_id,
                })
            if gen_vec is None:
                gaps.append({
                    "code": "missing_embedding",
                    "speaker_id": entry.speaker_id,
                    "utterance_id": utt.utterance_id,
                })
            if hyp_text is None or gen_vec is None:
                continue
            counts = align(normalize_text(utt.text), normalize_text(hyp_text))
            records.append(MetricRecord(
                utterance_id=utt.utterance_id,
                metric_name="wer",
                value=counts.rate,
                condition=condition,
                extra={
                    "edits": counts.total_edits,
                    "reference_length": counts.reference_length,
                    "substitutions": counts.substitutions,
                    "deletions": counts.deletions,
                    "insertions": counts.insertions,
                },
            ))
            records.extend(speaker_secs([gen_vec], [enroll_vec], condition=condition))
    if gaps:
        raise EvaluationGapsError(f"{len(gaps)} TTS-eval inputs missing", gaps)

    if mos_records:
        for rec in mos_records:
            if rec.metric_name != "mos":
                raise FormatError(f"MOS record file contains metric {rec.metric_name!r}")
            records.append(replace_condition(rec, condition))
    return sorted(records, key=lambda r: (r.metric_name, r.utterance_id))


def replace_condition(record: MetricRecord, condition: str) -> MetricRecord:
    if record.condition == condition:
        return record
    return MetricRecord(
        utterance_id=record.utterance_id,
        metric_name=record.metric_name,
        value=record.value,
        condition=condition,
        extra=record.extra,
    )
