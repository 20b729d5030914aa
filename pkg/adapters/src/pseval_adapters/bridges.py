"""Thin bridges to the neural models: embeddings, ASR, MOS, PESQ.

Each bridge has a "real" backend that lazy-imports the heavyweight model
and a deterministic offline backend for plumbing tests. All outputs go
through the harness's file formats (see formats.py).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .features import spectral_embedding, stub_quality_score
from .formats import write_embeddings, write_metric_records, write_transcripts
from .wavio import WavFormatError, read_wav

MOS_RANGE = (1.0, 5.0)
PESQ_RANGE = (-0.5, 4.64)


class AdapterError(Exception):
    pass


def _load_speechbrain_model():
    try:
        from speechbrain.inference.speaker import SpeakerRecognition
    except ImportError as exc:
        raise AdapterError(
            "speechbrain is not installed; install the 'real-models' extra "
            "or use --backend spectral"
        ) from exc
    try:
        return SpeakerRecognition.from_hparams("speechbrain/spkrec-ecapa-voxceleb")
    except Exception as exc:
        raise AdapterError(f"speaker model load failure: {exc}") from exc


def extract_embeddings(
    wav_paths: list[str], out_path: str, backend: str = "speechbrain"
) -> tuple[list[str], list[dict]]:
    """One vector per decodable utterance; failures are listed, not fatal.

    Returns (written utterance ids, failure records).
    """
    model = _load_speechbrain_model() if backend == "speechbrain" else None
    if backend not in ("speechbrain", "spectral"):
        raise AdapterError(f"unknown embedding backend {backend!r}")
    vectors: dict[str, np.ndarray] = {}
    failures: list[dict] = []
    for path in wav_paths:
        utt_id = Path(path).stem
        try:
            samples, rate = read_wav(path)
            if samples.size == 0:
                raise WavFormatError(f"{path}: empty audio")
            if backend == "spectral":
                vectors[utt_id] = spectral_embedding(samples, rate)
            else:
                import torch

                wav = torch.as_tensor(samples, dtype=torch.float32)[None, :]
                emb = model.encode_batch(wav).squeeze().detach().cpu().numpy()
                vectors[utt_id] = emb.astype(np.float64)
        except (OSError, WavFormatError, ValueError) as exc:
            failures.append({"path": str(path), "error": str(exc)})
    if not vectors:
        raise AdapterError("no utterance could be embedded")
    write_embeddings(vectors, out_path)
    return sorted(vectors), failures


def transcribe(
    wav_paths: list[str], out_path: str, backend: str = "whisper", model_name: str = "base"
) -> dict[str, str]:
    """One hypothesis per utterance; empty hypotheses are legitimate."""
    transcripts: dict[str, str] = {}
    if backend == "whisper":
        try:
            import whisper
        except ImportError as exc:
            raise AdapterError(
                "openai-whisper is not installed; install the 'real-models' "
                "extra or use --backend sidecar"
            ) from exc
        model = whisper.load_model(model_name)
        for path in wav_paths:
            result = model.transcribe(str(path))
            transcripts[Path(path).stem] = result.get("text", "").strip()
    elif backend == "sidecar":
        # offline stand-in: the transcript is whatever .txt sits next to the
        # wav (useful for wiring tests), else the empty hypothesis
        for path in wav_paths:
            txt = Path(path).with_suffix(".txt")
            transcripts[Path(path).stem] = (
                txt.read_text(encoding="utf-8").strip() if txt.is_file() else ""
            )
    else:
        raise AdapterError(f"unknown transcription backend {backend!r}")
    write_transcripts(transcripts, out_path)
    return transcripts


def predict_mos(wav_paths: list[str], out_path: str, backend: str = "utmos") -> list[dict]:
    """Predicted quality score per utterance, validated to [1, 5]."""
    records = []
    if backend == "utmos":
        try:
            import utmosv2  # noqa: F401
        except ImportError as exc:
            raise AdapterError(
                "the MOS predictor is not installed; use --backend stub for plumbing tests"
            ) from exc
        model = utmosv2.create_model(pretrained=True)
        for path in wav_paths:
            score = float(model.predict(input_path=str(path)))
            records.append({"utterance_id": Path(path).stem, "metric_name": "mos", "value": score})
    elif backend == "stub":
        for path in wav_paths:
            samples, rate = read_wav(path)
            # crude activity/flatness heuristic squeezed into the MOS range
            quality = stub_quality_score(samples, samples, rate)  # 1.0 by construction
            rms = float(np.sqrt(np.mean(samples**2))) if samples.size else 0.0
            peak = float(np.max(np.abs(samples))) if samples.size else 0.0
            crest = peak / rms if rms > 0 else 0.0
            score = 1.0 + 4.0 * quality / (1.0 + 0.05 * max(crest - 3.0, 0.0))
            records.append({
                "utterance_id": Path(path).stem,
                "metric_name": "mos",
                "value": float(np.clip(score, *MOS_RANGE)),
            })
    else:
        raise AdapterError(f"unknown MOS backend {backend!r}")
    for rec in records:
        if not (MOS_RANGE[0] <= rec["value"] <= MOS_RANGE[1]):
            raise AdapterError(f"MOS {rec['value']} for {rec['utterance_id']} outside {MOS_RANGE}")
    write_metric_records(records, out_path)
    return records


def pesq_scores(pairs: list[tuple[str, str]], backend: str = "pesq") -> list[float]:
    """Scores for (reference, estimate) path pairs, in order.

    The caller (the CLI) prints them one per line: that stdout stream is
    the whole coupling with the evaluation harness.
    """
    scores = []
    if backend == "pesq":
        try:
            from pesq import pesq as pesq_fn
        except ImportError as exc:
            raise AdapterError(
                "the pesq package is not installed; use --backend stub for plumbing tests"
            ) from exc
        for ref_path, est_path in pairs:
            ref, rate_ref = read_wav(ref_path)
            est, rate_est = read_wav(est_path)
            if rate_ref != rate_est:
                raise AdapterError(f"rate mismatch: {ref_path} vs {est_path}")
            mode = "wb" if rate_ref == 16000 else "nb"
            scores.append(float(pesq_fn(rate_ref, ref, est, mode)))
    elif backend == "stub":
        for ref_path, est_path in pairs:
            ref, rate = read_wav(ref_path)
            est, _ = read_wav(est_path)
            quality = stub_quality_score(ref, est, rate)
            lo, hi = PESQ_RANGE
            scores.append(float(np.clip(lo + (hi - lo) * quality, lo, hi)))
    else:
        raise AdapterError(f"unknown PESQ backend {backend!r}")
    return scores
