"""Bridge outputs must parse through the evaluation harness's own readers."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pseval_adapters.bridges import (
    AdapterError,
    extract_embeddings,
    pesq_scores,
    predict_mos,
    transcribe,
)
from pseval_adapters.synthesize import synthesize_batch
from pseval_adapters.wavio import write_wav

from conftest import make_speech

# the harness: test-side dependency only, used to verify round-trips
from pseval.embedding_metrics import read_embeddings
from pseval.records import read_records
from pseval.signal_metrics import run_external_metric
from pseval.text_metrics import read_transcripts


@pytest.fixture(scope="module")
def wav_batch(tmp_path_factory):
    root = tmp_path_factory.mktemp("wavs")
    rng = np.random.default_rng(0)
    paths = []
    for i in range(4):
        path = root / f"spk000_utt{i:03d}.wav"
        write_wav(make_speech(rng, 1.2), 16000, str(path))
        (root / f"spk000_utt{i:03d}.txt").write_text(f"sample sentence number {i}\n")
        paths.append(str(path))
    return root, paths


def test_embeddings_roundtrip_through_harness_reader(wav_batch, tmp_path):
    root, paths = wav_batch
    out = tmp_path / "emb.bin"
    written, failures = extract_embeddings(paths, str(out), backend="spectral")
    assert failures == []
    vectors = read_embeddings(str(out))
    assert [v.utterance_id for v in vectors] == sorted(Path(p).stem for p in paths)
    dims = {v.dim for v in vectors}
    assert len(dims) == 1
    assert all(np.isfinite(v.values).all() for v in vectors)


def test_embeddings_list_decode_failures_and_continue(wav_batch, tmp_path):
    root, paths = wav_batch
    broken = tmp_path / "broken.wav"
    broken.write_bytes(b"not audio at all")
    out = tmp_path / "emb.bin"
    written, failures = extract_embeddings(paths + [str(broken)], str(out), backend="spectral")
    assert len(written) == len(paths)
    assert len(failures) == 1 and "broken.wav" in failures[0]["path"]
    assert len(read_embeddings(str(out))) == len(paths)


def test_transcripts_roundtrip_through_harness_reader(wav_batch, tmp_path):
    root, paths = wav_batch
    out = tmp_path / "hyp.json"
    transcribe(paths, str(out), backend="sidecar")
    hypotheses = read_transcripts(str(out))
    assert hypotheses["spk000_utt002"] == "sample sentence number 2"
    # a wav without a sidecar yields the empty hypothesis, which is legal
    lone = tmp_path / "lone.wav"
    write_wav(make_speech(np.random.default_rng(1), 0.8), 16000, str(lone))
    transcribe([str(lone)], str(out), backend="sidecar")
    assert read_transcripts(str(out))["lone"] == ""


def test_mos_records_roundtrip_through_harness_reader(wav_batch, tmp_path):
    root, paths = wav_batch
    out = tmp_path / "mos.jsonl"
    predict_mos(paths, str(out), backend="stub")
    records = read_records(str(out))
    assert len(records) == len(paths)
    assert all(r.metric_name == "mos" and 1.0 <= r.value <= 5.0 for r in records)


def test_pesq_stub_scores_order_and_range(wav_batch, tmp_path):
    root, paths = wav_batch
    rng = np.random.default_rng(2)
    clean = make_speech(rng, 1.0)
    degraded = clean + 0.2 * rng.normal(size=clean.size)
    ref = tmp_path / "ref.wav"
    deg = tmp_path / "deg.wav"
    write_wav(clean, 16000, str(ref))
    write_wav(degraded, 16000, str(deg))
    same, different = pesq_scores(
        [(str(ref), str(ref)), (str(ref), str(deg))], backend="stub"
    )
    assert -0.5 <= different < same <= 4.64


def test_pesq_cli_satisfies_harness_adapter_contract(wav_batch, tmp_path):
    """End to end: the harness invokes the adapter CLI as a subprocess."""
    rng = np.random.default_rng(3)
    pairs = []
    for i in range(3):
        clean = make_speech(rng, 1.0)
        noisy = clean + 0.1 * rng.normal(size=clean.size)
        ref = tmp_path / f"ref{i}.wav"
        est = tmp_path / f"est{i}.wav"
        write_wav(clean, 16000, str(ref))
        write_wav(noisy, 16000, str(est))
        pairs.append((f"utt{i}", str(ref), str(est)))
    cmd = f"{sys.executable} -m pseval_adapters.cli pesq --backend stub"
    records = run_external_metric(cmd, pairs, kind="pesq", condition="stub")
    assert [r.utterance_id for r in records] == ["utt0", "utt1", "utt2"]
    assert all(-0.5 <= r.value <= 4.64 for r in records)


def test_pesq_cli_help_and_bad_manifest(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "pseval_adapters.cli", "pesq", str(tmp_path / "missing.tsv"),
         "--backend", "stub"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 3


STUB_TTS = r"""
import sys
import numpy as np
enrollment, text_file, out_dir = sys.argv[1], sys.argv[2], sys.argv[3]
sys.path.insert(0, {src!r})
from pseval_adapters.wavio import write_wav
lines = [l for l in open(text_file).read().splitlines() if l.strip()]
for i, line in enumerate(lines):
    rng = np.random.default_rng(i)
    t = np.arange(16000) / 16000
    x = 0.3 * np.sin(2 * np.pi * (200 + 20 * (len(line) % 7)) * t)
    write_wav(x, 16000, "{{}}/utt_{{:04d}}.wav".format(out_dir, i))
"""


def test_synthesize_batch_shell_contract(tmp_path):
    src = str(Path(__file__).resolve().parents[1] / "src")
    script = tmp_path / "stub_tts.py"
    script.write_text(STUB_TTS.format(src=src))
    enrollment = tmp_path / "enroll.wav"
    write_wav(make_speech(np.random.default_rng(4), 1.0), 16000, str(enrollment))
    texts = ["first sentence", "second sentence", "third one"]
    out_dir = tmp_path / "generated"
    command = f"{sys.executable} {script} {{enrollment}} {{text_file}} {{out_dir}}"
    wavs = synthesize_batch(command, str(enrollment), texts, str(out_dir),
                            utterance_ids=["utt_a", "utt_b", "utt_c"])
    assert [Path(w).name for w in wavs] == ["utt_a.wav", "utt_b.wav", "utt_c.wav"]
    for wav in wavs:
        assert Path(wav).is_file()


def test_synthesize_batch_failure_modes(tmp_path):
    enrollment = tmp_path / "enroll.wav"
    write_wav(make_speech(np.random.default_rng(5), 0.5), 16000, str(enrollment))
    with pytest.raises(AdapterError):
        synthesize_batch("false", str(enrollment), ["text"], str(tmp_path / "out1"))
    with pytest.raises(AdapterError):
        synthesize_batch("true", str(enrollment), ["text"], str(tmp_path / "out2"))


def test_unknown_backends_rejected(wav_batch, tmp_path):
    root, paths = wav_batch
    with pytest.raises(AdapterError):
        extract_embeddings(paths, str(tmp_path / "x.bin"), backend="mystery")
    with pytest.raises(AdapterError):
        transcribe(paths, str(tmp_path / "x.json"), backend="mystery")
    with pytest.raises(AdapterError):
        predict_mos(paths, str(tmp_path / "x.jsonl"), backend="mystery")
    with pytest.raises(AdapterError):
        pesq_scores([(paths[0], paths[0])], backend="mystery")
