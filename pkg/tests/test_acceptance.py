"""Acceptance suite: one test (or test group) per release criterion.

A pass/fail line per criterion is printed at the end of the run (see
conftest.pytest_terminal_summary). Criteria 7 and 8 drive the real CLI over
a full-size 20-speaker synthetic corpus.
"""

import functools
import hashlib
import itertools
import json
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from pseval.audio import AudioBuffer, measure_power, read_wav
from pseval.cli import main
from pseval.embedding_metrics import EmbeddingVector, secs
from pseval.manifest import (
    UtteranceRef,
    build_manifest,
    load_manifest,
    register_augmentation,
    scan_corpus,
    validate_manifest,
)
from pseval.mixing import MixtureSpec, synthesize_mixture
from pseval.protocol import plan_finetune_set, plan_pse_testset, read_ledger
from pseval.records import MetricRecord, read_records
from pseval.report import render, summarize
from pseval.signal_metrics import SDR_CAP_DB, estoi, sdr, sdri
from pseval.text_metrics import align, wer

from helpers import build_synthetic_corpus, noiselike, speechlike

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def challenge_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("challenge_corpus")
    build_synthetic_corpus(root, n_speakers=20, utts_per_speaker=60, n_noises=88)
    return root


# -- criterion 1 ---------------------------------------------------------------

@pytest.mark.criterion(1, "SNR round-trip within 0.01 dB on 200 random triples, < 5 s")
def test_snr_roundtrip_200_triples():
    rng = np.random.default_rng(1001)
    start = time.monotonic()
    for i in range(200):
        clean = AudioBuffer(speechlike(rng, rng.uniform(0.3, 1.0), 16000), 16000)
        noise = AudioBuffer(noiselike(rng, rng.uniform(0.2, 1.5), 16000), 16000)
        target = float(rng.uniform(-20.0, 20.0))
        spec = MixtureSpec(
            mixture_id=f"m{i}", speaker_id="s", clean_id="c", noise_id="n",
            snr_db=target, seed=int(rng.integers(2**62)),
        )
        result = synthesize_mixture(spec, clean, noise)
        noise_part = result.mixture.samples / result.joint_scale - clean.samples
        measured = 10.0 * np.log10(
            measure_power(clean).active_power / np.mean(noise_part**2)
        )
        assert measured == pytest.approx(target, abs=0.01)
    assert time.monotonic() - start < 5.0


# -- criterion 2 ---------------------------------------------------------------

@pytest.mark.criterion(2, "SDR analytic suite and joint-scale invariance")
def test_sdr_analytic_suite():
    rng = np.random.default_rng(1002)
    s = AudioBuffer(speechlike(rng, 1.0, 16000), 16000)
    assert sdr(s, AudioBuffer(0.5 * s.samples, 16000)) == pytest.approx(6.0206, abs=1e-4)
    assert sdr(s, s) == SDR_CAP_DB
    assert sdr(s, AudioBuffer(np.zeros(len(s)), 16000)) == pytest.approx(0.0, abs=1e-9)
    for _ in range(50):
        ref = AudioBuffer(speechlike(rng, 0.4, 16000), 16000)
        est = AudioBuffer(ref.samples + 0.1 * rng.normal(size=len(ref)), 16000)
        c = float(rng.uniform(0.01, 50.0)) * float(rng.choice([-1.0, 1.0]))
        base = sdr(ref, est)
        scaled = sdr(AudioBuffer(c * ref.samples, 16000), AudioBuffer(c * est.samples, 16000))
        assert scaled == pytest.approx(base, abs=1e-9)


# -- criterion 3 ---------------------------------------------------------------

@pytest.mark.criterion(3, "SDRI of the identity enhancer is exactly zero")
def test_sdri_identity_exact_zero():
    rng = np.random.default_rng(1003)
    for _ in range(50):
        ref = AudioBuffer(speechlike(rng, 0.4, 16000), 16000)
        noisy = AudioBuffer(ref.samples + 0.2 * rng.normal(size=len(ref)), 16000)
        assert sdri(ref, noisy, noisy) == 0.0


# -- criterion 4 ---------------------------------------------------------------

@pytest.mark.criterion(4, "eSTOI self-score, reference-fixture agreement, < 10 s")
def test_estoi_self_and_fixture_agreement():
    start = time.monotonic()
    for seed in range(20):
        rng = np.random.default_rng(2000 + seed)
        s = AudioBuffer(speechlike(rng, rng.uniform(1.5, 3.0), 16000), 16000)
        assert estoi(s, s) == pytest.approx(1.0, abs=1e-6)
    expected = json.loads((FIXTURES / "estoi" / "expected_scores.json").read_text())
    assert len(expected) == 10
    for pair_id, want in expected.items():
        ref = read_wav(str(FIXTURES / "estoi" / f"{pair_id}_ref.wav"))
        deg = read_wav(str(FIXTURES / "estoi" / f"{pair_id}_deg.wav"))
        assert estoi(ref, deg) == pytest.approx(want, abs=1e-3), pair_id
    assert time.monotonic() - start < 10.0


# -- criterion 5 ---------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _oracle_distance(ref: tuple, hyp: tuple) -> int:
    """Exhaustive minimum over all edit scripts, by plain recursion."""
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    return min(
        _oracle_distance(ref[:-1], hyp[:-1]) + (ref[-1] != hyp[-1]),
        _oracle_distance(ref[:-1], hyp) + 1,
        _oracle_distance(ref, hyp[:-1]) + 1,
    )


@pytest.mark.criterion(5, "WER equals the edit-script oracle on every pair (len <= 5, 3 symbols)")
def test_wer_exhaustive_oracle_equivalence():
    alphabet = ("a", "b", "c")
    sequences = [
        seq
        for length in range(0, 6)
        for seq in itertools.product(alphabet, repeat=length)
    ]
    references = [seq for seq in sequences if seq]
    checked = 0
    for ref in references:
        for hyp in sequences:
            counts = align(list(ref), list(hyp))
            want = _oracle_distance(ref, hyp)
            assert counts.total_edits == want
            assert wer(list(ref), list(hyp)) == want / len(ref)
            checked += 1
    assert checked == len(references) * len(sequences)


# -- criterion 6 ---------------------------------------------------------------

@pytest.mark.criterion(6, "SECS analytic values exact; scale invariance within 1e-12")
def test_secs_analytic():
    a = EmbeddingVector("a", np.array([3.0, 4.0]))
    assert secs(a, EmbeddingVector("b", np.array([3.0, 4.0]))) == 1.0
    assert secs(
        EmbeddingVector("x", np.array([1.0, 0.0])),
        EmbeddingVector("y", np.array([0.0, 1.0])),
    ) == 0.0
    assert secs(a, EmbeddingVector("n", np.array([-3.0, -4.0]))) == -1.0
    rng = np.random.default_rng(1006)
    for _ in range(25):
        u = EmbeddingVector("u", rng.normal(size=24))
        v = EmbeddingVector("v", rng.normal(size=24))
        base = secs(u, v)
        for c in (1e-6, 0.125, 9.5, 1e6):
            assert secs(EmbeddingVector("cu", c * u.values), v) == pytest.approx(base, abs=1e-12)


# -- criterion 7 ---------------------------------------------------------------

@pytest.mark.criterion(7, "challenge geometry: valid manifest, 900 test mixtures, ledger sizes")
def test_protocol_counts(challenge_corpus):
    manifest = build_manifest(scan_corpus(str(challenge_corpus)), master_seed=777)
    report = validate_manifest(manifest)
    assert report.valid, [v.to_record() for v in report.violations]
    assert len(manifest.speakers) == 20
    for entry in manifest.speakers:
        assert len(entry.tts_eval) == 50 and len(entry.pse_test) == 9
        ids = {entry.enrollment.utterance_id}
        ids |= {u.utterance_id for u in entry.tts_eval}
        ids |= {u.utterance_id for u in entry.pse_test}
        assert len(ids) == 60

    specs = plan_pse_testset(manifest)
    assert len(specs) == 900
    per_speaker = {}
    for spec in specs:
        per_speaker[spec.speaker_id] = per_speaker.get(spec.speaker_id, 0) + 1
        assert spec.snr_db in (-2.5, 0.0, 2.5)
    assert set(per_speaker.values()) == {45}

    for entry in manifest.speakers:
        refs = [
            UtteranceRef(f"{entry.speaker_id}_syn{i:03d}", f"syn/{i:03d}.wav", 3.2)
            for i in range(260)
        ]
        register_augmentation(manifest, entry.speaker_id, refs)
    for regime, want_train, want_val in (("six_min", 40, 10), ("thirty_min", 220, 30)):
        ledger = plan_finetune_set(manifest, regime)
        by_speaker = {}
        for spec in ledger:
            counts = by_speaker.setdefault(spec.speaker_id, {"train": 0, "validation": 0})
            counts[spec.role] += 1
        assert all(
            c == {"train": want_train, "validation": want_val} for c in by_speaker.values()
        )


# -- criterion 8 ---------------------------------------------------------------

def _hash_tree(root: Path) -> dict:
    digests = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digests[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return digests


def _end_to_end(corpus: Path, out_dir: Path, parallelism: int) -> None:
    base = [
        "--corpus-root", str(corpus),
        "--output-dir", str(out_dir),
        "--master-seed", "777",
        "--parallelism", str(parallelism),
        "--mix-encoding", "pcm16",
    ]
    assert main(["manifest", "build", *base]) == 0
    assert main(["mix", "run", "--set", "pse_test", *base]) == 0
    ledger = read_ledger(str(out_dir / "mixtures" / "pse_test_ledger.jsonl"))
    enhanced = out_dir / "enhanced"
    for spec in ledger:
        dst = enhanced / spec.speaker_id / f"{spec.mixture_id}.wav"
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(out_dir / "mixtures" / spec.output_path, dst)
    assert main([
        "eval", "pse", "--enhanced-root", str(enhanced), "--condition", "stub", *base,
    ]) == 0


@pytest.mark.criterion(8, "end-to-end determinism at parallelism 1 vs 8; stub SDRI == 0")
def test_end_to_end_determinism(challenge_corpus, tmp_path_factory):
    run_a = tmp_path_factory.mktemp("run_par1")
    run_b = tmp_path_factory.mktemp("run_par8")
    _end_to_end(challenge_corpus, run_a, parallelism=1)
    _end_to_end(challenge_corpus, run_b, parallelism=8)

    for rel in (
        "manifest.json",
        "mixtures/pse_test_ledger.jsonl",
        "records/pse_stub.jsonl",
        "reports/pse_stub.md",
        "reports/pse_stub.csv",
        "reports/pse_stub.json",
    ):
        assert (run_a / rel).read_bytes() == (run_b / rel).read_bytes(), rel
    # audio bytes as well: the whole mixture tree must match
    assert _hash_tree(run_a / "mixtures") == _hash_tree(run_b / "mixtures")

    records = read_records(str(run_a / "records" / "pse_stub.jsonl"))
    sdri_records = [r for r in records if r.metric_name == "sdri"]
    assert len(sdri_records) == 900
    assert all(abs(r.value) <= 1e-9 for r in sdri_records)


# -- criterion 9 ---------------------------------------------------------------

@pytest.mark.criterion(9, "report fixture byte-identical; interval closed forms exact")
def test_report_fixture_and_intervals():
    means = {"sdri": 9.495, "sdr": 9.997, "estoi": 0.708, "pesq": 1.487}
    deltas = {"sdri": 0.1, "sdr": 0.1, "estoi": 0.05, "pesq": 0.1}
    records = []
    for metric, mean in means.items():
        records.append(MetricRecord("u1", metric, mean - deltas[metric], condition="Generalist-M"))
        records.append(MetricRecord("u2", metric, mean + deltas[metric], condition="Generalist-M"))
    stats = summarize(records, interval_kind="spread_1p96")
    for stat in stats:
        assert stat.mean == pytest.approx(means[stat.metric_name], abs=1e-12)
    rendered = render(stats, "markdown")
    assert rendered.encode() == (FIXTURES / "report" / "generalist_m.md").read_bytes()

    (spread,) = summarize(
        [MetricRecord(f"u{i}", "sdr", v) for i, v in enumerate([1.0, 2.0, 3.0])],
        interval_kind="spread_1p96",
    )
    assert (spread.mean, spread.stddev, spread.interval_half_width) == (2.0, 1.0, 1.96)
    (ci,) = summarize(
        [MetricRecord(f"u{i}", "sdr", v) for i, v in enumerate([1.0, 2.0, 3.0])],
        interval_kind="mean_ci_t",
    )
    assert ci.interval_half_width == pytest.approx(2.4841377117195456, abs=1e-9)


# -- criterion 10 ----------------------------------------------------------------

@pytest.mark.criterion(10, "published absolute scores are format fixtures, not targets")
def test_absolute_table_values_are_not_reproduction_targets():
    """The challenge's published absolute scores (for example SECS 0.973,
    WER 3.152%, SDRI 13.890) come from external neural models and
    full-scale training runs. This harness asserts them nowhere as computed
    values; they appear only as rendering-fixture inputs (criterion 9) and
    through the property suites. This test documents that boundary and
    checks the fixture is indeed input-only."""
    fixture = (FIXTURES / "report" / "generalist_m.md").read_text()
    # fixture shows the published means with harness-chosen spreads
    assert "9.495" in fixture and "0.708" in fixture
    # and the harness never computed them from audio: the fixture row is
    # reproduced from synthetic two-point records in criterion 9 alone
    assert "Generalist-M" in fixture
