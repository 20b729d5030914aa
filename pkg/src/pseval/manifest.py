"""Challenge manifest: corpus scanning, split construction, validation.

The manifest is the single registry of speakers, utterance splits, noise
assignments, and (once registered) synthetic augmentation audio. It is a
pure function of (corpus index, master seed), serialized as versioned JSON
with all paths relative to the corpus root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .audio import wav_info
from .errors import FormatError, InsufficientCorpusError
from .mixing import assign_noises
from .rng import keyed_generator

SCHEMA_VERSION = 1

# Challenge geometry.
SPEAKERS_TOTAL = 20
SPEAKERS_PER_KIND = 10
SPEAKERS_PER_GENDER = 5
NOISE_POOL_SIZE = 88
NOISES_PER_SPEAKER = 5
ENROLLMENT_COUNT = 1
TTS_EVAL_COUNT = 50
PSE_TEST_COUNT = 9
MIN_QUALIFYING_UTTERANCES = ENROLLMENT_COUNT + TTS_EVAL_COUNT + PSE_TEST_COUNT  # 60

# Duration gates, seconds.
UTTERANCE_MIN_SECONDS = 3.0
UTTERANCE_MAX_SECONDS = 16.0
ENROLLMENT_MAX_SECONDS = 14.0

# Synthetic augmentation bucket sizes per speaker.
AUGMENT_CORE_COUNT = 40
AUGMENT_EXTRA_COUNT = 180
VALIDATION_SIX_MIN_COUNT = 10
VALIDATION_THIRTY_MIN_COUNT = 30
AUGMENT_TOTAL = (
    AUGMENT_CORE_COUNT + AUGMENT_EXTRA_COUNT + VALIDATION_SIX_MIN_COUNT + VALIDATION_THIRTY_MIN_COUNT
)

SPEAKER_KINDS = ("real", "virtual")
GENDERS = ("m", "f")


@dataclass(frozen=True)
class UtteranceRef:
    utterance_id: str
    path: str  # relative to audio_root
    duration_s: float
    text: str = ""

    def to_record(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "path": self.path,
            "duration_s": self.duration_s,
            "text": self.text,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "UtteranceRef":
        return cls(
            utterance_id=rec["utterance_id"],
            path=rec["path"],
            duration_s=float(rec["duration_s"]),
            text=rec.get("text", ""),
        )


@dataclass
class SpeakerEntry:
    speaker_id: str
    kind: str
    gender: str
    enrollment: UtteranceRef
    tts_eval: list[UtteranceRef]
    pse_test: list[UtteranceRef]
    noise_ids: list[str]
    augment_core: list[UtteranceRef] = field(default_factory=list)
    augment_extra: list[UtteranceRef] = field(default_factory=list)
    validation_six_min: list[UtteranceRef] = field(default_factory=list)
    validation_thirty_min: list[UtteranceRef] = field(default_factory=list)

    @property
    def has_augmentation(self) -> bool:
        return bool(
            self.augment_core or self.augment_extra
            or self.validation_six_min or self.validation_thirty_min
        )

    def to_record(self) -> dict:
        return {
            "speaker_id": self.speaker_id,
            "kind": self.kind,
            "gender": self.gender,
            "enrollment": self.enrollment.to_record(),
            "tts_eval": [u.to_record() for u in self.tts_eval],
            "pse_test": [u.to_record() for u in self.pse_test],
            "noise_ids": list(self.noise_ids),
            "augment_core": [u.to_record() for u in self.augment_core],
            "augment_extra": [u.to_record() for u in self.augment_extra],
            "validation_six_min": [u.to_record() for u in self.validation_six_min],
            "validation_thirty_min": [u.to_record() for u in self.validation_thirty_min],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SpeakerEntry":
        return cls(
            speaker_id=rec["speaker_id"],
            kind=rec["kind"],
            gender=rec["gender"],
            enrollment=UtteranceRef.from_record(rec["enrollment"]),
            tts_eval=[UtteranceRef.from_record(u) for u in rec["tts_eval"]],
            pse_test=[UtteranceRef.from_record(u) for u in rec["pse_test"]],
            noise_ids=list(rec["noise_ids"]),
            augment_core=[UtteranceRef.from_record(u) for u in rec.get("augment_core", [])],
            augment_extra=[UtteranceRef.from_record(u) for u in rec.get("augment_extra", [])],
            validation_six_min=[UtteranceRef.from_record(u) for u in rec.get("validation_six_min", [])],
            validation_thirty_min=[UtteranceRef.from_record(u) for u in rec.get("validation_thirty_min", [])],
        )


@dataclass
class ChallengeManifest:
    speakers: list[SpeakerEntry]
    noise_pool: list[str]
    noise_files: dict[str, str]  # noise_id -> path relative to audio_root
    master_seed: int
    audio_root: str
    schema_version: int = SCHEMA_VERSION

    def speaker(self, speaker_id: str) -> SpeakerEntry:
        for entry in self.speakers:
            if entry.speaker_id == speaker_id:
                return entry
        raise KeyError(speaker_id)

    def to_record(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "master_seed": self.master_seed,
            "audio_root": self.audio_root,
            "noise_pool": list(self.noise_pool),
            "noise_files": dict(sorted(self.noise_files.items())),
            "speakers": [s.to_record() for s in sorted(self.speakers, key=lambda s: s.speaker_id)],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ChallengeManifest":
        return cls(
            speakers=[SpeakerEntry.from_record(s) for s in rec["speakers"]],
            noise_pool=list(rec["noise_pool"]),
            noise_files=dict(rec["noise_files"]),
            master_seed=int(rec["master_seed"]),
            audio_root=rec["audio_root"],
            schema_version=int(rec.get("schema_version", SCHEMA_VERSION)),
        )


def save_manifest(manifest: ChallengeManifest, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_record(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_manifest(path: str) -> ChallengeManifest:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            rec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid manifest JSON: {exc}") from exc
    try:
        return ChallengeManifest.from_record(rec)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: manifest does not match schema: {exc}") from exc


# --- corpus scanning ---------------------------------------------------------

@dataclass
class SpeakerSource:
    speaker_id: str
    kind: str
    gender: str
    utterances: list[UtteranceRef]


@dataclass
class CorpusIndex:
    """Directory scan result the manifest builder consumes.

    Expected layout under the corpus root:
        speakers.json                      {speaker_id: {"kind":, "gender":}}
        speech/<speaker_id>/<utt_id>.wav   plus optional <utt_id>.txt transcript
        noise/<noise_id>.wav
    """

    root: str
    speakers: list[SpeakerSource]
    noise_files: dict[str, str]


def scan_corpus(root: str) -> CorpusIndex:
    root_path = Path(root)
    meta_path = root_path / "speakers.json"
    if not meta_path.is_file():
        raise FormatError(f"{meta_path}: speaker metadata file missing")
    with open(meta_path, "r", encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{meta_path}: invalid JSON: {exc}") from exc

    speakers = []
    for speaker_id in sorted(meta):
        info = meta[speaker_id]
        kind, gender = info.get("kind", ""), info.get("gender", "")
        speaker_dir = root_path / "speech" / speaker_id
        utterances = []
        if speaker_dir.is_dir():
            for wav_path in sorted(speaker_dir.glob("*.wav")):
                info_hdr = wav_info(str(wav_path))
                txt_path = wav_path.with_suffix(".txt")
                text = txt_path.read_text(encoding="utf-8").strip() if txt_path.is_file() else ""
                utterances.append(
                    UtteranceRef(
                        utterance_id=wav_path.stem,
                        path=str(wav_path.relative_to(root_path)),
                        duration_s=info_hdr.duration_seconds,
                        text=text,
                    )
                )
        speakers.append(SpeakerSource(speaker_id=speaker_id, kind=kind, gender=gender, utterances=utterances))

    noise_files = {}
    noise_dir = root_path / "noise"
    if noise_dir.is_dir():
        for wav_path in sorted(noise_dir.glob("*.wav")):
            noise_files[wav_path.stem] = str(wav_path.relative_to(root_path))
    return CorpusIndex(root=str(root_path), speakers=speakers, noise_files=noise_files)


# --- manifest construction ---------------------------------------------------

def _qualifying(utterances: list[UtteranceRef]) -> list[UtteranceRef]:
    return [
        u for u in utterances
        if UTTERANCE_MIN_SECONDS <= u.duration_s <= UTTERANCE_MAX_SECONDS
    ]


def build_manifest(index: CorpusIndex, master_seed: int) -> ChallengeManifest:
    """Seeded per-speaker selection of 1 enrollment / 50 TTS-eval / 9 PSE-test.

    Deterministic for a fixed (corpus, master_seed): per-speaker keyed
    permutation over the duration-qualified utterances; the enrollment slot
    additionally requires <= 14 s.
    """
    entries = []
    problems = []
    for source in index.speakers:
        candidates = _qualifying(source.utterances)
        if len(candidates) < MIN_QUALIFYING_UTTERANCES:
            problems.append(
                f"{source.speaker_id}: {len(candidates)} qualifying utterances, "
                f"need {MIN_QUALIFYING_UTTERANCES}"
            )
            continue
        rng = keyed_generator(master_seed, source.speaker_id, "split")
        ordered = sorted(candidates, key=lambda u: u.utterance_id)
        perm = [ordered[i] for i in rng.permutation(len(ordered))]
        enrollment_idx = next(
            (i for i, u in enumerate(perm) if u.duration_s <= ENROLLMENT_MAX_SECONDS), None
        )
        if enrollment_idx is None:
            problems.append(f"{source.speaker_id}: no utterance short enough for enrollment (<= 14 s)")
            continue
        enrollment = perm.pop(enrollment_idx)
        entries.append(
            SpeakerEntry(
                speaker_id=source.speaker_id,
                kind=source.kind,
                gender=source.gender,
                enrollment=enrollment,
                tts_eval=perm[:TTS_EVAL_COUNT],
                pse_test=perm[TTS_EVAL_COUNT : TTS_EVAL_COUNT + PSE_TEST_COUNT],
                noise_ids=[],
            )
        )
    if problems:
        raise InsufficientCorpusError("; ".join(problems))

    assignment = assign_noises(
        [e.speaker_id for e in entries],
        sorted(index.noise_files),
        per_speaker=NOISES_PER_SPEAKER,
        master_seed=master_seed,
    )
    for entry in entries:
        entry.noise_ids = assignment[entry.speaker_id]
    return ChallengeManifest(
        speakers=sorted(entries, key=lambda e: e.speaker_id),
        noise_pool=sorted(index.noise_files),
        noise_files=dict(index.noise_files),
        master_seed=master_seed,
        audio_root=index.root,
    )


def register_augmentation(
    manifest: ChallengeManifest, speaker_id: str, utterances: list[UtteranceRef]
) -> None:
    """File synthetic utterances into the speaker's augmentation buckets.

    Sorted by utterance id, the first 40 become the core training set, the
    next 180 the extension, then 10 + 30 validation utterances for the two
    fine-tuning regimes. At least 50 (core + small validation) are needed
    for the six-minute regime, 260 for the full thirty-minute regime.
    """
    entry = manifest.speaker(speaker_id)
    ordered = sorted(utterances, key=lambda u: u.utterance_id)
    if len(ordered) < AUGMENT_CORE_COUNT + VALIDATION_SIX_MIN_COUNT:
        raise InsufficientCorpusError(
            f"{speaker_id}: {len(ordered)} synthetic utterances, need at least "
            f"{AUGMENT_CORE_COUNT + VALIDATION_SIX_MIN_COUNT}"
        )
    entry.augment_core = ordered[:AUGMENT_CORE_COUNT]
    rest = ordered[AUGMENT_CORE_COUNT:]
    if len(ordered) >= AUGMENT_TOTAL:
        entry.augment_extra = rest[:AUGMENT_EXTRA_COUNT]
        rest = rest[AUGMENT_EXTRA_COUNT:]
        entry.validation_six_min = rest[:VALIDATION_SIX_MIN_COUNT]
        entry.validation_thirty_min = rest[
            VALIDATION_SIX_MIN_COUNT : VALIDATION_SIX_MIN_COUNT + VALIDATION_THIRTY_MIN_COUNT
        ]
    else:
        entry.augment_extra = []
        entry.validation_six_min = rest[:VALIDATION_SIX_MIN_COUNT]
        entry.validation_thirty_min = []


# --- validation --------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    speaker_id: str = ""
    utterance_id: str = ""

    def to_record(self) -> dict:
        rec = {"code": self.code, "message": self.message}
        if self.speaker_id:
            rec["speaker_id"] = self.speaker_id
        if self.utterance_id:
            rec["utterance_id"] = self.utterance_id
        return rec


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def valid(self) -> bool:
        return not self.violations


def _check_durations(entry: SpeakerEntry, out: list[Violation]) -> None:
    if not (UTTERANCE_MIN_SECONDS <= entry.enrollment.duration_s <= ENROLLMENT_MAX_SECONDS):
        out.append(Violation(
            code="enrollment_duration",
            message=f"enrollment {entry.enrollment.duration_s:.2f}s outside "
                    f"[{UTTERANCE_MIN_SECONDS:.0f}, {ENROLLMENT_MAX_SECONDS:.0f}]s",
            speaker_id=entry.speaker_id,
            utterance_id=entry.enrollment.utterance_id,
        ))
    for utt in [entry.enrollment, *entry.tts_eval, *entry.pse_test]:
        if not (UTTERANCE_MIN_SECONDS <= utt.duration_s <= UTTERANCE_MAX_SECONDS):
            out.append(Violation(
                code="utterance_duration",
                message=f"duration {utt.duration_s:.2f}s outside "
                        f"[{UTTERANCE_MIN_SECONDS:.0f}, {UTTERANCE_MAX_SECONDS:.0f}]s",
                speaker_id=entry.speaker_id,
                utterance_id=utt.utterance_id,
            ))


def validate_manifest(manifest: ChallengeManifest) -> ValidationReport:
    """Check every manifest invariant; violations are data, not exceptions."""
    out: list[Violation] = []

    if len(manifest.speakers) != SPEAKERS_TOTAL:
        out.append(Violation(
            code="speaker_count",
            message=f"{len(manifest.speakers)} speakers, expected {SPEAKERS_TOTAL}",
        ))
    for kind in SPEAKER_KINDS:
        of_kind = [s for s in manifest.speakers if s.kind == kind]
        if len(of_kind) != SPEAKERS_PER_KIND:
            out.append(Violation(
                code="kind_count",
                message=f"{len(of_kind)} {kind} speakers, expected {SPEAKERS_PER_KIND}",
            ))
        for gender in GENDERS:
            n = sum(1 for s in of_kind if s.gender == gender)
            if n != SPEAKERS_PER_GENDER:
                out.append(Violation(
                    code="gender_count",
                    message=f"{n} {kind}/{gender} speakers, expected {SPEAKERS_PER_GENDER}",
                ))
    for entry in manifest.speakers:
        if entry.kind not in SPEAKER_KINDS:
            out.append(Violation(
                code="speaker_kind", message=f"unknown kind {entry.kind!r}", speaker_id=entry.speaker_id
            ))
        if entry.gender not in GENDERS:
            out.append(Violation(
                code="speaker_gender", message=f"unknown gender {entry.gender!r}", speaker_id=entry.speaker_id
            ))
        if len(entry.tts_eval) != TTS_EVAL_COUNT:
            out.append(Violation(
                code="tts_eval_count",
                message=f"{len(entry.tts_eval)} TTS-eval utterances, expected {TTS_EVAL_COUNT}",
                speaker_id=entry.speaker_id,
            ))
        if len(entry.pse_test) != PSE_TEST_COUNT:
            out.append(Violation(
                code="pse_test_count",
                message=f"{len(entry.pse_test)} PSE-test utterances, expected {PSE_TEST_COUNT}",
                speaker_id=entry.speaker_id,
            ))
        ids = [entry.enrollment.utterance_id]
        ids += [u.utterance_id for u in entry.tts_eval]
        ids += [u.utterance_id for u in entry.pse_test]
        if len(set(ids)) != len(ids):
            out.append(Violation(
                code="split_overlap",
                message="enrollment/tts_eval/pse_test sets are not disjoint",
                speaker_id=entry.speaker_id,
            ))
        _check_durations(entry, out)
        for utt in entry.tts_eval:
            if not utt.text:
                out.append(Violation(
                    code="missing_text",
                    message="TTS-eval utterance has no reference text",
                    speaker_id=entry.speaker_id,
                    utterance_id=utt.utterance_id,
                ))
        if len(entry.noise_ids) != NOISES_PER_SPEAKER or len(set(entry.noise_ids)) != NOISES_PER_SPEAKER:
            out.append(Violation(
                code="noise_assignment",
                message=f"expected {NOISES_PER_SPEAKER} distinct noise ids, got {entry.noise_ids}",
                speaker_id=entry.speaker_id,
            ))
        missing = [n for n in entry.noise_ids if n not in manifest.noise_pool]
        if missing:
            out.append(Violation(
                code="noise_outside_pool",
                message=f"assigned noises not in pool: {missing}",
                speaker_id=entry.speaker_id,
            ))
        if entry.has_augmentation:
            expected = {
                "augment_core": AUGMENT_CORE_COUNT,
                "augment_extra": AUGMENT_EXTRA_COUNT,
                "validation_six_min": VALIDATION_SIX_MIN_COUNT,
                "validation_thirty_min": VALIDATION_THIRTY_MIN_COUNT,
            }
            for attr, want in expected.items():
                got = len(getattr(entry, attr))
                # six-min-only registration leaves the thirty-min buckets empty
                if got not in (0, want):
                    out.append(Violation(
                        code="augment_count",
                        message=f"{attr} has {got} utterances, expected {want} (or 0)",
                        speaker_id=entry.speaker_id,
                    ))

    if len(manifest.noise_pool) != NOISE_POOL_SIZE:
        out.append(Violation(
            code="noise_pool_size",
            message=f"noise pool has {len(manifest.noise_pool)} ids, expected {NOISE_POOL_SIZE}",
        ))
    for noise_id in manifest.noise_pool:
        if noise_id not in manifest.noise_files:
            out.append(Violation(
                code="noise_file_missing", message=f"no file registered for noise {noise_id!r}"
            ))
    return ValidationReport(violations=out)
