"""Word error rate between ASR hypotheses and reference texts.

The normalization policy is deliberately explicit: lowercase, Unicode NFKC,
punctuation stripped except intra-word apostrophes, whitespace tokens.
Number words are left alone; rewriting text silently would hide ASR
behavior.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass

from .errors import FormatError

_APOSTROPHES = str.maketrans({"’": "'", "ʼ": "'", "`": "'"})
# split on anything that is not a word character or apostrophe; underscores
# count as punctuation too
_NON_TOKEN = re.compile(r"[^\w']+|_+", re.UNICODE)


@dataclass(frozen=True)
class Transcript:
    utterance_id: str
    text: str


@dataclass(frozen=True)
class EditCounts:
    """Levenshtein alignment outcome for one (reference, hypothesis) pair."""

    substitutions: int
    deletions: int
    insertions: int
    reference_length: int

    @property
    def total_edits(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> float:
        return self.total_edits / self.reference_length


def normalize_text(raw: str) -> list[str]:
    """Lowercased, punctuation-free tokens; intra-word apostrophes survive."""
    text = unicodedata.normalize("NFKC", raw).lower().translate(_APOSTROPHES)
    tokens = []
    for piece in _NON_TOKEN.split(text):
        piece = piece.strip("'")
        if piece:
            tokens.append(piece)
    return tokens


def align(reference: list[str], hypothesis: list[str]) -> EditCounts:
    """Unit-cost Levenshtein alignment by dynamic programming.

    Backtracking tie-break precedence is substitution > deletion >
    insertion; that affects how edits are labelled, never the total.
    """
    if not reference:
        raise ValueError("WER is undefined for an empty reference")
    n, m = len(reference), len(hypothesis)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        ref_tok = reference[i - 1]
        row, prev = dist[i], dist[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ref_tok != hypothesis[j - 1])
            dele = prev[j] + 1
            ins = row[j - 1] + 1
            row[j] = min(sub, dele, ins)

    subs = dels = inss = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (reference[i - 1] != hypothesis[j - 1]):
            if reference[i - 1] != hypothesis[j - 1]:
                subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            inss += 1
            j -= 1
    return EditCounts(substitutions=subs, deletions=dels, insertions=inss, reference_length=n)


def wer(reference: list[str], hypothesis: list[str]) -> float:
    """(S + D + I) / |reference| for one utterance."""
    return align(reference, hypothesis).rate


def corpus_wer(records: list[tuple[list[str], list[str]]]) -> float:
    """Error-weighted corpus WER: sum of edits over sum of reference lengths.

    This is the standard ASR convention; a mean of per-utterance rates
    would overweight short utterances.
    """
    if not records:
        raise ValueError("corpus_wer needs at least one record")
    edits = 0
    length = 0
    for reference, hypothesis in records:
        counts = align(reference, hypothesis)
        edits += counts.total_edits
        length += counts.reference_length
    return edits / length


def read_transcripts(path: str) -> dict[str, str]:
    """Transcript set as JSON: {utterance_id: text}."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid transcript JSON: {exc}") from exc
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in data.items()
    ):
        raise FormatError(f"{path}: transcript JSON must map utterance_id to text")
    return data


def write_transcripts(transcripts: dict[str, str], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(transcripts, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")
