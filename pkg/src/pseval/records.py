"""MetricRecord: one (utterance, metric, value) observation, plus JSONL I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import FormatError

METRIC_NAMES = ("sdr", "sdri", "estoi", "pesq", "wer", "secs", "mos")


@dataclass(frozen=True)
class MetricRecord:
    """The atom of all reports.

    ``extra`` carries metric-specific detail (WER keeps its edit and
    reference-length counts there so corpus-level WER can stay
    error-weighted).
    """

    utterance_id: str
    metric_name: str
    value: float
    condition: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.metric_name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.metric_name!r}; expected one of {METRIC_NAMES}")
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value for {self.metric_name} on {self.utterance_id}")

    def to_record(self) -> dict:
        rec = {
            "utterance_id": self.utterance_id,
            "metric_name": self.metric_name,
            "value": self.value,
            "condition": self.condition,
        }
        if self.extra:
            rec["extra"] = self.extra
        return rec


def write_records(records: list[MetricRecord], path: str) -> None:
    """Write records as JSON lines, sorted for byte-stable output."""
    ordered = sorted(records, key=lambda r: (r.condition, r.metric_name, r.utterance_id))
    with open(path, "w", encoding="utf-8") as fh:
        for rec in ordered:
            fh.write(json.dumps(rec.to_record(), sort_keys=True))
            fh.write("\n")


def read_records(path: str) -> list[MetricRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                records.append(
                    MetricRecord(
                        utterance_id=rec["utterance_id"],
                        metric_name=rec["metric_name"],
                        value=float(rec["value"]),
                        condition=rec.get("condition", ""),
                        extra=rec.get("extra", {}),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad metric record: {exc}") from exc
    return records
