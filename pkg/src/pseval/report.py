"""Aggregate MetricRecords into per-condition summary tables.

The plus/minus interval defaults to 1.96 x sample stddev (population
spread), matching the magnitudes the challenge tables print; a
t-distribution CI of the mean is available as the alternative and every
output labels which one it used. WER is reported as a bare error-weighted
corpus percentage, no interval.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

from scipy.stats import t as student_t

from .records import MetricRecord

INTERVAL_KINDS = ("spread_1p96", "mean_ci_t")

# Column order in rendered tables, signal family first.
METRIC_ORDER = ("sdri", "sdr", "estoi", "pesq", "secs", "mos", "wer")

METRIC_LABELS = {
    "sdri": "SDRI",
    "sdr": "SDR",
    "estoi": "eSTOI",
    "pesq": "PESQ",
    "secs": "SECS",
    "mos": "UTMOS",
    "wer": "WER (%)",
}


@dataclass(frozen=True)
class SummaryStat:
    condition: str
    metric_name: str
    n: int
    mean: float
    stddev: float
    interval_half_width: float
    interval_kind: str
    degenerate: bool = False  # single observation: no spread is defined

    def to_record(self) -> dict:
        return {
            "condition": self.condition,
            "metric_name": self.metric_name,
            "n": self.n,
            "mean": self.mean,
            "stddev": self.stddev,
            "interval_half_width": self.interval_half_width,
            "interval_kind": self.interval_kind,
            "degenerate": self.degenerate,
        }


def _mean_and_stddev(values: list[float]) -> tuple[float, float]:
    """Two-pass mean and sample (n-1) stddev; stable for huge offsets."""
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def _half_width(stddev: float, n: int, interval_kind: str) -> float:
    if n < 2:
        return 0.0
    if interval_kind == "spread_1p96":
        return 1.96 * stddev
    return float(student_t.ppf(0.975, n - 1)) * stddev / math.sqrt(n)


def _wer_stat(condition: str, records: list[MetricRecord], interval_kind: str) -> SummaryStat:
    """Error-weighted corpus WER from the records' edit counts.

    Records written by this pipeline carry {edits, reference_length}; a
    plain mean of rates is only used if some foreign record lacks them.
    """
    if all("edits" in r.extra and "reference_length" in r.extra for r in records):
        edits = sum(int(r.extra["edits"]) for r in records)
        length = sum(int(r.extra["reference_length"]) for r in records)
        mean = edits / length if length else 0.0
    else:
        mean = math.fsum(r.value for r in records) / len(records)
    return SummaryStat(
        condition=condition,
        metric_name="wer",
        n=len(records),
        mean=mean,
        stddev=0.0,
        interval_half_width=0.0,
        interval_kind=interval_kind,
        degenerate=len(records) == 1,
    )


def summarize(records: list[MetricRecord], interval_kind: str = "spread_1p96") -> list[SummaryStat]:
    """One SummaryStat per (condition, metric); permutation-invariant."""
    if interval_kind not in INTERVAL_KINDS:
        raise ValueError(f"unknown interval kind {interval_kind!r}; expected one of {INTERVAL_KINDS}")
    groups: dict[tuple[str, str], list[MetricRecord]] = {}
    for rec in records:
        groups.setdefault((rec.condition, rec.metric_name), []).append(rec)

    stats = []
    for (condition, metric_name) in sorted(groups, key=_group_sort_key):
        group = sorted(groups[(condition, metric_name)], key=lambda r: r.utterance_id)
        if metric_name == "wer":
            stats.append(_wer_stat(condition, group, interval_kind))
            continue
        values = [r.value for r in group]
        mean, stddev = _mean_and_stddev(values)
        stats.append(SummaryStat(
            condition=condition,
            metric_name=metric_name,
            n=len(values),
            mean=mean,
            stddev=stddev,
            interval_half_width=_half_width(stddev, len(values), interval_kind),
            interval_kind=interval_kind,
            degenerate=len(values) == 1,
        ))
    return stats


def _group_sort_key(key: tuple[str, str]) -> tuple[str, int]:
    condition, metric_name = key
    return (condition, METRIC_ORDER.index(metric_name))


def render(stats: list[SummaryStat], fmt: str) -> str:
    """Serialize summary stats; identical inputs give identical bytes."""
    if fmt == "markdown":
        return _render_markdown(stats)
    if fmt == "csv":
        return _render_csv(stats)
    if fmt == "json":
        return _render_json(stats)
    raise ValueError(f"unknown report format {fmt!r}")


def _ordered(stats: list[SummaryStat]) -> list[SummaryStat]:
    return sorted(stats, key=lambda s: (s.condition, METRIC_ORDER.index(s.metric_name)))


def _cell(stat: SummaryStat) -> str:
    if stat.metric_name == "wer":
        return f"{100.0 * stat.mean:.3f}"
    if stat.degenerate:
        return f"{stat.mean:.3f} (n=1)"
    return f"{stat.mean:.3f}±{stat.interval_half_width:.3f}"


def _render_markdown(stats: list[SummaryStat]) -> str:
    ordered = _ordered(stats)
    metrics = [m for m in METRIC_ORDER if any(s.metric_name == m for s in ordered)]
    lines = []
    if ordered:
        kinds = sorted({s.interval_kind for s in ordered})
        lines.append(f"<!-- interval: {', '.join(kinds)} -->")
    header = ["Condition"] + [METRIC_LABELS[m] for m in metrics]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join(["---"] * len(header)) + "|")
    by_condition: dict[str, dict[str, SummaryStat]] = {}
    for stat in ordered:
        by_condition.setdefault(stat.condition, {})[stat.metric_name] = stat
    for condition in sorted(by_condition):
        row = [condition if condition else "(all)"]
        for metric in metrics:
            stat = by_condition[condition].get(metric)
            row.append(_cell(stat) if stat else "-")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


_CSV_FIELDS = ("condition", "metric_name", "n", "mean", "stddev",
               "interval_half_width", "interval_kind", "degenerate")


def _render_csv(stats: list[SummaryStat]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_CSV_FIELDS, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    writer.writeheader()
    for stat in _ordered(stats):
        rec = stat.to_record()
        rec["mean"] = repr(stat.mean)
        rec["stddev"] = repr(stat.stddev)
        rec["interval_half_width"] = repr(stat.interval_half_width)
        writer.writerow(rec)
    return buf.getvalue()


def _render_json(stats: list[SummaryStat]) -> str:
    return json.dumps([s.to_record() for s in _ordered(stats)], sort_keys=True, indent=2) + "\n"


def parse_csv(text: str) -> list[SummaryStat]:
    """Inverse of the csv renderer; numeric fields round-trip exactly."""
    reader = csv.DictReader(io.StringIO(text))
    stats = []
    for row in reader:
        stats.append(SummaryStat(
            condition=row["condition"],
            metric_name=row["metric_name"],
            n=int(row["n"]),
            mean=float(row["mean"]),
            stddev=float(row["stddev"]),
            interval_half_width=float(row["interval_half_width"]),
            interval_kind=row["interval_kind"],
            degenerate=row["degenerate"] == "True",
        ))
    return stats


def parse_json(text: str) -> list[SummaryStat]:
    return [
        SummaryStat(
            condition=rec["condition"],
            metric_name=rec["metric_name"],
            n=int(rec["n"]),
            mean=float(rec["mean"]),
            stddev=float(rec["stddev"]),
            interval_half_width=float(rec["interval_half_width"]),
            interval_kind=rec["interval_kind"],
            degenerate=bool(rec["degenerate"]),
        )
        for rec in json.loads(text)
    ]
