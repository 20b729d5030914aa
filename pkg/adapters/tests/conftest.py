import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pseval_adapters.wavio import write_wav  # noqa: E402

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, label): acceptance-criterion test, reported pass/fail at session end"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call":
        number, label = marker.args
        entry = _CRITERIA.setdefault(number, {"label": label, "passed": True})
        if not report.passed:
            entry["passed"] = False


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["passed"] else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {entry['label']}")


def make_speech(rng: np.random.Generator, seconds: float, fs: int = 16000) -> np.ndarray:
    n = int(seconds * fs)
    t = np.arange(n) / fs
    f0 = np.clip(130.0 + 30.0 * np.cumsum(rng.normal(0, 0.02, n)), 80.0, 260.0)
    phase = 2.0 * np.pi * np.cumsum(f0) / fs
    x = np.zeros(n)
    for k in range(1, 7):
        x += (1.0 / k) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    x *= 0.55 + 0.45 * np.sin(2 * np.pi * 4.0 * t)
    return 0.4 * x / np.max(np.abs(x))


@pytest.fixture(scope="session")
def toy_ledger(tmp_path_factory):
    """8 train + 2 validation pre-mixed pairs plus a JSONL ledger."""
    root = tmp_path_factory.mktemp("toy_ledger")
    (root / "wavs").mkdir()
    rng = np.random.default_rng(42)
    entries = []
    for i in range(10):
        role = "train" if i < 8 else "validation"
        clean = make_speech(rng, 1.0)
        noisy = clean + 0.15 * rng.normal(size=clean.size)
        write_wav(noisy, 16000, str(root / "wavs" / f"noisy{i}.wav"))
        write_wav(clean, 16000, str(root / "wavs" / f"clean{i}.wav"))
        entries.append({
            "role": role,
            "speaker_id": "spk000",
            "mixture_id": f"mix{i:02d}",
            "output_path": f"wavs/noisy{i}.wav",
            "reference_path": f"wavs/clean{i}.wav",
        })
    ledger = root / "ledger.jsonl"
    with open(ledger, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
    return root, ledger
