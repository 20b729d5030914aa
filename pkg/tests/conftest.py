import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make tests.helpers importable

from helpers import build_synthetic_corpus  # noqa: E402


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """4-speaker / 8-noise corpus for split and pipeline mechanics."""
    root = tmp_path_factory.mktemp("small_corpus")
    build_synthetic_corpus(root, n_speakers=4, utts_per_speaker=60, n_noises=8)
    return root

# Acceptance-criterion bookkeeping: test_acceptance.py tags its tests with
# @pytest.mark.criterion(n, "label"); a summary line per criterion prints at
# the end of the run.
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
