from collections import OrderedDict

import numpy as np
import pytest

from atfr.core import FeatureSequence

_criteria = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    entry = _criteria.setdefault(marker.args[0], {"title": marker.args[1], "tests": []})
    entry["tests"].append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, entry in sorted(_criteria.items()):
        ok = all(passed for _, passed in entry["tests"])
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'}  criterion {number}: {entry['title']} "
            f"({sum(p for _, p in entry['tests'])}/{len(entry['tests'])} tests)"
        )


def scalar_frames(values):
    """FeatureSequence of 1x1x1 frames holding the given scalars."""
    return FeatureSequence(np.asarray(values, dtype=np.float64).reshape(-1, 1, 1, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
