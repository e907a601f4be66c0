import os
import re

import numpy as np
import pytest

from attack_transfer.fixtures import gaussian_clusters, transfer_fixture
from attack_transfer.ingest import FlowDataset, split

FULLDATA_ENV = "ATTACK_TRANSFER_DATA_DIR"

requires_fulldata = pytest.mark.skipif(
    not os.environ.get(FULLDATA_ENV),
    reason=f"full-corpus checks need {FULLDATA_ENV} pointing at the real CSVs",
)


def make_dataset(features, labels, names=None) -> FlowDataset:
    features = np.asarray(features, dtype=np.float64)
    if names is None:
        names = tuple(f"f{i:02d}" for i in range(features.shape[1]))
    return FlowDataset(features, np.asarray(labels, dtype=np.int64), names)


@pytest.fixture
def cluster_split():
    """Well-separated 4-class dataset, split 60/10/30."""
    dataset, _ = gaussian_clusters({0: 900, 1: 240, 2: 240, 3: 240}, seed=11, n_features=10)
    return split(dataset, seed=5)


@pytest.fixture
def transfer_split():
    """Fixture where attacks 1 and 2 share a distribution and 3 is disjoint."""
    dataset, _ = transfer_fixture(seed=3)
    return split(dataset, seed=5)


# ----------------------------------------------------------------------
# Acceptance summary: one line per criterion at the end of the run.

_CRITERION = re.compile(r"test_c(\d+)_")
_acceptance_outcomes: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    number = int(match.group(1))
    name = report.nodeid.split("::")[-1]
    if report.when == "setup" and report.skipped:
        _acceptance_outcomes[number] = ("SKIP", name)
    elif report.when == "call":
        _acceptance_outcomes[number] = ("PASS" if report.passed else "FAIL", name)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(_acceptance_outcomes):
        outcome, name = _acceptance_outcomes[number]
        terminalreporter.write_line(f"criterion {number:>2}: {outcome}  ({name})")
