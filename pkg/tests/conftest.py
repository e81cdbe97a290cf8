import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_runtest_logreport(report):
    """One visible PASS/FAIL line per acceptance criterion."""
    if "test_acceptance" not in report.nodeid or report.when != "call":
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {status}: {name}")


@pytest.fixture
def lecture5(tmp_path):
    """Private copy of the bundled end-to-end dataset."""
    dst = tmp_path / "lecture5"
    shutil.copytree(FIXTURES / "lecture5", dst)
    return dst


@pytest.fixture
def mini_vec():
    return FIXTURES / "embeddings" / "mini.vec"
