import os

import pytest
from hypothesis import settings

from rice.training import bundled_training_paths, default_bundle, save_bundle

settings.register_profile("acceptance", max_examples=1000, deadline=None)
settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def bundle():
    return default_bundle(0)


@pytest.fixture(scope="session")
def models_dir(tmp_path_factory, bundle):
    directory = tmp_path_factory.mktemp("models")
    save_bundle(bundle, directory)
    return directory


@pytest.fixture(scope="session")
def training_paths():
    return bundled_training_paths()


# -- acceptance summary: one PASS/FAIL line per criterion ---------------------

_criteria: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion covered by the test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    cid, title = marker.args
    entry = _criteria.setdefault(cid, {"title": title, "ok": True, "tests": 0})
    if call.when == "call":
        entry["tests"] += 1
    if call.excinfo is not None:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: (int(c.rstrip("ab")), c)):
        entry = _criteria[cid]
        status = "PASS" if entry["ok"] and entry["tests"] else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {cid}: {entry['title']}")
