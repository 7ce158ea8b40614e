"""Shared fixtures and the per-criterion acceptance report."""

from collections import OrderedDict

import pytest

from lockdown_pomdp import dataio
from lockdown_pomdp.estimation import InitializationSpec, default_initial_params, synthetic_series
from lockdown_pomdp.rng import RngStream

_criteria = OrderedDict()


def write_mi_like_csv(path, initial_active=200, initial_deaths=3800, seed=2020):
    """40 days of MI-sized data generated by the model itself."""
    cfg = dataio.bundled_region("MI")
    params = cfg.model_params(default_initial_params().probabilities)
    spec = InitializationSpec(cfg.p_severe, cfg.inflation, initial_active, initial_deaths)
    series = synthetic_series(
        params, spec, population=cfg.population, days=cfg.train_days, test_mild=0.02,
        test_severe=0.2, training_action=cfg.training, rng=RngStream(seed), start_date=cfg.start,
    )
    return dataio.write_case_csv(series, path)


@pytest.fixture(scope="session")
def mi_like_csv(tmp_path_factory):
    return write_mi_like_csv(tmp_path_factory.mktemp("data") / "mi_like.csv")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "seen": False, "notes": []})
    if report.when == "call" or report.failed:
        entry["seen"] = True
        if report.failed:
            entry["ok"] = False
            entry["notes"].append(item.name)
    for key, value in item.user_properties:
        if key == "detail" and report.when == "call":
            entry["notes"].append(str(value))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        if not entry["seen"]:
            continue
        status = "PASS" if entry["ok"] else "FAIL"
        line = f"[{status}] criterion {number}: {entry['title']}"
        if entry["notes"]:
            line += "  (" + "; ".join(entry["notes"]) + ")"
        terminalreporter.write_line(line)
