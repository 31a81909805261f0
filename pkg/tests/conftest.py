from __future__ import annotations

import os

import pytest
import torch

torch.set_num_threads(1)
os.environ.setdefault("MPLBACKEND", "Agg")


@pytest.fixture
def write_csv(tmp_path):
    def _write(rows, header=("text", "label"), name="data.csv"):
        import csv

        path = tmp_path / name
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            if header:
                w.writerow(header)
            w.writerows(rows)
        return path

    return _write


# One summary line per acceptance criterion, after the normal pytest output.
_acceptance: list = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _acceptance.append(report)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for r in _acceptance:
        props = dict(r.user_properties)
        status = "PASS" if r.passed else "SKIP" if r.skipped else "FAIL"
        name = props.get("criterion", r.nodeid.split("::")[-1].removeprefix("test_").replace("_", " "))
        terminalreporter.write_line(f"{status}  {name}  {props.get('detail', '')}".rstrip())
