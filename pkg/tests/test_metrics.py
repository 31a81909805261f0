from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from bnracism.errors import InputError
from bnracism.metrics import (
    MetricsReport,
    accuracy,
    confusion_matrix,
    evaluate,
    format_table,
    plot_confusion,
    plot_history,
    precision_recall_f1,
    read_report,
    render_plots,
    report_table,
    table_rows,
    write_report,
    zero_division_flags,
)
from bnracism.models import EpochStats

CM = np.array([[4, 1], [2, 3]])
pairs = st.integers(1, 200).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 1), min_size=n, max_size=n), st.lists(st.integers(0, 1), min_size=n, max_size=n))
)


def test_confusion_hand_count():
    assert confusion_matrix([1, 1, 0], [1, 0, 0]).tolist() == [[1, 0], [1, 1]]


def test_perfect_and_all_wrong():
    y = [0, 1, 1, 0, 1]
    assert confusion_matrix(y, y).tolist() == [[2, 0], [0, 3]]
    assert confusion_matrix(y, [1 - v for v in y]).tolist() == [[0, 2], [3, 0]]


def test_confusion_errors():
    with pytest.raises(InputError):
        confusion_matrix([0, 1], [0])
    with pytest.raises(InputError):
        confusion_matrix([], [])
    with pytest.raises(InputError):
        confusion_matrix([0, 2], [0, 1])


def test_hand_scores():
    p, r, f = precision_recall_f1(CM, 1)
    assert (p, r) == (0.75, 0.6)
    assert f == pytest.approx(2 / 3, abs=1e-4)
    assert accuracy(CM) == 0.7
    assert precision_recall_f1(np.diag([3, 4]), 1) == (1.0, 1.0, 1.0)
    assert accuracy(np.diag([3, 4])) == 1.0
    assert accuracy(np.array([[0, 3], [4, 0]])) == 0.0


def test_zero_division():
    cm = np.array([[5, 0], [0, 0]])
    assert precision_recall_f1(cm, 1) == (0.0, 0.0, 0.0)
    assert zero_division_flags(cm, 1) == {"precision", "recall", "f1"}
    assert zero_division_flags(cm, 0) == frozenset()


@settings(max_examples=200)
@given(pairs)
def test_conservation_bounds_symmetry(pair):
    t, p = pair
    cm = confusion_matrix(t, p)
    assert cm.sum() == len(t)
    assert accuracy(cm) == (cm[0, 0] + cm[1, 1]) / len(t)
    for c in (0, 1):
        pr, rc, f1 = precision_recall_f1(cm, c)
        assert all(0 <= v <= 1 for v in (pr, rc, f1))
        if pr + rc > 0:
            assert min(pr, rc) - 1e-12 <= f1 <= max(pr, rc) + 1e-12
    flipped = confusion_matrix([1 - v for v in t], [1 - v for v in p])
    assert precision_recall_f1(flipped, 1) == precision_recall_f1(cm, 0)


def _report(model="Bi-RNN", emb="sahaj-bert", cm=CM):
    return MetricsReport(model, emb, cm, {"seed": 1})


def test_report_json_round_trip(tmp_path):
    r = _report()
    write_report(r, tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["confusion_orientation"].startswith("rows=true")
    assert data["classes"]["1"]["precision"] == 0.75
    back = read_report(tmp_path / "r.json")
    assert back.to_dict() == r.to_dict()


def test_single_report_table():
    rows = table_rows([_report()])
    assert [r["class"] for r in rows] == [1, 0]
    lines = format_table([_report()]).splitlines()
    body = lines[2:4]  # header, rule, then one row per class
    assert lines[4].startswith("---")
    assert "70.00" in body[0] and "70.00" not in body[1]
    assert body[0].startswith("sahaj-bert") and not body[1].startswith("sahaj-bert")


def test_grid_table_grouping():
    embs = ["bangla-bert", "bangla-bert-base", "sahaj-bert"]
    models = ["Bi-RNN", "Bi-LSTM", "MCNN-LSTM", "Ensemble"]
    reports = [_report(m, e) for e in embs for m in models]
    rows = table_rows(reports)
    assert len(rows) == 24
    assert [r["embedding"] for r in rows[::8]] == embs
    text = format_table(list(reversed(reports)))
    # embedding printed once per group, model once per pair of rows
    for e in embs:
        assert sum(line.startswith(e + " ") for line in text.splitlines()) == 1
    assert text.count("Bi-LSTM") == 3


def test_zero_division_marker():
    text = format_table([_report(cm=np.array([[5, 0], [0, 0]]))])
    assert "0.00*" in text
    assert "zero denominator" in text


def test_table_files(tmp_path):
    report_table([_report(), _report("Ensemble")], tmp_path)
    assert (tmp_path / "table.txt").read_text().startswith("Word Embeddings")
    with (tmp_path / "table.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert float(rows[0]["f1"]) == pytest.approx(2 / 3, abs=1e-15)


def test_history_plot_spans_epochs(tmp_path):
    hist = [EpochStats(1.0 / (i + 1), i / 10, 1.0, 0.5) for i in range(10)]
    fig = plot_history(hist, tmp_path / "h.png")
    assert fig.axes[0].get_xlim() == (1.0, 10.0)
    assert Image.open(tmp_path / "h.png").size[0] > 0


def test_confusion_plot_annotations(tmp_path):
    fig = plot_confusion(CM, tmp_path / "c.png")
    ax = fig.axes[0]
    assert sorted(t.get_text() for t in ax.texts) == ["1", "2", "3", "4"]
    assert ax.get_xlabel() == "Predicted class" and ax.get_ylabel() == "True class"
    assert (tmp_path / "c.png").stat().st_size > 0


def test_render_dispatch(tmp_path):
    fig = render_plots(_report(), tmp_path / "r.svg")
    assert len(fig.axes[0].texts) == 4
    assert (tmp_path / "r.svg").read_text().lstrip().startswith("<?xml")


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        plot_confusion(CM, tmp_path / "missing" / "c.png")


def test_evaluate_helper():
    r = evaluate([1, 1, 0], [1, 0, 0], "Bi-RNN", "stub")
    assert r.confusion.tolist() == [[1, 0], [1, 1]]
    assert r.accuracy == pytest.approx(2 / 3)
