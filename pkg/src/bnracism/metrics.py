"""Binary evaluation metrics, the combined performance table, and plots.

Confusion matrices are always oriented rows = true class, columns =
predicted class, with class 0 = non-racism and class 1 = racism.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "ORIENTATION",
    "ClassScores",
    "MetricsReport",
    "confusion_matrix",
    "precision_recall_f1",
    "zero_division_flags",
    "accuracy",
    "evaluate",
    "table_rows",
    "format_table",
    "report_table",
    "write_report",
    "read_report",
    "plot_history",
    "plot_confusion",
    "render_plots",
]

ORIENTATION = "rows=true class, columns=predicted class (0=non-racism, 1=racism)"
ZERO_MARK = "*"


class ClassScores(NamedTuple):
    precision: float
    recall: float
    f1: float


def confusion_matrix(true_labels: Sequence[int], predicted_labels: Sequence[int]) -> np.ndarray:
    t = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    p = np.asarray(predicted_labels, dtype=np.int64).reshape(-1)
    if t.shape != p.shape:
        raise InputError(f"{t.size} true labels vs {p.size} predictions")
    if t.size == 0:
        raise InputError("cannot build a confusion matrix from zero samples")
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise InputError("labels must be binary 0/1")
    return np.bincount(2 * t + p, minlength=4).reshape(2, 2)


def _counts(cm: np.ndarray, positive_class: int) -> tuple[int, int, int]:
    cm = np.asarray(cm)
    if cm.shape != (2, 2) or (cm < 0).any():
        raise InputError(f"confusion matrix must be a non-negative 2x2 array, got {cm.tolist()}")
    if positive_class not in (0, 1):
        raise InputError(f"positive_class must be 0 or 1, got {positive_class}")
    k, o = positive_class, 1 - positive_class
    return int(cm[k, k]), int(cm[o, k]), int(cm[k, o])


def precision_recall_f1(cm: np.ndarray, positive_class: int = 1) -> ClassScores:
    """Per-class scores; a zero denominator gives 0 (see ``zero_division_flags``)."""
    tp, fp, fn = _counts(cm, positive_class)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassScores(precision, recall, f1)


def zero_division_flags(cm: np.ndarray, positive_class: int = 1) -> frozenset[str]:
    tp, fp, fn = _counts(cm, positive_class)
    flags = set()
    if tp + fp == 0:
        flags.add("precision")
    if tp + fn == 0:
        flags.add("recall")
    p, r, _ = precision_recall_f1(cm, positive_class)
    if p + r == 0:
        flags.add("f1")
    return frozenset(flags)


def accuracy(cm: np.ndarray) -> float:
    cm = np.asarray(cm)
    total = int(cm.sum())
    return float(np.trace(cm)) / total if total else 0.0


@dataclass
class MetricsReport:
    model_name: str
    embedding_name: str
    confusion: np.ndarray
    per_class: dict[int, ClassScores] = field(init=False)
    zero_division: dict[int, frozenset[str]] = field(init=False)
    accuracy: float = field(init=False)
    config: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.confusion = np.asarray(self.confusion, dtype=np.int64)
        self.per_class = {c: precision_recall_f1(self.confusion, c) for c in (0, 1)}
        self.zero_division = {c: zero_division_flags(self.confusion, c) for c in (0, 1)}
        self.accuracy = accuracy(self.confusion)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model_name,
            "embedding": self.embedding_name,
            "accuracy": self.accuracy,
            "classes": {
                str(c): {**s._asdict(), "zero_division": sorted(self.zero_division[c])}
                for c, s in self.per_class.items()
            },
            "confusion": self.confusion.tolist(),
            "confusion_orientation": ORIENTATION,
            "samples": int(self.confusion.sum()),
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MetricsReport":
        return cls(d["model"], d["embedding"], np.asarray(d["confusion"]), d.get("config", {}))


def evaluate(
    true_labels: Sequence[int],
    predicted_labels: Sequence[int],
    model_name: str,
    embedding_name: str,
    config: dict[str, Any] | None = None,
) -> MetricsReport:
    return MetricsReport(model_name, embedding_name, confusion_matrix(true_labels, predicted_labels), config or {})


def write_report(report: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def read_report(path: str | Path) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _grouped(reports: Sequence[MetricsReport]) -> list[MetricsReport]:
    # Embeddings in order of first appearance, models in input order within each.
    order: dict[str, list[MetricsReport]] = {}
    for r in reports:
        order.setdefault(r.embedding_name, []).append(r)
    return [r for group in order.values() for r in group]


def table_rows(reports: Sequence[MetricsReport]) -> list[dict[str, Any]]:
    """Two rows per report (class 1 first, then class 0), full precision."""
    rows = []
    for r in _grouped(reports):
        for cls in (1, 0):
            s = r.per_class[cls]
            rows.append({
                "embedding": r.embedding_name,
                "model": r.model_name,
                "class": cls,
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "accuracy_pct": 100.0 * r.accuracy,
                "zero_division": ";".join(sorted(r.zero_division[cls])),
            })
    return rows


def format_table(reports: Sequence[MetricsReport]) -> str:
    """Fixed-width text table mirroring the published performance layout.

    The embedding name is printed once per group, the model name and the
    accuracy once per model; metrics are rounded to two decimals.
    """
    if not reports:
        raise InputError("no reports to tabulate")
    header = ["Word Embeddings", "Model", "Class", "P", "R", "F1", "Acc(%)"]
    body: list[list[str]] = []
    any_zero = False
    prev_emb = prev_model = None
    for row in table_rows(reports):
        flags = set(filter(None, row["zero_division"].split(";")))
        any_zero |= bool(flags)

        def cell(key: str) -> str:
            return f"{row[key]:.2f}" + (ZERO_MARK if key in flags else "")

        new_model = (row["embedding"], row["model"]) != (prev_emb, prev_model)
        body.append([
            row["embedding"] if row["embedding"] != prev_emb else "",
            row["model"] if new_model else "",
            str(row["class"]),
            cell("precision"),
            cell("recall"),
            cell("f1"),
            f"{row['accuracy_pct']:.2f}" if new_model else "",
        ])
        prev_emb, prev_model = row["embedding"], row["model"]

    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(header)]
    fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    rule = "-" * len(fmt(header))
    lines = [fmt(header), rule]
    for i, b in enumerate(body):
        if i and b[0]:
            lines.append(rule)
        lines.append(fmt(b))
    lines.append(rule)
    lines.append("Class 0 = non-racism, class 1 = racism.")
    if any_zero:
        lines.append(f"{ZERO_MARK} zero denominator; reported as 0.")
    return "\n".join(lines) + "\n"


def report_table(reports: Sequence[MetricsReport], out_dir: str | Path | None = None, stem: str = "table") -> str:
    """Render the combined table; with ``out_dir`` also write ``.txt`` and ``.csv``."""
    text = format_table(reports)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.txt").write_text(text, encoding="utf-8")
        rows = table_rows(reports)
        with (out / f"{stem}.csv").open("w", encoding="utf-8", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return text


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_history(history: Sequence, path: str | Path, title: str = ""):
    """Accuracy and loss curves (train and validation) against epoch."""
    if not history:
        raise InputError("empty training history")
    plt = _pyplot()
    epochs = np.arange(1, len(history) + 1)
    cols = list(zip(*[(h.train_acc, h.val_acc, h.train_loss, h.val_loss) for h in history]))
    fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_acc.plot(epochs, cols[0], marker="o", label="train")
    ax_acc.plot(epochs, cols[1], marker="o", label="validation")
    ax_acc.set(xlabel="epoch", ylabel="accuracy", title="Accuracy")
    ax_loss.plot(epochs, cols[2], marker="o", label="train")
    ax_loss.plot(epochs, cols[3], marker="o", label="validation")
    ax_loss.set(xlabel="epoch", ylabel="loss", title="Loss")
    for ax in (ax_acc, ax_loss):
        ax.set_xlim(1, max(len(history), 2))
        ax.legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return fig


def plot_confusion(cm: np.ndarray, path: str | Path, title: str = ""):
    """Annotated 2x2 heatmap; the axis labels state the orientation."""
    cm = np.asarray(cm)
    if cm.shape != (2, 2) or (cm < 0).any():
        raise InputError(f"invalid confusion matrix {cm.tolist()}")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(3.8, 3.4))
    ax.imshow(cm, cmap="Blues")
    peak = cm.max() if cm.max() else 1
    for i in range(2):
        for j in range(2):
            ax.text(j, i, str(int(cm[i, j])), ha="center", va="center",
                    color="white" if cm[i, j] > peak / 2 else "black")
    ax.set_xticks([0, 1], labels=["0", "1"])
    ax.set_yticks([0, 1], labels=["0", "1"])
    ax.set(xlabel="Predicted class", ylabel="True class", title=title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return fig


def render_plots(item, path: str | Path, title: str = ""):
    """Dispatch to a history curve or a confusion heatmap based on ``item``."""
    if isinstance(item, MetricsReport):
        return plot_confusion(item.confusion, path, title or item.model_name)
    if len(item) and hasattr(item[0], "train_loss"):
        return plot_history(item, path, title)
    return plot_confusion(np.asarray(item), path, title)
