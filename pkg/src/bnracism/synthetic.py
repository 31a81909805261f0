"""Synthetic Bengali comment corpora for offline runs and tests.

The desk corpus is keyword-separable: every racism row carries two
markers from a racism word pool, every normal row markers from a disjoint
neutral pool, over shared filler vocabulary. Rows are decorated with
digits, punctuation, emoji and stop-POS words so that every cleaning stage
has something to do.
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import LabeledRecord, RacismType

__all__ = ["make_desk_corpus", "write_corpus", "bundled_corpus_path", "make_table3_standin", "TABLE3_COUNTS"]

TABLE3_COUNTS = {
    RacismType.REPRESENTATIONAL: 1974,
    RacismType.IDEOLOGICAL: 1062,
    RacismType.DISCURSIVE: 1905,
    RacismType.NORMAL: 1214,
}

FILLER = (
    "মানুষ দেশ আজ কাল সবাই কথা ভিডিও পোস্ট খবর দেখলাম বলল অনেক কিছু এখন শহর গ্রাম "
    "রাস্তা বাজার স্কুল অফিস সময় দিন রাত ভাই বোন বন্ধু পরিবার নতুন পুরনো সুন্দর বড় ছোট "
    "কাজ টাকা মাঠ নদী আকাশ ছবি গল্প সিনেমা"
).split()
RACISM_MARKERS = "জাত কালো বস্তির নিচুজাত খ্যাত চাষা".split()
NORMAL_MARKERS = "বৃষ্টি খেলা বই রান্না গান উৎসব".split()
STOP_WORDS = "আমি তুমি এবং আর ওমা দিয়ে".split()
EMOJI = ["😂", "😂😂", "👍🏽", "❤️", "🙏"]
PUNCT = ["!!!", "।", "......", "?", ","]


def make_desk_corpus(n_racism: int = 100, n_normal: int = 100, seed: int = 7) -> list[tuple[str, str]]:
    """``(text, label)`` rows; racism rows cycle through the three racism types.

    Each row has three to five filler words and two class markers.
    """
    rng = np.random.default_rng(seed)
    racism_types = [t for t in RacismType if t is not RacismType.NORMAL]
    labels = [racism_types[i % 3] for i in range(n_racism)] + [RacismType.NORMAL] * n_normal
    labels = [labels[i] for i in rng.permutation(len(labels))]
    rows = []
    for rtype in labels:
        pool = NORMAL_MARKERS if rtype is RacismType.NORMAL else RACISM_MARKERS
        tokens = list(rng.choice(FILLER, size=int(rng.integers(3, 6))))
        tokens += list(rng.choice(pool, size=2, replace=False))
        if rng.random() < 0.4:
            tokens.append(str(rng.choice(STOP_WORDS)))
        rng.shuffle(tokens)
        if rng.random() < 0.3:
            tokens[0] = f"{int(rng.integers(1, 100))}{tokens[0]}"
        if rng.random() < 0.5:
            j = int(rng.integers(len(tokens)))
            tokens[j] += str(rng.choice(PUNCT))
        text = " ".join(tokens)
        if rng.random() < 0.4:
            text += " " + str(rng.choice(EMOJI))
        rows.append((text, rtype.value))
    return rows


def write_corpus(rows: list[tuple[str, str]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["text", "label"])
        w.writerows(rows)


def bundled_corpus_path() -> Path:
    return Path(str(resources.files("bnracism.data").joinpath("desk_corpus.csv")))


def make_table3_standin(seed: int = 0) -> list[LabeledRecord]:
    """Records with the published per-type counts and placeholder text."""
    labels = [t for t, n in TABLE3_COUNTS.items() for _ in range(n)]
    order = np.random.default_rng(seed).permutation(len(labels))
    return [LabeledRecord(i, f"row {i}", labels[j]) for i, j in enumerate(order)]
