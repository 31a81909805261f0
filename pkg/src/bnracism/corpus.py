"""Loading, labelling, splitting and summarising the annotated racism corpus."""

from __future__ import annotations

import csv
import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateClassError, RowError, SchemaError

log = logging.getLogger(__name__)

__all__ = [
    "RacismType",
    "BinaryLabel",
    "LabeledRecord",
    "DatasetSplit",
    "ClassDistribution",
    "load_dataset",
    "class_distribution",
    "to_binary_label",
    "split_train_test",
    "write_split_manifest",
    "read_split_manifest",
    "DEFAULT_SEED",
]

DEFAULT_SEED = 42


class RacismType(enum.Enum):
    REPRESENTATIONAL = "representational"
    IDEOLOGICAL = "ideological"
    DISCURSIVE = "discursive"
    NORMAL = "normal"

    @classmethod
    def parse(cls, raw: str) -> "RacismType":
        key = raw.strip().lower()
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown label {raw!r}; expected one of {[m.value for m in cls]}")


class BinaryLabel(enum.IntEnum):
    NON_RACISM = 0
    RACISM = 1


def to_binary_label(t: RacismType) -> BinaryLabel:
    return BinaryLabel.NON_RACISM if t is RacismType.NORMAL else BinaryLabel.RACISM


@dataclass(frozen=True)
class LabeledRecord:
    id: int
    text: str
    racism_type: RacismType
    binary_label: BinaryLabel = field(init=False)

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"record {self.id} has empty text")
        object.__setattr__(self, "binary_label", to_binary_label(self.racism_type))


@dataclass(frozen=True)
class DatasetSplit:
    train: list[LabeledRecord]
    test: list[LabeledRecord]
    seed: int
    ratio: Fraction

    def partition_of(self) -> dict[int, str]:
        out = {r.id: "train" for r in self.train}
        out.update({r.id: "test" for r in self.test})
        return out


@dataclass(frozen=True)
class ClassDistribution:
    by_type: dict[RacismType, int]
    binary: dict[BinaryLabel, int]

    @property
    def total(self) -> int:
        return sum(self.by_type.values())


def load_dataset(path: str | Path) -> list[LabeledRecord]:
    """Read a ``text,label`` CSV into records with sequential ids from 0.

    Labels are parsed case-insensitively. Exact duplicate texts are allowed
    but counted and logged as a warning.
    """
    path = Path(path)
    records: list[LabeledRecord] = []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header 'text,label'") from None
        header = [h.strip().lstrip("﻿").lower() for h in header]
        if "text" not in header or "label" not in header:
            raise SchemaError(f"{path}: header must contain 'text,label', got {','.join(header)!r}")
        ti, li = header.index("text"), header.index("label")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= max(ti, li):
                raise RowError(line, f"expected {len(header)} fields, got {len(row)}")
            text, raw_label = row[ti], row[li]
            if not text.strip():
                raise RowError(line, "empty text")
            try:
                rtype = RacismType.parse(raw_label)
            except ValueError as exc:
                raise RowError(line, str(exc)) from None
            records.append(LabeledRecord(len(records), text, rtype))

    dupes = sum(c - 1 for c in Counter(r.text for r in records).values() if c > 1)
    if dupes:
        log.warning("%s: %d exact duplicate text(s)", path, dupes)
    return records


def class_distribution(records: Iterable[LabeledRecord]) -> ClassDistribution:
    by_type = {t: 0 for t in RacismType}
    for r in records:
        by_type[r.racism_type] += 1
    binary = {b: 0 for b in BinaryLabel}
    for t, n in by_type.items():
        binary[to_binary_label(t)] += n
    return ClassDistribution(by_type, binary)


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def _as_fraction(ratio: float | Fraction | str) -> Fraction:
    # Fraction(str(0.8)) == 4/5 exactly; Fraction(0.8) would carry binary noise.
    if isinstance(ratio, Fraction):
        return ratio
    return Fraction(str(ratio))


def _stratified_quotas(sizes: Sequence[int], ratio: Fraction, target: int) -> list[int]:
    # Largest-remainder apportionment: every class stays within one record of
    # ratio * size while the quotas still add up to the overall target.
    exact = [ratio * n for n in sizes]
    quotas = [math.floor(q) for q in exact]
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - quotas[i]), i))
    short = target - sum(quotas)
    for i in order[:short]:
        quotas[i] += 1
    return quotas


def split_train_test(
    records: Sequence[LabeledRecord],
    ratio: float | Fraction | str = Fraction(4, 5),
    seed: int = DEFAULT_SEED,
    stratify: bool = True,
) -> DatasetSplit:
    """Seeded shuffle split; stratifies on the binary label by default.

    The train size is ``round_half_up(ratio * N)``. Both partitions are
    returned sorted by record id.
    """
    frac = _as_fraction(ratio)
    if not 0 < frac < 1:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    if len(records) < 2:
        raise ConfigError(f"need at least 2 records to split, got {len(records)}")

    n_train = _round_half_up(frac * len(records))
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []

    if stratify:
        groups = {b: [i for i, r in enumerate(records) if r.binary_label is b] for b in BinaryLabel}
        for b, members in groups.items():
            if not members:
                raise DegenerateClassError(f"class {b.name} has no records; cannot stratify")
        labels = list(BinaryLabel)
        quotas = _stratified_quotas([len(groups[b]) for b in labels], frac, n_train)
        for b, q in zip(labels, quotas):
            members = np.asarray(groups[b])
            train_idx.extend(members[rng.permutation(len(members))[:q]].tolist())
    else:
        train_idx = rng.permutation(len(records))[:n_train].tolist()

    chosen = set(train_idx)
    train = sorted((records[i] for i in chosen), key=lambda r: r.id)
    test = sorted((r for i, r in enumerate(records) if i not in chosen), key=lambda r: r.id)
    return DatasetSplit(train, test, seed, frac)


def write_split_manifest(split: DatasetSplit, path: str | Path) -> None:
    rows = sorted(split.partition_of().items())
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "partition"])
        w.writerows(rows)


def read_split_manifest(path: str | Path) -> dict[int, str]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "partition"]:
            raise SchemaError(f"{path}: expected header 'id,partition'")
        return {int(row["id"]): row["partition"] for row in reader}
