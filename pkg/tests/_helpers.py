"""Shared test data: stub-embedded rows of the keyword-separable corpus."""

from __future__ import annotations

import numpy as np

from bnracism.corpus import RacismType, to_binary_label
from bnracism.embeddings import StubProvider, build_cache
from bnracism.preprocess import clean
from bnracism.synthetic import make_desk_corpus


def separable_set(n: int = 32, dim: int = 768, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rows = make_desk_corpus(seed=seed)[:n]
    texts = [clean(t).cleaned for t, _ in rows]
    y = np.array([int(to_binary_label(RacismType.parse(lab))) for _, lab in rows])
    return build_cache(texts, StubProvider(dim, seed=0)).vectors, y
