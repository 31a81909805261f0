"""Three-member averaging ensemble."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import BinaryLabel
from .errors import ConfigError, InputError
from .models import DEFAULT_THRESHOLD, Prediction, TrainedModel, predict_batch

__all__ = ["EnsemblePrediction", "ensemble_proba", "ensemble_dataset", "MEMBERS"]

MEMBERS = 3


@dataclass(frozen=True)
class EnsemblePrediction:
    member_probabilities: tuple[float, float, float]
    mean_probability: float
    label: BinaryLabel

    @property
    def probability(self) -> float:
        return self.mean_probability


def _prob(p: Prediction | float) -> float:
    value = p.probability if isinstance(p, Prediction) else float(p)
    if not 0.0 <= value <= 1.0:
        raise InputError(f"member probability {value!r} outside [0, 1]")
    return value


def ensemble_proba(
    p_rnn: Prediction | float,
    p_lstm: Prediction | float,
    p_mcnn: Prediction | float,
    hard_vote: bool = False,
    threshold: float = DEFAULT_THRESHOLD,
) -> EnsemblePrediction:
    """Average the three members and threshold (``>=`` is racism).

    Soft voting averages probabilities. Hard voting first thresholds each
    member and averages the resulting 0/1 labels, which is a 2-of-3 majority.
    """
    probs = (_prob(p_rnn), _prob(p_lstm), _prob(p_mcnn))
    votes = tuple(float(p >= threshold) for p in probs) if hard_vote else probs
    # fsum is correctly rounded, so the mean does not depend on member order;
    # the clamp absorbs the last-ulp error of dividing by three.
    mean = min(max(math.fsum(votes) / MEMBERS, min(votes)), max(votes))
    label = BinaryLabel.RACISM if mean >= threshold else BinaryLabel.NON_RACISM
    return EnsemblePrediction(probs, mean, label)


def ensemble_dataset(
    models: Sequence[TrainedModel],
    embeddings: np.ndarray | Sequence[np.ndarray],
    hard_vote: bool = False,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[EnsemblePrediction]:
    if len(models) != MEMBERS:
        raise ConfigError(f"the ensemble takes exactly {MEMBERS} models, got {len(models)}")
    dims = {m.config.input_dim for m in models}
    if len(dims) != 1:
        raise ConfigError(f"ensemble members disagree on input dimension: {sorted(dims)}")
    # A list of three arrays feeds each member its own inputs (e.g. an
    # MCNN-LSTM fed by three encoders next to single-input recurrent heads).
    inputs = list(embeddings) if isinstance(embeddings, (list, tuple)) else [embeddings] * MEMBERS
    if len(inputs) != MEMBERS:
        raise ConfigError(f"expected one input array per member, got {len(inputs)}")
    member_probs = [predict_batch(m, x) for m, x in zip(models, inputs)]
    if len({len(p) for p in member_probs}) != 1:
        raise InputError("members were given different numbers of rows")
    return [ensemble_proba(a, b, c, hard_vote, threshold) for a, b, c in zip(*member_probs)]
