from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _helpers import separable_set
from bnracism.corpus import BinaryLabel
from bnracism.ensemble import ensemble_dataset, ensemble_proba
from bnracism.errors import ConfigError, InputError
from bnracism.models import Architecture, ModelConfig, TrainConfig, build_model, predict_batch, train

probs = st.floats(0.0, 1.0, allow_nan=False)


@pytest.mark.parametrize(
    "triple, mean, label",
    [
        ((0.2, 0.4, 0.6), 0.4, BinaryLabel.NON_RACISM),
        ((1.0, 1.0, 1.0), 1.0, BinaryLabel.RACISM),
        ((0.5, 0.5, 0.5), 0.5, BinaryLabel.RACISM),
    ],
)
def test_examples(triple, mean, label):
    e = ensemble_proba(*triple)
    assert e.mean_probability == pytest.approx(mean, abs=1e-12)
    assert e.label is label


@pytest.mark.parametrize("bad", [-0.01, 1.2, float("nan")])
def test_out_of_range_rejected(bad):
    with pytest.raises(InputError):
        ensemble_proba(0.5, bad, 0.5)


@settings(max_examples=500)
@given(probs, probs, probs)
def test_mean_bounds_and_permutation(a, b, c):
    ref = ensemble_proba(a, b, c)
    assert min(a, b, c) <= ref.mean_probability <= max(a, b, c)
    for perm in itertools.permutations((a, b, c)):
        e = ensemble_proba(*perm)
        assert e.mean_probability == ref.mean_probability
        assert e.label is ref.label


@settings(max_examples=300)
@given(st.sampled_from([0.0, 0.49, 0.5, 0.51, 1.0]), st.booleans())
def test_unanimity(p, hard):
    e = ensemble_proba(p, p, p, hard_vote=hard)
    assert e.label is (BinaryLabel.RACISM if p >= 0.5 else BinaryLabel.NON_RACISM)


@pytest.mark.parametrize("labels", list(itertools.product((0, 1), repeat=3)))
def test_hard_vote_majority(labels):
    ps = [0.9 if v else 0.1 for v in labels]
    e = ensemble_proba(*ps, hard_vote=True)
    assert int(e.label) == int(sum(labels) >= 2)
    assert e.mean_probability == pytest.approx(sum(labels) / 3)


def test_hard_vote_can_disagree_with_soft():
    assert ensemble_proba(0.51, 0.51, 0.0, hard_vote=True).label is BinaryLabel.RACISM
    assert ensemble_proba(0.51, 0.51, 0.0).label is BinaryLabel.NON_RACISM


@pytest.fixture(scope="module")
def members():
    x, y = separable_set(30, 64)
    out = []
    for arch in Architecture:
        cfg = ModelConfig(arch, 64, sequence_length=16, conv_filters=8, hidden_units=8)
        out.append(train(build_model(cfg), x, y, None, None, TrainConfig(epochs=2, learning_rate=1e-3)))
    return out, x


def test_dataset_matches_rowwise(members):
    models, x = members
    preds = ensemble_dataset(models, x)
    assert len(preds) == len(x)
    member_p = [predict_batch(m, x) for m in models]
    for k, e in enumerate(preds):
        assert e == ensemble_proba(*(p[k] for p in member_p))


def test_identical_members_agree(members):
    models, x = members
    same = [models[0]] * 3
    labels = (predict_batch(models[0], x) >= 0.5).astype(int)
    assert [int(e.label) for e in ensemble_dataset(same, x)] == labels.tolist()


def test_member_count(members):
    models, x = members
    with pytest.raises(ConfigError):
        ensemble_dataset(models[:2], x)


def test_per_member_inputs(members):
    models, x = members
    preds = ensemble_dataset(models, [x, x, np.stack([x, x, x], axis=1)])
    assert preds == ensemble_dataset(models, x)
