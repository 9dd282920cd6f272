import math

import numpy as np
import pytest

from hardneg_lab.embedding import cosine_sim
from hardneg_lab.errors import DegenerateSynthesis, EmptyNegatives
from hardneg_lab.mining import HardSet, top_n_hardest, top_n_hardest_batch
from hardneg_lab.synthesis import (PAIR_MIX, QUERY_MIX, SynthesisStrategy, effective_count,
                                   mix_pair, mix_query, synth_count, synthesize, synthesize_batch)

from conftest import unit


def hard_of(negatives):
    n = len(negatives)
    return HardSet(np.arange(n), np.zeros(n))


def test_pair_mix_symmetric_example():
    e1, e2 = np.eye(2)
    s = synthesize(e1, hard_of([e1, e2]), np.array([e1, e2]), 3, SynthesisStrategy(PAIR_MIX, 0.5, 0.5),
                   np.random.default_rng(0))
    np.testing.assert_allclose(s.samples, np.tile([1 / math.sqrt(2)] * 2, (3, 1)), atol=1e-15)
    raw = mix_pair(e1, e2, 0.5)
    np.testing.assert_allclose(raw / np.linalg.norm(raw), [1 / math.sqrt(2)] * 2, atol=1e-15)


def test_query_mix_small_coefficient_returns_negative(rng):
    q = unit(rng, 6)
    negs = unit(rng, 4, 6)
    strat = SynthesisStrategy(QUERY_MIX, 1e-12, 1e-12)
    s = synthesize(q, hard_of(negs), negs, 5, strat, rng)
    parents = s.parent_indices[:, 0]
    np.testing.assert_allclose(s.samples, negs[parents], atol=1e-11)
    assert np.all(s.parent_indices[:, 1] == -1)
    np.testing.assert_allclose(mix_query(q, negs[0], 0.0), negs[0])


def test_pair_parents_distinct(rng):
    q = unit(rng, 5)
    negs = unit(rng, 6, 5)
    s = synthesize(q, top_n_hardest(q, negs, 4), negs, 200, SynthesisStrategy(), rng)
    assert np.all(s.parent_indices[:, 0] != s.parent_indices[:, 1])
    assert s.parent_indices.min() >= 0 and s.parent_indices.max() < 4
    # single hard negative: both parents are that negative
    one = synthesize(q, top_n_hardest(q, negs, 1), negs, 5, SynthesisStrategy(), rng)
    assert np.all(one.parent_indices == 0)
    np.testing.assert_allclose(one.samples, np.tile(negs[top_n_hardest(q, negs, 1).indices[0]], (5, 1)),
                               atol=1e-15)


def test_hardness_dominance_pair_mix(rng):
    checked = 0
    while checked < 500:
        d = int(rng.integers(2, 9))
        q = unit(rng, d)
        negs = unit(rng, int(rng.integers(2, 20)), d)
        hard = top_n_hardest(q, negs, int(rng.integers(2, 8)))
        s = synthesize(q, hard, negs, 1, SynthesisStrategy(), rng)
        i, j = hard.indices[s.parent_indices[0]]
        si, sj = cosine_sim(q, negs[i]), cosine_sim(q, negs[j])
        if si > 0 and sj > 0:
            assert cosine_sim(q, s.samples[0]) >= min(si, sj) - 1e-12
            checked += 1


def test_samples_unit_norm(rng):
    for kind in (PAIR_MIX, QUERY_MIX):
        strat = SynthesisStrategy.default(kind)
        for _ in range(100):
            q = unit(rng, 7)
            negs = unit(rng, 30, 7)
            s = synthesize(q, top_n_hardest(q, negs, 8), negs, 16, strat, rng)
            assert s.samples.shape == (16, 7)
            assert np.all(np.abs(np.linalg.norm(s.samples, axis=1) - 1) <= 1e-9)


def test_seeded_reproducibility(rng):
    q = unit(rng, 5)
    negs = unit(rng, 20, 5)
    hard = top_n_hardest(q, negs, 6)
    a = synthesize(q, hard, negs, 10, SynthesisStrategy(), np.random.default_rng(7))
    b = synthesize(q, hard, negs, 10, SynthesisStrategy(), np.random.default_rng(7))
    assert a.samples.tobytes() == b.samples.tobytes()


@pytest.mark.parametrize("kind", [PAIR_MIX, QUERY_MIX])
def test_batch_equals_sequential_calls(rng, kind):
    strat = SynthesisStrategy.default(kind)
    qs = unit(rng, 8, 6)
    negs = unit(rng, 40, 6)
    idx, _ = top_n_hardest_batch(qs, negs, 10)
    batch = synthesize_batch(qs, idx, negs, 12, strat, np.random.default_rng(3))
    seq_rng = np.random.default_rng(3)
    for b in range(8):
        one = synthesize(qs[b], HardSet(idx[b], np.zeros(10)), negs, 12, strat, seq_rng)
        np.testing.assert_allclose(batch[b], one.samples, atol=1e-15)


def test_cancelling_mixture_is_redrawn():
    e1, e2 = np.eye(2)
    negs = np.array([e1, -e1, e2])
    strat = SynthesisStrategy(PAIR_MIX, 0.5, 0.5)
    s = synthesize(e2, hard_of(negs), negs, 200, strat, np.random.default_rng(0))
    assert np.all(np.abs(np.linalg.norm(s.samples, axis=1) - 1) <= 1e-9)
    batch = synthesize_batch(e2[None], np.arange(3)[None], negs, 200, strat, np.random.default_rng(0))
    assert np.all(np.abs(np.linalg.norm(batch[0], axis=1) - 1) <= 1e-9)


def test_always_cancelling_raises():
    e1 = np.array([1.0, 0.0])
    negs = np.array([e1, -e1])
    with pytest.raises(DegenerateSynthesis):
        synthesize(e1, hard_of(negs), negs, 1, SynthesisStrategy(PAIR_MIX, 0.5, 0.5),
                   np.random.default_rng(0))


def test_empty_hard_set_and_zero_count(rng):
    q = unit(rng, 3)
    with pytest.raises(EmptyNegatives):
        synthesize(q, HardSet(np.zeros(0, dtype=int), np.zeros(0)), np.zeros((0, 3)), 2,
                   SynthesisStrategy(), rng)
    out = synthesize(q, HardSet(np.zeros(0, dtype=int), np.zeros(0)), np.zeros((0, 3)), 0,
                     SynthesisStrategy(), rng)
    assert len(out) == 0


@pytest.mark.parametrize("kind,lo,hi", [
    (PAIR_MIX, 0.0, 0.5), (PAIR_MIX, 0.5, 1.0), (PAIR_MIX, 0.6, 0.4),
    (QUERY_MIX, 0.1, 0.6), ("mixup", 0.2, 0.8),
])
def test_strategy_validation(kind, lo, hi):
    with pytest.raises(ValueError):
        SynthesisStrategy(kind, lo, hi)


def test_effective_count_cooldown_boundary():
    assert effective_count(200, 300, 100, 256, 4096, 256) == 0
    assert effective_count(199, 300, 100, 256, 4096, 256) == 256
    assert effective_count(299, 300, 100, 256, 4096, 256) == 0


def test_effective_count_warmup():
    assert effective_count(0, 300, 100, 256, 255, 256) == 0
    assert effective_count(0, 300, 100, 256, 256, 256) == 256


def test_effective_count_rejects_bad_epoch():
    with pytest.raises(ValueError):
        effective_count(300, 300, 100, 256, 4096, 256)


def test_synth_count():
    assert synth_count(1 / 16, 4096) == 256
    assert synth_count(1 / 8, 512) == 64
    assert synth_count(0.0, 512) == 0
