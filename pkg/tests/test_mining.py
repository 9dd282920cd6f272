import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardneg_lab.embedding import cosine_sim
from hardneg_lab.errors import EmptyNegatives
from hardneg_lab.mining import hardness_stats, top_n_hardest, top_n_hardest_batch

from conftest import unit


def full_sort_oracle(q, negatives, n):
    sims = [cosine_sim(q, v) for v in negatives]
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
    return order[:n]


def negatives_with_sims(sims):
    """Unit vectors in R^2 with prescribed cosine to q = e1."""
    return np.array([[s, np.sqrt(1 - s * s)] for s in sims])


def test_obvious_ordering():
    q = np.array([1.0, 0.0])
    hard = top_n_hardest(q, negatives_with_sims([0.9, 0.1, 0.5]), 2)
    assert hard.indices.tolist() == [0, 2]
    np.testing.assert_allclose(hard.similarities, [0.9, 0.5])


def test_saturation_returns_all_sorted():
    q = np.array([1.0, 0.0])
    hard = top_n_hardest(q, negatives_with_sims([0.2, 0.7, -0.3]), 10)
    assert hard.indices.tolist() == [1, 0, 2]


def test_ties_prefer_lower_index():
    q = np.array([1.0, 0.0])
    negs = negatives_with_sims([0.5, 0.8, 0.5, 0.8, 0.5])
    assert top_n_hardest(q, negs, 3).indices.tolist() == [1, 3, 0]
    idx, _ = top_n_hardest_batch(q[None], negs, 3)
    assert idx[0].tolist() == [1, 3, 0]


def test_empty_negatives():
    with pytest.raises(EmptyNegatives):
        top_n_hardest(np.array([1.0, 0.0]), np.zeros((0, 2)), 1)
    with pytest.raises(EmptyNegatives):
        hardness_stats(np.array([1.0, 0.0]), np.zeros((0, 2)))


def test_against_full_sort_oracle(rng):
    for _ in range(1000):
        d = int(rng.integers(2, 9))
        K = int(rng.integers(1, 40))
        n = int(rng.integers(1, 45))
        q = unit(rng, d)
        negs = unit(rng, K, d)
        hard = top_n_hardest(q, negs, n)
        assert hard.indices.tolist() == full_sort_oracle(q, negs, n)
        for i, s in zip(hard.indices, hard.similarities):
            assert s == cosine_sim(q, negs[i])


def test_batch_matches_per_query(rng):
    for _ in range(50):
        d = int(rng.integers(2, 9))
        K = int(rng.integers(2, 80))
        n = int(rng.integers(1, K + 5))
        qs = unit(rng, 6, d)
        negs = unit(rng, K, d)
        idx, sims = top_n_hardest_batch(qs, negs, n)
        for b, q in enumerate(qs):
            assert idx[b].tolist() == full_sort_oracle(q, negs, n)
        np.testing.assert_allclose(sims, qs @ negs.T, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 10))
def test_excluded_never_harder(seed, K, n):
    rng = np.random.default_rng(seed)
    q = unit(rng, 4)
    negs = unit(rng, K, 4)
    hard = top_n_hardest(q, negs, n)
    assert len(hard) == min(n, K)
    assert len(set(hard.indices.tolist())) == len(hard)
    assert np.all(np.diff(hard.similarities) <= 0)
    excluded = sorted(set(range(K)) - set(hard.indices.tolist()))
    if excluded:
        assert hard.similarities.min() >= max(cosine_sim(q, negs[i]) for i in excluded)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 10))
def test_permutation_invariance(seed, K, n):
    rng = np.random.default_rng(seed)
    q = unit(rng, 4)
    negs = unit(rng, K, 4)
    perm = rng.permutation(K)
    a = top_n_hardest(q, negs, n)
    b = top_n_hardest(q, negs[perm], n)
    # continuous random data has no ties, so the selected rows coincide
    assert set(perm[b.indices].tolist()) == set(a.indices.tolist())
    np.testing.assert_array_equal(a.similarities, b.similarities)


def test_stats_constant_negatives(rng):
    q = unit(rng, 5)
    v = unit(rng, 5)
    stats = hardness_stats(q, np.tile(v, (6, 1)))
    assert stats.std == pytest.approx(0.0, abs=1e-15)
    assert stats.mean == pytest.approx(cosine_sim(q, v), abs=1e-15)


def test_stats_self_negative(rng):
    q = unit(rng, 5)
    stats = hardness_stats(q, q[None])
    assert stats.mean == pytest.approx(1.0, abs=1e-15)
    assert stats.max == pytest.approx(1.0, abs=1e-15)


def test_stats_match_recomputation(rng):
    for _ in range(50):
        q = unit(rng, 6)
        negs = unit(rng, int(rng.integers(1, 50)), 6)
        sims = [cosine_sim(q, v) for v in negs]
        mean = sum(sims) / len(sims)
        std = (sum((s - mean) ** 2 for s in sims) / len(sims)) ** 0.5
        stats = hardness_stats(q, negs)
        assert abs(stats.mean - mean) <= 1e-12
        assert abs(stats.std - std) <= 1e-12
        assert stats.min == min(sims) and stats.max == max(sims)
        assert stats.min <= stats.p50 <= stats.p90 <= stats.max
