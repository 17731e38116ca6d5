import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scst.decoding import Hypothesis, NBestList, beam_search, greedy_decode, renormalize
from scst.model import BOS, EOS, ModelConfig, encode_batch, score_sequences, zero_params
from conftest import exhaustive_ranking, random_params


def small(vocab=4, max_len=4, hidden=5):
    return ModelConfig(vocab_size=vocab, feature_dim=3, hidden_dim=hidden, embed_dim=3, max_decode_len=max_len)


def feats(seed, dim=3):
    return np.random.default_rng(seed).normal(size=(4, dim))


@pytest.mark.parametrize("seed", range(10))
def test_beam_one_is_greedy(seed):
    p = random_params(small(vocab=7, max_len=6), seed, scale=1.0)
    f = feats(seed)
    assert beam_search(p, f, 1).best == greedy_decode(p, f)


@pytest.mark.parametrize("seed", range(5))
def test_full_beam_equals_exhaustive_enumeration(seed):
    """With N at least V^max_len every terminal sequence comes back in order."""
    p = random_params(small(), seed, scale=1.0)
    f = feats(seed)
    nbest = beam_search(p, f, 4 ** 4)
    truth = exhaustive_ranking(p, f, 4)
    assert [h.tokens for h in nbest] == [s for s, _ in truth]
    np.testing.assert_allclose([h.log_prob for h in nbest], [lp for _, lp in truth], rtol=0, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_top_n_prefix_of_exhaustive(seed):
    p = random_params(small(vocab=5, max_len=3), seed, scale=1.5)
    f = feats(seed + 100)
    truth = [s for s, _ in exhaustive_ranking(p, f, 3)]
    assert [h.tokens for h in beam_search(p, f, 40)] == truth[:40]


def test_uniform_model_breaks_ties_lexicographically():
    p = zero_params(small(vocab=4, max_len=3))
    nbest = beam_search(p, feats(0), 3)
    # All extensions tie, so the smallest prefixes survive: after (EOS,) finishes
    # the live beams are (0,), (2,), (3,), then (0, 0), (0, 2), (0, 3).
    assert [h.tokens for h in nbest] == [(EOS,), (0, EOS), (0, 0, 0)]
    assert nbest[2].truncated
    assert beam_search(p, feats(0), 3).hypotheses == nbest.hypotheses


@pytest.mark.parametrize("seed", range(8))
def test_hypothesis_invariants(seed):
    p = random_params(small(vocab=9, max_len=5, hidden=6), seed, scale=1.0)
    nbest = beam_search(p, feats(seed), 6)
    assert 1 <= len(nbest) <= 6
    assert len({h.tokens for h in nbest}) == len(nbest)
    scores = [h.log_prob for h in nbest]
    assert scores == sorted(scores, reverse=True)
    for h in nbest:
        assert len(h.step_probs) == len(h.tokens)
        assert all(0 < q <= 1 for q in h.step_probs)
        assert h.log_prob == pytest.approx(sum(math.log(q) for q in h.step_probs), abs=1e-9)
        assert h.truncated == (h.tokens[-1] != EOS)
        assert EOS not in h.tokens[:-1]
        assert len(h.tokens) <= 5


def test_scores_agree_with_teacher_forcing():
    p = random_params(small(vocab=6, max_len=5), 2, scale=1.0)
    f = feats(9)
    nbest = beam_search(p, f, 5)
    ctx = encode_batch(p, [f])
    tf = score_sequences(p, ctx, [(0, list(h.tokens)) for h in nbest]).value
    np.testing.assert_allclose(tf, [h.log_prob for h in nbest], rtol=0, atol=1e-10)


def test_max_len_one_truncates():
    p = zero_params(small(vocab=5, max_len=4))
    p.b_o.value[3] = 5.0
    nbest = beam_search(p, feats(1), 2, max_len=1)
    assert nbest.best.tokens == (3,) and nbest.best.truncated
    assert all(len(h.tokens) == 1 for h in nbest)


@pytest.mark.parametrize("seed", range(5))
def test_greedy_among_nbest(seed):
    p = random_params(small(vocab=4, max_len=4), seed, scale=1.0)
    f = feats(seed)
    g = greedy_decode(p, f).tokens
    assert g in [h.tokens for h in beam_search(p, f, 4 ** 4)]


def test_greedy_starts_from_bos():
    p = zero_params(small(vocab=5))
    # make the token after BOS depend only on the embedding of BOS
    p.Emb.value[BOS] = 1.0
    p.W_e.value[:] = 1.0
    p.W_o.value[4] = 2.0
    assert greedy_decode(p, feats(0)).tokens[0] == 4


def test_beam_search_preconditions():
    p = zero_params(small())
    with pytest.raises(ValueError):
        beam_search(p, feats(0), 0)
    with pytest.raises(ValueError):
        beam_search(p, feats(0), 2, max_len=0)


def test_beam_search_deterministic():
    p = random_params(small(vocab=8, max_len=6), 4, scale=1.0)
    assert beam_search(p, feats(3), 5).hypotheses == beam_search(p, feats(3), 5).hypotheses


def test_hypothesis_length_mismatch_rejected():
    with pytest.raises(ValueError):
        Hypothesis((2, 1), (0.5,), math.log(0.5))


def test_renormalize_examples():
    assert renormalize([-3.2]).tolist() == [1.0]
    np.testing.assert_allclose(renormalize([-1.0, -1.0]), [0.5, 0.5], rtol=0, atol=1e-15)
    np.testing.assert_allclose(renormalize(np.log([0.6, 0.2, 0.2])), [0.6, 0.2, 0.2], rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        renormalize([])
    with pytest.raises(ValueError):
        renormalize(NBestList([], 3))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 0), min_size=1, max_size=8), st.floats(-100, 100))
def test_renormalize_sums_to_one_and_shift_invariant(log_probs, shift):
    p = renormalize(log_probs)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(renormalize(np.array(log_probs) + shift), p, rtol=0, atol=1e-12)


def test_renormalize_extreme_values_stay_finite():
    p = renormalize([-1e4, -1e4 - 1.0, -2e4])
    assert np.all(np.isfinite(p))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
