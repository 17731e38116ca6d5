from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scst.decoding import Hypothesis, NBestList
from scst.model import EOS
from scst.rewards import (
    baseline, edit_distance, reward_I, reward_II, reward_report, sequence_reward, step_rewards,
)

tokens = st.lists(st.integers(2, 7), max_size=8)


def recursive_ed(a, b):
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0 or j == 0:
            return i + j
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def hyp(toks, probs=None):
    probs = probs if probs is not None else [1.0] * len(toks)
    return Hypothesis(tuple(toks), tuple(probs), float(np.sum(np.log(probs))))


def test_edit_distance_examples():
    assert edit_distance([], []) == 0
    assert edit_distance([3, 4, 5], [3, 4, 5]) == 0
    assert edit_distance([], [2, 3, 4, 5, 6]) == 5
    assert edit_distance([2, 3, 4], [2, 4]) == 1
    assert edit_distance([2, 3], [3, 2]) == 2


def test_edit_distance_matches_recursive_oracle():
    rng = np.random.default_rng(0)
    for _ in range(500):
        a = rng.integers(2, 8, size=rng.integers(0, 9)).tolist()
        b = rng.integers(2, 8, size=rng.integers(0, 9)).tolist()
        assert edit_distance(a, b) == recursive_ed(a, b)


@given(tokens, tokens)
def test_edit_distance_symmetric_and_bounded(a, b):
    d = edit_distance(a, b)
    assert d == edit_distance(b, a)
    assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))


@given(tokens, tokens, tokens)
def test_edit_distance_triangle(a, b, c):
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


def test_reward_I_examples():
    assert reward_I(hyp([4, 5, EOS]), [4, 5]) == 0
    assert reward_I(hyp([EOS]), [2, 3, 4, 5, 6]) == -5
    assert reward_I(hyp([4, 6]), [4, 5]) == -1


@given(tokens, tokens)
def test_reward_I_zero_iff_match(h, ref):
    assert (reward_I(hyp(h), ref) == 0) == (list(h) == list(ref))
    assert reward_I(hyp(h), ref) <= 0


@given(tokens, tokens)
def test_reward_I_strips_eos(h, ref):
    assert reward_I(hyp(list(h) + [EOS]), ref) == reward_I(hyp(h), ref)


def test_step_rewards_perfect_hypothesis():
    r = step_rewards(hyp([3, 4, 5, EOS]), [3, 4, 5])
    assert r == [1, 1, 1, 0]


@given(st.lists(st.integers(1, 7), max_size=8), tokens)
def test_step_rewards_telescope(h, ref):
    r = step_rewards(hyp(h), ref)
    assert len(r) == len(h)
    assert all(x in (-1, 0, 1) for x in r)
    assert sum(r) == len(ref) - edit_distance([t for t in h if t != EOS], ref)


@given(st.lists(st.integers(1, 7), max_size=8), tokens)
def test_step_rewards_match_per_prefix_full_dp(h, ref):
    expected, prev = [], len(ref)
    for t in range(len(h)):
        prefix = [x for x in h[:t + 1] if x != EOS]
        cur = recursive_ed(prefix, ref)
        expected.append(-(cur - prev))
        prev = cur
    assert step_rewards(h, ref) == expected


def test_reward_II_examples():
    h, ref = [3, 6, 5, EOS], [3, 4, 5]
    assert reward_II(hyp(h), ref) == len(ref) + reward_I(hyp(h), ref)
    assert reward_II(hyp(h, [1e-300] * 4), ref) == pytest.approx(0.0, abs=1e-299)
    # r = [1, 0, 1, 0]
    assert reward_II(hyp(h, [0.9, 0.5, 0.7, 0.8]), ref) == pytest.approx(1.6, abs=1e-15)


def test_reward_II_length_mismatch_rejected():
    h = hyp([3, 4])
    object.__setattr__(h, "step_probs", (0.5,))
    with pytest.raises(ValueError):
        reward_II(h, [3, 4])


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(1, 7), st.floats(0.01, 1.0)), max_size=8), tokens)
def test_reward_II_matches_straight_line(pairs, ref):
    toks = [t for t, _ in pairs]
    probs = [q for _, q in pairs]
    total, prev = 0.0, len(ref)
    for t in range(len(toks)):
        cur = recursive_ed([x for x in toks[:t + 1] if x != EOS], ref)
        total += -(cur - prev) * probs[t]
        prev = cur
    assert reward_II(hyp(toks, probs), ref) == pytest.approx(total, abs=1e-12)


def test_baseline_examples():
    assert baseline([-1, -3]) == -2
    assert baseline([-4, -4, -4]) == -4
    with pytest.raises(ValueError):
        baseline([])


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=10))
def test_baseline_matches_reversed_sum(rewards):
    assert baseline(rewards) == pytest.approx(sum(reversed(rewards)) / len(rewards), abs=1e-12)


@pytest.mark.parametrize("kind", ["I", "II"])
def test_reward_report_invariants(kind):
    rng = np.random.default_rng(3)
    hyps = []
    for _ in range(5):
        toks = rng.integers(2, 6, size=rng.integers(1, 6)).tolist() + [EOS]
        hyps.append(hyp(toks, rng.uniform(0.05, 1.0, size=len(toks))))
    ref = [2, 3, 4]
    report = reward_report(NBestList(hyps, 5), ref, kind)
    assert report.kind == kind
    assert np.mean(report.per_hypothesis_reward) == pytest.approx(report.baseline, abs=1e-12)
    assert abs(sum(report.advantages)) < 1e-9
    assert report.step_rewards == [step_rewards(h, ref) for h in hyps]
    assert report.per_hypothesis_reward == [sequence_reward(h, ref, kind) for h in hyps]


def test_equal_rewards_give_zero_advantages():
    report = reward_report([hyp([2, 3]), hyp([3, 2])], [4, 5], "I")
    assert report.advantages == [0.0, 0.0]


def test_unknown_reward_kind():
    with pytest.raises(ValueError):
        sequence_reward(hyp([2]), [2], "III")
