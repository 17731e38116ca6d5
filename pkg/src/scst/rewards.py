"""Edit distance, sequence- and token-level rewards, and the N-best baseline."""

from dataclasses import dataclass

import numpy as np

from .model import EOS

REWARD_KINDS = ("I", "II")


def _strip_eos(tokens):
    return [t for t in tokens if t != EOS]


def edit_distance(a, b):
    """Levenshtein distance between two token sequences (unit costs)."""
    a, b = list(a), list(b)
    if len(a) < len(b):
        a, b = b, a
    row = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        prev_diag, row[0] = row[0], i
        for j, y in enumerate(b, 1):
            cur = min(row[j] + 1, row[j - 1] + 1, prev_diag + (x != y))
            prev_diag, row[j] = row[j], cur
    return row[-1]


def _extend_row(row, token, ref):
    """DP row for ``prefix + [token]`` against ``ref`` given the row for ``prefix``."""
    new = [row[0] + 1]
    for j, y in enumerate(ref, 1):
        new.append(min(row[j] + 1, new[j - 1] + 1, row[j - 1] + (token != y)))
    return new


def step_rewards(hyp, ref):
    """Per-token rewards r_t = -(ED(Y_t, ref) - ED(Y_{t-1}, ref)).

    ``Y_t`` is the hypothesis prefix through position t and ``Y_{-1}`` is
    empty.  EOS positions leave the prefix unchanged and so earn 0.  Each
    prefix is compared with the whole reference.
    """
    tokens = hyp.tokens if hasattr(hyp, "tokens") else hyp
    ref = list(ref)
    row = list(range(len(ref) + 1))
    out = []
    for tok in tokens:
        if tok == EOS:
            out.append(0)
            continue
        new = _extend_row(row, tok, ref)
        out.append(row[-1] - new[-1])
        row = new
    return out


def reward_I(hyp, ref):
    tokens = hyp.tokens if hasattr(hyp, "tokens") else hyp
    return -edit_distance(_strip_eos(tokens), ref)


def reward_II(hyp, ref):
    """Step rewards weighted by the (detached) probability of each emitted token."""
    if len(hyp.step_probs) != len(hyp.tokens):
        raise ValueError("hypothesis step_probs and tokens differ in length")
    return float(sum(r * p for r, p in zip(step_rewards(hyp, ref), hyp.step_probs)))


def sequence_reward(hyp, ref, kind):
    if kind == "I":
        return float(reward_I(hyp, ref))
    if kind == "II":
        return reward_II(hyp, ref)
    raise ValueError(f"unknown reward kind {kind!r}; expected one of {REWARD_KINDS}")


def baseline(rewards):
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.size == 0:
        raise ValueError("baseline of an empty reward list")
    return float(rewards.mean())


@dataclass
class RewardReport:
    kind: str
    per_hypothesis_reward: list
    step_rewards: list
    baseline: float
    advantages: list


def reward_report(nbest, ref, kind):
    hyps = list(nbest)
    rewards = [sequence_reward(h, ref, kind) for h in hyps]
    base = baseline(rewards)
    return RewardReport(
        kind=kind,
        per_hypothesis_reward=rewards,
        step_rewards=[step_rewards(h, ref) for h in hyps],
        baseline=base,
        advantages=[r - base for r in rewards],
    )
