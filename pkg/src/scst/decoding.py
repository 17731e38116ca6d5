"""Beam-search N-best decoding in the model's inference mode.

A hypothesis terminates when it emits EOS or when it reaches ``max_len``
tokens (then it is flagged ``truncated``).  At every step all live beams are
expanded by every vocabulary token and the candidates are visited in order of
cumulative log-probability, ties going to the lexicographically smaller token
sequence.  Terminal candidates met along the way join the finished pool; the
first ``N`` non-terminal ones become the next live beams.  Decoding stops once
``N`` hypotheses are finished, no beam is live, or ``max_len`` is reached.
Scores are raw sums of log-probabilities (no length normalization).
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .model import BOS, EOS, InferenceModel


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple
    step_probs: tuple
    log_prob: float
    truncated: bool = False

    def __post_init__(self):
        if len(self.tokens) != len(self.step_probs):
            raise ValueError("tokens and step_probs must have the same length")

    @property
    def content(self):
        """Tokens with EOS removed."""
        return tuple(t for t in self.tokens if t != EOS)

    def to_dict(self):
        return {
            "tokens": list(self.tokens),
            "step_probs": list(self.step_probs),
            "log_prob": self.log_prob,
            "truncated": self.truncated,
        }


@dataclass
class NBestList:
    hypotheses: list
    beam_size: int

    def __len__(self):
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses)

    def __getitem__(self, i):
        return self.hypotheses[i]

    @property
    def best(self):
        return self.hypotheses[0]


def _rank_key(h):
    return (-h.log_prob, h.tokens)


def beam_search(params, features, N, max_len=None, model=None):
    """Return the N-best list for one utterance's features."""
    if N < 1:
        raise ValueError("beam size must be >= 1")
    model = model or InferenceModel(params)
    if max_len is None:
        max_len = model.config.max_decode_len
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    V = model.config.vocab_size
    ctx_bias = model.W_c @ model.context(features) + model.b_h

    # live beams: (tokens, step_logps, score)
    live = [((), (), 0.0)]
    h = np.zeros((1, model.config.hidden_dim))
    finished = []
    for t in range(max_len):
        last = t == max_len - 1
        prev = np.array([b[0][-1] if b[0] else BOS for b in live], dtype=np.intp)
        logp, h_new = model.step(ctx_bias, prev, h)
        scores = np.array([b[2] for b in live])[:, None] + logp
        lex = np.empty(len(live), dtype=np.intp)
        lex[sorted(range(len(live)), key=lambda i: live[i][0])] = np.arange(len(live))
        order = np.lexsort((
            np.tile(np.arange(V), len(live)),
            np.repeat(lex, V),
            -scores.ravel(),
        ))
        next_live, next_rows = [], []
        for flat in order:
            b, v = divmod(int(flat), V)
            tokens, steps, _ = live[b]
            tokens = tokens + (v,)
            steps = steps + (float(logp[b, v]),)
            score = float(scores[b, v])
            if v == EOS or last:
                finished.append(_hypothesis(tokens, steps, score, truncated=v != EOS))
            else:
                next_live.append((tokens, steps, score))
                next_rows.append(b)
                if len(next_live) == N:
                    break
        live, h = next_live, h_new[next_rows]
        if len(finished) >= N or not live:
            break

    finished.sort(key=_rank_key)
    seen, out = set(), []
    for hyp in finished:
        if hyp.tokens not in seen:
            seen.add(hyp.tokens)
            out.append(hyp)
        if len(out) == N:
            break
    return NBestList(out, N)


def _hypothesis(tokens, step_logps, score, truncated):
    return Hypothesis(
        tokens=tokens,
        step_probs=tuple(float(np.exp(lp)) for lp in step_logps),
        log_prob=score,
        truncated=truncated,
    )


def greedy_decode(params, features, max_len=None, model=None):
    """Argmax decoding, one token at a time."""
    model = model or InferenceModel(params)
    if max_len is None:
        max_len = model.config.max_decode_len
    ctx_bias = model.W_c @ model.context(features) + model.b_h
    h = np.zeros((1, model.config.hidden_dim))
    tokens, steps = [], []
    prev = BOS
    for _ in range(max_len):
        logp, h = model.step(ctx_bias, np.array([prev]), h)
        prev = int(np.argmax(logp[0]))
        tokens.append(prev)
        steps.append(float(logp[0, prev]))
        if prev == EOS:
            break
    return _hypothesis(tuple(tokens), steps, float(np.sum(steps)), truncated=prev != EOS)


def renormalize(nbest):
    """Hypothesis probabilities re-normalized over the N-best list."""
    if isinstance(nbest, NBestList):
        nbest = [h.log_prob for h in nbest]
    log_probs = np.asarray(nbest, dtype=np.float64)
    if log_probs.size == 0:
        raise ValueError("cannot renormalize an empty N-best list")
    z = log_probs - log_probs.max()
    return np.exp(z - np.log(np.exp(z).sum()))


def renormalized_log_probs(log_probs):
    """Differentiable log P-hat for a tensor of sequence log-probabilities."""
    if log_probs.size == 0:
        raise ValueError("cannot renormalize an empty N-best list")
    return ad.log_softmax(log_probs)
