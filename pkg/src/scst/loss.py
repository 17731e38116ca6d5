"""Self-critical loss over a frozen N-best list and its CE interpolation.

For an utterance with N-best hypotheses ``Y^1..Y^N`` and rewards ``R_n``::

    loss_scst = -sum_n log P_hat(Y^n) * (R_n - mean(R))
    combined  = loss_scst + lam * ce_loss

``P_hat`` renormalizes the sequence probabilities over the list.  Rewards are
plain floats, so no gradient reaches them.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .decoding import beam_search, renormalized_log_probs
from .model import EOS, encode_batch, score_sequences
from .rewards import reward_report


@dataclass
class LossTerms:
    scst_loss: ad.Tensor
    ce_loss: ad.Tensor
    combined: ad.Tensor
    lam: float
    reward_kind: str = "I"
    report: object = None

    def values(self):
        return self.scst_loss.item(), self.ce_loss.item(), self.combined.item()


def _check_nbest(params, nbest):
    if len(nbest) == 0:
        raise ValueError("SCST loss needs a non-empty N-best list")
    V = params.config.vocab_size
    for h in nbest:
        if any(not 0 <= t < V for t in h.tokens):
            raise IndexError(f"hypothesis {h.tokens} has tokens outside the vocabulary of {V}")


def _group_loss(seq_log_probs, advantages):
    """-sum_n adv_n log P_hat_n as a 1-element vector."""
    log_p_hat = renormalized_log_probs(seq_log_probs)
    adv = np.asarray(advantages, dtype=np.float64)[None, :]
    return ad.scale(ad.matmul(adv, log_p_hat), -1.0)


def scst_loss(params, utterance, nbest, reward_kind="I", advantages=None):
    """Differentiable SCST loss for one utterance.

    ``advantages`` overrides the reward computation when given.
    """
    return _batch_terms(params, [(utterance, nbest)], reward_kind, 0.0, advantages=advantages,
                        with_ce=False)[0]


def combined_loss(params, utterance, nbest, reward_kind="I", lam=0.001):
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    scst, ce, combined, reports = _batch_terms(params, [(utterance, nbest)], reward_kind, lam)
    return LossTerms(scst, ce, combined, lam, reward_kind, reports[0])


def batch_combined_loss(params, items, reward_kind="I", lam=0.001):
    """Mean of the combined loss over ``items = [(utterance, nbest), ...]``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    scst, ce, combined, reports = _batch_terms(params, items, reward_kind, lam, mean=True)
    return LossTerms(scst, ce, combined, lam, reward_kind, reports)


def _batch_terms(params, items, reward_kind, lam, advantages=None, with_ce=True, mean=False):
    for _, nbest in items:
        _check_nbest(params, nbest)
    contexts = encode_batch(params, [u.features for u, _ in items])
    rows, groups, reports = [], [], []
    for i, (utt, nbest) in enumerate(items):
        if with_ce:
            if not len(utt.reference):
                raise ValueError(f"utterance {utt.id!r} has an empty reference")
            rows.append((i, list(utt.reference) + [EOS]))
        start = len(rows)
        rows.extend((i, list(h.tokens)) for h in nbest)
        groups.append(np.arange(start, len(rows)))
        if advantages is None:
            reports.append(reward_report(nbest, utt.reference, reward_kind))
    log_p = score_sequences(params, contexts, rows)

    scst_terms = []
    for i, idx in enumerate(groups):
        adv = advantages if advantages is not None else reports[i].advantages
        scst_terms.append(_group_loss(ad.index_select(log_p, idx), adv))
    scst = ad.sum_all(ad.concat(scst_terms))
    k = 1.0 / len(items) if mean else 1.0
    scst = ad.scale(scst, k)
    if not with_ce:
        return scst, None, scst, reports
    ce_idx = np.array([g[0] - 1 for g in groups])
    ce = ad.scale(ad.sum_all(ad.index_select(log_p, ce_idx)), -k)
    combined = ad.add(scst, ad.scale(ce, lam))
    return scst, ce, combined, reports


@dataclass
class StepConfig:
    beam_size: int = 5
    reward_kind: str = "I"
    lam: float = 0.001
    learning_rate: float = 0.01


def scst_step(params, utterance, config, nbest=None):
    """Decode, build the combined loss, and apply one SGD update in place.

    Returns ``(params, terms)`` where ``terms`` hold the losses observed
    before the update.  Pass ``nbest`` to reuse a frozen list instead of
    decoding.
    """
    if nbest is None:
        nbest = beam_search(params, utterance.features, config.beam_size)
    terms = combined_loss(params, utterance, nbest, config.reward_kind, config.lam)
    tensors = list(params)
    ad.backward(terms.combined, wrt=tensors)
    for t in tensors:
        t.value = t.value - config.learning_rate * t.grad
    return params, terms
