"""Pooled token error rate and relative improvement."""

import json
from dataclasses import asdict, dataclass, field

from .rewards import edit_distance


@dataclass
class EvalSummary:
    total_edit_ops: int
    total_ref_tokens: int
    wer: float
    per_utterance: list = field(default_factory=list)

    def worst(self, k=5):
        """Utterances with the highest per-utterance error rate."""
        return sorted(self.per_utterance, key=lambda r: (-r[1] / r[2], r[0]))[:k]

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


def utterance_error(hyp, ref):
    ref = list(ref)
    if not ref:
        raise ValueError("reference must be non-empty")
    return edit_distance(hyp, ref), len(ref)


def corpus_wer(pairs):
    """Pool edit operations over ``(id, hyp, ref)`` or ``(hyp, ref)`` tuples."""
    rows = []
    for i, pair in enumerate(pairs):
        utt_id, hyp, ref = pair if len(pair) == 3 else (str(i), *pair)
        ed, n = utterance_error(hyp, ref)
        rows.append((utt_id, ed, n))
    if not rows:
        raise ValueError("corpus_wer needs at least one pair")
    errors = sum(r[1] for r in rows)
    tokens = sum(r[2] for r in rows)
    return EvalSummary(errors, tokens, errors / tokens, rows)


def relative_improvement(baseline_wer, new_wer):
    """Percentage reduction of ``new_wer`` relative to ``baseline_wer``."""
    if baseline_wer <= 0:
        raise ValueError("baseline WER must be positive")
    return 100.0 * (baseline_wer - new_wer) / baseline_wer
