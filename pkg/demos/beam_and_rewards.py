"""Walk through one SCST update by hand.

Decode an N-best list, score it with both rewards, and watch how a single
gradient step moves probability mass between the hypotheses.
"""

import numpy as np

from scst.data import Utterance
from scst.decoding import beam_search, renormalize
from scst.loss import StepConfig, scst_step
from scst.model import ModelConfig, encode_batch, init_params, score_sequences
from scst.rewards import edit_distance, reward_report

config = ModelConfig(vocab_size=8, feature_dim=4, hidden_dim=8, embed_dim=6, max_decode_len=6)
params = init_params(config, seed=11)
rng = np.random.default_rng(11)
features = rng.normal(size=(6, 4))
nbest = beam_search(params, features, 4)
# Use a lower-ranked hypothesis as the reference so the rewards disagree with
# the model's own ranking.
utt = Utterance("demo", features, [t for t in nbest[2].content if t >= 2] or [2])
print(f"reference {utt.reference}")
print(f"{'hypothesis':24s} {'log P':>8s} {'P_hat':>6s} {'ED':>3s}")
for h, p in zip(nbest, renormalize(nbest)):
    flag = " (truncated)" if h.truncated else ""
    print(f"{str(h.tokens):24s} {h.log_prob:8.3f} {p:6.3f} {edit_distance(h.content, utt.reference):3d}{flag}")

# Reward I is the negated edit distance; Reward II weights each step reward
# by the model's probability of that step.
for kind in ("I", "II"):
    rep = reward_report(nbest, utt.reference, kind)
    print(f"\nReward {kind}: baseline {rep.baseline:.3f}")
    for h, r, a in zip(nbest, rep.per_hypothesis_reward, rep.advantages):
        print(f"  {str(h.tokens):24s} reward {r:7.3f}  advantage {a:+.3f}")


def p_hat(p):
    ctx = encode_batch(p, [utt.features])
    return renormalize(score_sequences(p, ctx, [(0, list(h.tokens)) for h in nbest]).value)


# One SGD step on the frozen list.  Hypotheses with positive advantage
# usually gain mass, but with N > 2 shared structure can drag one along with
# a neighbour.
before = p_hat(params)
_, terms = scst_step(params, utt, StepConfig(beam_size=4, reward_kind="I", lam=0.0, learning_rate=0.05),
                     nbest=nbest)
after = p_hat(params)
print(f"\nSCST loss before the step {terms.scst_loss.item():.4f}")
adv = reward_report(nbest, utt.reference, "I").advantages
for h, a, b, c in zip(nbest, adv, before, after):
    print(f"  {str(h.tokens):24s} advantage {a:+.2f}  P_hat {b:.4f} -> {c:.4f}")
