"""Quickstart: synthetic corpus -> CE baseline -> SCST fine-tuning -> WER.

Runs in about a minute on one core.  Sizes are kept small so the numbers
are noisy; see desk_experiment.py for the multi-seed protocol.
"""

from scst import ModelConfig, TrainConfig, evaluate, train_ce, train_scst
from scst.data import SynthConfig, split_corpus, synth_generate
from scst.metrics import relative_improvement

# 20 tokens (0 = BOS, 1 = EOS), each emitted as 4 noisy frames of a 16-d prototype.
corpus = synth_generate(SynthConfig(vocab_size=20, feature_dim=16, frames_per_token=4,
                                    noise_sigma=0.3, num_utterances=2400, seed=3))
train, valid, test = split_corpus(corpus, 2000, 200, 200)
print(f"{len(train)} train / {len(valid)} valid / {len(test)} test utterances")
print("first reference:", train[0].reference, "features", train[0].features.shape)

# pool_segments=10 keeps a coarse notion of frame order in the encoder.
model_config = ModelConfig(vocab_size=20, feature_dim=16, hidden_dim=64, embed_dim=16,
                           max_decode_len=10, pool_segments=10)
ce_config = TrainConfig(phase="ce", epochs=16, learning_rate=0.003, batch_size=16, seed=3)
baseline, ce_log = train_ce(ce_config, model_config, train, valid)
for r in ce_log.records:
    print(f"CE   epoch {r.epoch}: loss {r.ce_loss:.3f}  valid WER {100 * r.valid_wer:.1f}%")

scst_config = TrainConfig(phase="scst", epochs=4, learning_rate=0.0003, batch_size=16,
                          lam=0.001, reward_kind="I", beam_size=5, seed=3)
tuned, scst_log = train_scst(scst_config, baseline, train, valid)
for r in scst_log.records[1:]:  # record 0 is the CE starting point
    print(f"SCST epoch {r.epoch}: scst {r.scst_loss:.3f}  valid WER {100 * r.valid_wer:.1f}%")

before = evaluate(baseline, test, beam_size=5).wer
after = evaluate(tuned, test, beam_size=5).wer
print(f"test WER {100 * before:.2f}% -> {100 * after:.2f}% "
      f"({relative_improvement(before, after):+.1f}% relative)")
