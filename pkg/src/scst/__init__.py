"""Self-critical sequence training for a toy encoder-decoder."""

from .autodiff import Tensor, backward
from .data import SynthConfig, Utterance, load_corpus, save_corpus, synth_generate
from .decoding import Hypothesis, NBestList, beam_search, greedy_decode, renormalize
from .loss import LossTerms, combined_loss, scst_loss, scst_step
from .metrics import corpus_wer, relative_improvement
from .model import BOS, EOS, ModelConfig, ce_loss, init_params
from .rewards import baseline, edit_distance, reward_I, reward_II, step_rewards
from .trainer import TrainConfig, evaluate, run_experiment, split_epoch_budget, train_ce, train_scst

__all__ = [
    "BOS", "EOS", "Hypothesis", "LossTerms", "ModelConfig", "NBestList", "SynthConfig",
    "Tensor", "Utterance", "backward", "baseline", "beam_search", "ce_loss", "combined_loss",
    "corpus_wer", "edit_distance", "greedy_decode", "init_params", "load_corpus",
    "relative_improvement", "renormalize", "reward_I", "reward_II", "save_corpus",
    "scst_loss", "scst_step", "step_rewards", "synth_generate",
    "TrainConfig", "evaluate", "run_experiment", "split_epoch_budget", "train_ce", "train_scst",
]
