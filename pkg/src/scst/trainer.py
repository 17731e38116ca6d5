"""Two-phase training: cross-entropy pretraining, then SCST fine-tuning."""

import csv
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .data import SynthConfig, split_corpus, synth_generate
from .decoding import beam_search, greedy_decode
from .loss import batch_combined_loss
from .metrics import corpus_wer, relative_improvement
from .model import EOS, InferenceModel, ModelConfig, encode_batch, init_params, score_sequences
from .optim import make_optimizer
from .rewards import REWARD_KINDS


@dataclass
class TrainConfig:
    phase: str = "ce"
    epochs: int = 10
    learning_rate: float = 0.002
    optimizer: str = "adam"
    lam: float = 0.001
    beam_size: int = 5
    reward_kind: str = "I"
    seed: int = 0
    eval_every: int = 1
    batch_size: int = 1
    corpus_path: str = ""
    valid_path: str = ""
    checkpoint_path: str = ""
    log_path: str = ""

    def validate(self):
        if self.phase not in ("ce", "scst"):
            raise ValueError(f"phase must be 'ce' or 'scst', got {self.phase!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("batch_size and eval_every must be >= 1")
        if self.reward_kind not in REWARD_KINDS:
            raise ValueError(f"reward_kind must be one of {REWARD_KINDS}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")

    @classmethod
    def from_mapping(cls, values):
        """Build from string key/value pairs, e.g. a parsed config file."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            key = {"lambda": "lam", "beam_N": "beam_size"}.get(key, key)
            if key not in types:
                raise ValueError(f"unknown training option {key!r}")
            kind = types[key]
            kwargs[key] = kind(value) if kind in (int, float) else str(value)
        return cls(**kwargs)


def split_epoch_budget(total, ce_share=0.8):
    """Divide a total epoch budget into (CE epochs, SCST epochs), each at least 1."""
    if total < 2:
        raise ValueError("an epoch budget must cover at least one epoch per phase")
    if not 0 < ce_share < 1:
        raise ValueError("ce_share must lie strictly between 0 and 1")
    ce = min(max(int(round(total * ce_share)), 1), total - 1)
    return ce, total - ce


@dataclass(eq=False)
class EpochRecord:
    """One evaluated epoch; a loss the phase does not compute is NaN."""

    epoch: int
    ce_loss: float
    scst_loss: float
    valid_wer: float
    wall_time: float = 0.0

    def __eq__(self, other):
        # wall time is excluded and NaN placeholders compare equal
        if not isinstance(other, EpochRecord):
            return NotImplemented
        mine = (self.epoch, self.ce_loss, self.scst_loss, self.valid_wer)
        theirs = (other.epoch, other.ce_loss, other.scst_loss, other.valid_wer)
        return all(a == b or (a != a and b != b) for a, b in zip(mine, theirs))


@dataclass
class RunLog:
    phase: str
    lam: float = 0.0
    reward_kind: str = ""
    records: list = field(default_factory=list)

    def append(self, record):
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError("epochs must be strictly increasing")
        self.records.append(record)

    @property
    def best(self):
        return min(self.records, key=lambda r: (r.valid_wer, r.epoch))

    def write_csv(self, path):
        new = not os.path.exists(path)
        with open(path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if new:
                writer.writerow(["phase", "lambda", "reward_kind"] + [f.name for f in fields(EpochRecord)])
            for r in self.records:
                writer.writerow([self.phase, self.lam, self.reward_kind] + list(asdict(r).values()))


def decode_corpus(params, corpus, beam_size=1, max_len=None):
    """Best hypothesis per utterance (greedy when ``beam_size == 1``)."""
    model = InferenceModel(params)
    out = []
    for utt in corpus:
        if beam_size == 1:
            out.append(greedy_decode(params, utt.features, max_len, model=model))
        else:
            out.append(beam_search(params, utt.features, beam_size, max_len, model=model).best)
    return out


def evaluate(params, corpus, beam_size=1, max_len=None):
    hyps = decode_corpus(params, corpus, beam_size, max_len)
    return corpus_wer([(u.id, h.content, u.reference) for u, h in zip(corpus, hyps)])


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _check_compatible(params, corpus):
    cfg = params.config
    for utt in corpus:
        if utt.features.shape[1] != cfg.feature_dim:
            raise ValueError(
                f"utterance {utt.id!r} has feature dimension {utt.features.shape[1]}, "
                f"checkpoint expects {cfg.feature_dim}"
            )
        if max(utt.reference) >= cfg.vocab_size:
            raise ValueError(f"utterance {utt.id!r} uses tokens beyond the checkpoint vocabulary")


def ce_batch_loss(params, batch):
    """Mean teacher-forced cross-entropy over a list of utterances."""
    contexts = encode_batch(params, [u.features for u in batch])
    log_p = score_sequences(params, contexts, [(i, list(u.reference) + [EOS]) for i, u in enumerate(batch)])
    return ad.scale(ad.sum_all(log_p), -1.0 / len(batch))


def train_ce(config, model_config, corpus, valid_corpus, params=None):
    """Minimize cross-entropy; return the best-validation parameters and the log."""
    config.validate()
    if not corpus or not valid_corpus:
        raise ValueError("training and validation corpora must be non-empty")
    if params is None:
        params = init_params(model_config, config.seed)
    _check_compatible(params, list(corpus) + list(valid_corpus))
    tensors = list(params)
    opt = make_optimizer(config.optimizer, tensors, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    log = RunLog("ce")
    best, best_wer = params.copy(), np.inf
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        total = 0.0
        for idx in _batches(len(corpus), config.batch_size, rng):
            loss = ce_batch_loss(params, [corpus[i] for i in idx])
            ad.backward(loss, wrt=tensors)
            opt.step()
            total += loss.item() * len(idx)
        if epoch % config.eval_every and epoch != config.epochs:
            continue
        wer = evaluate(params, valid_corpus, beam_size=1).wer
        if wer < best_wer:
            best, best_wer = params.copy(), wer
        log.append(EpochRecord(epoch, total / len(corpus), float("nan"), wer,
                               time.perf_counter() - start))
    if config.log_path:
        log.write_csv(config.log_path)
    return best, log


def train_scst(config, ce_params, corpus, valid_corpus):
    """Fine-tune a copy of ``ce_params`` with the lambda-interpolated SCST loss."""
    config.validate()
    if not corpus or not valid_corpus:
        raise ValueError("training and validation corpora must be non-empty")
    _check_compatible(ce_params, list(corpus) + list(valid_corpus))
    params = ce_params.copy()
    tensors = list(params)
    opt = make_optimizer(config.optimizer, tensors, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    log = RunLog("scst", config.lam, config.reward_kind)
    best_wer = evaluate(params, valid_corpus, config.beam_size).wer
    best = params.copy()
    log.append(EpochRecord(0, float("nan"), float("nan"), best_wer, 0.0))
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        ce_total = scst_total = 0.0
        for idx in _batches(len(corpus), config.batch_size, rng):
            model = InferenceModel(params)
            items = [(corpus[i], beam_search(params, corpus[i].features, config.beam_size, model=model))
                     for i in idx]
            terms = batch_combined_loss(params, items, config.reward_kind, config.lam)
            ad.backward(terms.combined, wrt=tensors)
            opt.step()
            scst_total += terms.scst_loss.item() * len(idx)
            ce_total += terms.ce_loss.item() * len(idx)
        if epoch % config.eval_every and epoch != config.epochs:
            continue
        wer = evaluate(params, valid_corpus, config.beam_size).wer
        if wer < best_wer:
            best, best_wer = params.copy(), wer
        log.append(EpochRecord(epoch, ce_total / len(corpus), scst_total / len(corpus), wer,
                               time.perf_counter() - start))
    if config.log_path:
        log.write_csv(config.log_path)
    return best, log


@dataclass
class ExperimentRow:
    model: str
    lam: float
    reward_kind: str
    wer: float
    relative_improvement: float


def run_experiment(configs, baseline_params, corpus, valid_corpus, eval_corpus, eval_beam=None):
    """Fine-tune the shared baseline once per config and tabulate WER on ``eval_corpus``."""
    if not configs:
        raise ValueError("run_experiment needs at least one SCST config")
    beam = eval_beam or configs[0].beam_size
    base_wer = evaluate(baseline_params, eval_corpus, beam).wer
    rows = [ExperimentRow("Baseline", float("nan"), "-", base_wer, 0.0)]
    for cfg in configs:
        params, _ = train_scst(cfg, baseline_params, corpus, valid_corpus)
        wer = evaluate(params, eval_corpus, beam).wer
        rows.append(ExperimentRow("SCST", cfg.lam, cfg.reward_kind, wer,
                                  relative_improvement(base_wer, wer) if base_wer > 0 else 0.0))
    return rows


def format_table(rows):
    header = ["model", "lambda", "reward", "WER (%)", "rel. impr. (%)"]
    body = [[
        r.model,
        "-" if np.isnan(r.lam) else f"{r.lam:g}",
        r.reward_kind,
        f"{100 * r.wer:.2f}",
        "-" if r.model == "Baseline" else f"{r.relative_improvement:.1f}",
    ] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = [" | ".join(x.ljust(w) for x, w in zip(header, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    lines += [" | ".join(x.ljust(w) for x, w in zip(line, widths)) for line in body]
    return "\n".join(lines)


def write_table_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in fields(ExperimentRow)])
        for r in rows:
            writer.writerow(list(asdict(r).values()))


@dataclass
class DeskSetup:
    """Corpus, model and schedule of the desk-scale SCST experiment."""

    vocab_size: int = 20
    feature_dim: int = 16
    frames_per_token: int = 4
    min_len: int = 2
    max_len: int = 5
    sizes: tuple = (2000, 200, 200)
    hidden_dim: int = 64
    embed_dim: int = 16
    pool_segments: int = 10
    max_decode_len: int = 10
    epoch_budget: int = 20
    batch_size: int = 16
    ce_learning_rate: float = 0.003
    scst_learning_rate: float = 0.0003
    beam_size: int = 5

    def corpus(self, noise_sigma, seed):
        cfg = SynthConfig(self.vocab_size, self.feature_dim, self.frames_per_token, noise_sigma,
                          self.min_len, self.max_len, sum(self.sizes), seed)
        return split_corpus(synth_generate(cfg), *self.sizes)

    def model_config(self):
        return ModelConfig(self.vocab_size, self.feature_dim, self.hidden_dim, self.embed_dim,
                           self.max_decode_len, self.pool_segments)

    def scst_config(self, lam, reward_kind, seed):
        _, scst_epochs = split_epoch_budget(self.epoch_budget)
        return TrainConfig(phase="scst", epochs=scst_epochs, learning_rate=self.scst_learning_rate,
                           optimizer="adam", lam=lam, beam_size=self.beam_size, reward_kind=reward_kind,
                           seed=seed, batch_size=self.batch_size)


def desk_experiment(setup, noise_sigma, seed, sweep):
    """One seed of the desk-scale protocol.

    Generates the corpus, trains the CE baseline to best validation WER and
    fine-tunes it once per ``(lam, reward_kind)`` entry of ``sweep``.  Returns
    the rows of :func:`run_experiment`, scored on the test split.
    """
    train, valid, test = setup.corpus(noise_sigma, seed)
    ce_epochs, _ = split_epoch_budget(setup.epoch_budget)
    ce_cfg = TrainConfig(phase="ce", epochs=ce_epochs, learning_rate=setup.ce_learning_rate,
                         optimizer="adam", seed=seed, batch_size=setup.batch_size)
    baseline, _ = train_ce(ce_cfg, setup.model_config(), train, valid)
    configs = [setup.scst_config(lam, kind, seed) for lam, kind in sweep]
    return run_experiment(configs, baseline, train, valid, test, setup.beam_size)
