"""Synthetic prototype-plus-noise corpora and their JSON Lines format.

Each content token (ids >= 2) owns a fixed prototype vector drawn uniformly
from [-1, 1]^F.  An utterance's features repeat each token's prototype
``frames_per_token`` times and add Gaussian noise of scale ``noise_sigma``.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

FIRST_CONTENT_TOKEN = 2


@dataclass
class Utterance:
    id: str
    features: np.ndarray
    reference: tuple

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.reference = tuple(int(t) for t in self.reference)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"utterance {self.id!r}: features must be a non-empty 2-D matrix")
        if not self.reference:
            raise ValueError(f"utterance {self.id!r}: empty reference")
        if min(self.reference) < FIRST_CONTENT_TOKEN:
            raise ValueError(f"utterance {self.id!r}: token ids 0 and 1 are reserved")

    def __eq__(self, other):
        return (
            isinstance(other, Utterance)
            and self.id == other.id
            and self.reference == other.reference
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )


@dataclass(frozen=True)
class SynthConfig:
    vocab_size: int = 20
    feature_dim: int = 16
    frames_per_token: int = 2
    noise_sigma: float = 0.3
    min_len: int = 2
    max_len: int = 5
    num_utterances: int = 100
    seed: int = 0

    def validate(self):
        if self.vocab_size < 3:
            raise ValueError("vocab_size must be >= 3")
        if self.feature_dim < 1 or self.frames_per_token < 1:
            raise ValueError("feature_dim and frames_per_token must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if self.num_utterances < 0:
            raise ValueError("num_utterances must be non-negative")


def _prototypes(rng, config):
    return rng.uniform(-1.0, 1.0, size=(config.vocab_size - FIRST_CONTENT_TOKEN, config.feature_dim))


def make_prototypes(config):
    """Prototype matrix; row ``k`` belongs to token ``k + 2``."""
    config.validate()
    return _prototypes(np.random.default_rng(config.seed), config)


def synth_generate(config):
    config.validate()
    rng = np.random.default_rng(config.seed)
    protos = _prototypes(rng, config)
    corpus = []
    for i in range(config.num_utterances):
        length = int(rng.integers(config.min_len, config.max_len + 1))
        tokens = rng.integers(FIRST_CONTENT_TOKEN, config.vocab_size, size=length)
        clean = np.repeat(protos[tokens - FIRST_CONTENT_TOKEN], config.frames_per_token, axis=0)
        noise = rng.standard_normal(clean.shape) * config.noise_sigma
        corpus.append(Utterance(f"utt{i:05d}", clean + noise, tokens))
    return corpus


def split_corpus(corpus, *sizes):
    """Consecutive slices of the given sizes."""
    if sum(sizes) > len(corpus):
        raise ValueError(f"requested {sum(sizes)} utterances from a corpus of {len(corpus)}")
    out, start = [], 0
    for n in sizes:
        out.append(corpus[start:start + n])
        start += n
    return out


def save_corpus(corpus, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        for utt in corpus:
            fh.write(json.dumps({
                "id": utt.id,
                "features": utt.features.tolist(),
                "reference": list(utt.reference),
            }) + "\n")


def load_corpus(path):
    corpus = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                frames = obj["features"]
                if not frames or len({len(f) for f in frames}) != 1:
                    raise ValueError("frames have inconsistent dimensions")
                corpus.append(Utterance(str(obj["id"]), np.array(frames, dtype=np.float64),
                                        obj["reference"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed utterance: {exc}") from exc
    return corpus
