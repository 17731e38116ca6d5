import itertools

import numpy as np
import pytest

from scst.data import SynthConfig, synth_generate
from scst.model import BOS, EOS, InferenceModel, ModelConfig, init_params


def fd_gradient(f, x, step=1e-5):
    """Central differences of a scalar function of a flat vector."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def assert_grad_close(analytic, numeric, rtol, atol=1e-8):
    diff = np.abs(analytic - numeric)
    mag = np.maximum(np.abs(analytic), np.abs(numeric))
    bad = (diff > atol) & (diff > rtol * mag)
    assert not bad.any(), f"max diff {diff.max():.3e} at {np.argmax(diff)}"


def random_params(config, seed, scale=0.5):
    params = init_params(config, seed)
    rng = np.random.default_rng(seed + 1000)
    for t in params:
        t.value = rng.normal(0.0, scale, t.shape)
    return params


def sequence_log_prob(model, features, tokens):
    """Sum of per-step log-probabilities from a fresh forward pass."""
    ctx_bias = model.W_c @ model.context(features) + model.b_h
    h = np.zeros((1, model.config.hidden_dim))
    prev, total = BOS, 0.0
    for t in tokens:
        logp, h = model.step(ctx_bias, np.array([prev]), h)
        total += logp[0, t]
        prev = t
    return total


def exhaustive_ranking(params, features, max_len):
    """Every terminal sequence ranked by (-log_prob, tokens).

    Terminal means ending in EOS with no earlier EOS, or reaching ``max_len``
    tokens without any EOS.
    """
    model = InferenceModel(params)
    content = [v for v in range(model.config.vocab_size) if v != EOS]
    seqs = []
    for n in range(max_len):
        seqs += [p + (EOS,) for p in itertools.product(content, repeat=n)]
    seqs += list(itertools.product(content, repeat=max_len))
    scored = [(-sequence_log_prob(model, features, s), s) for s in seqs]
    scored.sort()
    return [(s, -neg) for neg, s in scored]


@pytest.fixture
def tiny_config():
    return ModelConfig(vocab_size=8, feature_dim=5, hidden_dim=6, embed_dim=4, max_decode_len=6)


@pytest.fixture
def tiny_params(tiny_config):
    return random_params(tiny_config, 0)


@pytest.fixture
def tiny_utterance(tiny_config):
    return synth_generate(SynthConfig(tiny_config.vocab_size, tiny_config.feature_dim, 2, 0.3, 2, 4, 1, 7))[0]


# -- acceptance report -----------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
