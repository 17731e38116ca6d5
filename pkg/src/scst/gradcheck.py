"""Central finite-difference checks of analytic gradients."""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .data import SynthConfig, synth_generate
from .decoding import beam_search
from .loss import combined_loss
from .model import ModelConfig, ce_loss, init_params

STEP = 1e-5


@dataclass
class GradCheckResult:
    name: str
    max_abs_err: float
    max_rel_err: float
    n_components: int
    ok: bool


def numeric_gradient(f, x, step=STEP):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f(x)
        flat[i] = orig - step
        down = f(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return g


def compare(name, analytic, numeric, rtol, atol):
    """Pass when every component has |a - n| <= atol or |a - n| <= rtol * max(|a|, |n|)."""
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    diff = np.abs(analytic - numeric)
    mag = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.where(mag > 0, diff / np.where(mag > 0, mag, 1.0), 0.0)
    ok = bool(np.all((diff <= atol) | (rel <= rtol)))
    return GradCheckResult(name, float(diff.max(initial=0.0)), float(rel.max(initial=0.0)),
                           analytic.size, ok)


def check_params(name, loss_fn, params, rtol=1e-5, atol=1e-8, step=STEP):
    """Compare backward() through ``loss_fn(params)`` with finite differences."""
    tensors = list(params)
    ad.backward(loss_fn(params), wrt=tensors)
    analytic = params.flat_grad()
    probe = params.copy(requires_grad=False)

    def f(x):
        probe.set_flat(x)
        return loss_fn(probe).item()

    return compare(name, analytic, numeric_gradient(f, params.flat(), step), rtol, atol)


def check_function(name, fn, leaves, rtol=1e-6, atol=1e-9, step=STEP):
    """Finite-difference check of a scalar ``fn(*leaves)`` w.r.t. every leaf."""
    ad.backward(fn(*leaves), wrt=leaves)
    analytic = np.concatenate([t.grad.ravel() for t in leaves])
    sizes = [t.size for t in leaves]

    def f(x):
        parts = np.split(x, np.cumsum(sizes)[:-1])
        return fn(*(ad.Tensor(v.reshape(t.shape)) for v, t in zip(parts, leaves))).item()

    x = np.concatenate([t.value.ravel() for t in leaves])
    return compare(name, analytic, numeric_gradient(f, x, step), rtol, atol)


def _weighted(y, w):
    """Random linear functional of a 1-D or 2-D tensor."""
    if y.ndim == 1:
        return ad.matmul(w[: y.shape[0]], y)
    return ad.sum_all(ad.matmul(y, w[: y.shape[1]]))


def op_checks(seed=0, rtol=1e-6, atol=1e-9):
    """One finite-difference check per autodiff operation."""
    rng = np.random.default_rng(seed)

    def leaf(*shape):
        return ad.Tensor(rng.normal(size=shape), requires_grad=True)

    w = rng.normal(size=8)
    cases = {
        "matmul(2d,2d)": (lambda a, b: _weighted(ad.matmul(a, b), w), [leaf(3, 4), leaf(4, 5)]),
        "matmul(2d,1d)": (lambda a, b: _weighted(ad.matmul(a, b), w), [leaf(3, 4), leaf(4)]),
        "matmul(1d,2d)": (lambda a, b: _weighted(ad.matmul(a, b), w), [leaf(4), leaf(4, 5)]),
        "matmul(trans_b)": (lambda a, b: _weighted(ad.matmul(a, b, trans_b=True), w), [leaf(3, 4), leaf(5, 4)]),
        "add(row broadcast)": (lambda a, b: _weighted(ad.add(a, b), w), [leaf(3, 4), leaf(4)]),
        "tanh": (lambda a: _weighted(ad.tanh(a), w), [leaf(3, 4)]),
        "embedding_lookup": (lambda t: _weighted(ad.embedding_lookup(t, [2, 0, 2]), w), [leaf(4, 5)]),
        "log_softmax(1d)": (lambda a: _weighted(ad.log_softmax(a), w), [leaf(6)]),
        "log_softmax(2d)": (lambda a: _weighted(ad.log_softmax(a), w), [leaf(3, 6)]),
        "index_select": (lambda a: _weighted(ad.index_select(a, ([0, 2, 2], [1, 0, 0])), w), [leaf(3, 4)]),
        "scale": (lambda a: _weighted(ad.scale(a, -2.5), w), [leaf(5)]),
        "sum": (lambda a: ad.sum_all(ad.tanh(a)), [leaf(3, 4)]),
        "concat": (lambda a, b: _weighted(ad.concat([a, b]), w), [leaf(3), leaf(4)]),
    }
    return [check_function(f"op:{name}", fn, leaves, rtol, atol) for name, (fn, leaves) in cases.items()]


def tiny_problem(seed, vocab_size=12, feature_dim=6, hidden_dim=8, embed_dim=8, scale=0.5):
    """A small random model and utterance with non-degenerate gradients."""
    config = ModelConfig(vocab_size, feature_dim, hidden_dim, embed_dim, max_decode_len=6)
    params = init_params(config, seed)
    rng = np.random.default_rng(seed)
    for t in params:
        t.value = rng.normal(0.0, scale, t.shape)
    utt = synth_generate(SynthConfig(vocab_size, feature_dim, 2, 0.3, 2, 4, 1, seed))[0]
    return params, utt


def run_suite(seed=0, rtol=1e-5, atol=1e-8):
    """Gradient checks for every op, ce_loss and the SCST objective over rewards, N and lambda."""
    params, utt = tiny_problem(seed)
    results = op_checks(seed)
    results += [check_params("ce_loss", lambda p: ce_loss(p, utt), params, rtol, atol)]
    for N in (1, 2, 5):
        nbest = beam_search(params, utt.features, N)
        for kind in ("I", "II"):
            for lam in (0.0, 0.001, 1.0):
                results.append(check_params(
                    f"combined_loss[N={N},reward={kind},lambda={lam:g}]",
                    lambda p: combined_loss(p, utt, nbest, kind, lam).combined,
                    params, rtol, atol,
                ))
    return results
