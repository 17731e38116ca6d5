"""Toy encoder-decoder: pooled feature encoder and an Elman decoder.

The decoder computes, for previous token ``y`` and hidden state ``h``::

    h'       = tanh(W_h h + W_e Emb[y] + W_c context + b_h)
    log_probs = log_softmax(W_o h' + b_o)

with ``context = tanh(W_enc pool(features) + b_enc)``.  By default ``pool``
is the mean over frames.  With ``pool_segments = K > 1`` the frames are cut
into K consecutive segments and the K segment means are concatenated, which
keeps coarse order information that a single mean discards.  Token 0 is BOS
and token 1 is EOS.
"""

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad

BOS = 0
EOS = 1

CHECKPOINT_MAGIC = "SCSTCKPT1"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    feature_dim: int
    hidden_dim: int = 32
    embed_dim: int = 16
    max_decode_len: int = 10
    pool_segments: int = 1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ValueError(f"{f.name} must be >= 1")
        if self.vocab_size < 3:
            raise ValueError("vocab_size must be >= 3 (BOS, EOS and one content token)")

    def param_shapes(self):
        V, F, H, E = self.vocab_size, self.feature_dim, self.hidden_dim, self.embed_dim
        return {
            "W_enc": (H, F * self.pool_segments),
            "b_enc": (H,),
            "Emb": (V, E),
            "W_h": (H, H),
            "W_e": (H, E),
            "W_c": (H, H),
            "b_h": (H,),
            "W_o": (V, H),
            "b_o": (V,),
        }


PARAM_NAMES = ("W_enc", "b_enc", "Emb", "W_h", "W_e", "W_c", "b_h", "W_o", "b_o")


class ModelParams:
    """Named parameter tensors of the network."""

    def __init__(self, config, tensors):
        self.config = config
        shapes = config.param_shapes()
        for name in PARAM_NAMES:
            t = tensors[name]
            if t.shape != shapes[name]:
                raise ad.ShapeError(f"parameter {name}: expected shape {shapes[name]}, got {t.shape}")
            setattr(self, name, t)

    def tensors(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def __iter__(self):
        return iter(self.tensors().values())

    def copy(self, requires_grad=True):
        return ModelParams(
            self.config,
            {k: ad.Tensor(t.value.copy(), requires_grad=requires_grad) for k, t in self.tensors().items()},
        )

    def flat(self):
        return np.concatenate([t.value.ravel() for t in self])

    def set_flat(self, vec):
        i = 0
        for t in self:
            n = t.size
            t.value = np.asarray(vec[i:i + n], dtype=np.float64).reshape(t.shape).copy()
            i += n

    def flat_grad(self):
        return np.concatenate([
            (t.grad if t.grad is not None else np.zeros(t.shape)).ravel() for t in self
        ])

    def equals(self, other):
        return all(np.array_equal(a.value, b.value) for a, b in zip(self, other))


@dataclass
class DecoderState:
    h: ad.Tensor


def init_params(config, seed):
    """Weights uniform in [-0.1, 0.1], biases zero."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in config.param_shapes().items():
        if name.startswith("b_"):
            value = np.zeros(shape)
        else:
            value = rng.uniform(-0.1, 0.1, size=shape)
        tensors[name] = ad.Tensor(value, requires_grad=True)
    return ModelParams(config, tensors)


def zero_params(config):
    return ModelParams(
        config,
        {k: ad.Tensor(np.zeros(s), requires_grad=True) for k, s in config.param_shapes().items()},
    )


def _check_features(params, features):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("features must be a non-empty frames x feature_dim matrix")
    if features.shape[1] != params.config.feature_dim:
        raise ad.ShapeError(
            f"features have dimension {features.shape[1]}, model expects {params.config.feature_dim}"
        )
    return features


def pooling_matrix(frames, segments=1):
    """(segments, frames) averaging weights; row k averages segment k.

    Segment k spans frames ``[floor(k n / K), ceil((k + 1) n / K))``, so
    segments share a boundary frame when K does not divide n and repeat
    frames when n < K.  With K = 1 this is the plain mean.
    """
    pool = np.zeros((segments, frames))
    for k in range(segments):
        lo = (k * frames) // segments
        hi = max(lo + 1, -(-(k + 1) * frames // segments))
        pool[k, lo:hi] = 1.0 / (hi - lo)
    return pool


def pool_features(features, segments=1):
    """Flattened segment means of a frames x F matrix (length K * F)."""
    return (pooling_matrix(features.shape[0], segments) @ features).ravel()


def encode(params, features):
    features = _check_features(params, features)
    K = params.config.pool_segments
    if K == 1:
        pooled = ad.matmul(np.full(features.shape[0], 1.0 / features.shape[0]), features)
    else:
        pooled = ad.Tensor(pool_features(features, K))
    return ad.tanh(ad.add(ad.matmul(params.W_enc, pooled), params.b_enc))


def initial_state(params):
    return DecoderState(ad.Tensor(np.zeros(params.config.hidden_dim)))


def decoder_step(params, context, prev_token, state):
    V = params.config.vocab_size
    if not 0 <= int(prev_token) < V:
        raise IndexError(f"token id {prev_token} out of range for vocabulary of {V}")
    emb = ad.embedding_lookup(params.Emb, int(prev_token))
    pre = ad.add(ad.matmul(params.W_h, state.h), ad.matmul(params.W_e, emb))
    pre = ad.add(ad.add(pre, ad.matmul(params.W_c, context)), params.b_h)
    h = ad.tanh(pre)
    log_probs = ad.log_softmax(ad.add(ad.matmul(params.W_o, h), params.b_o))
    return log_probs, DecoderState(h)


def ce_loss(params, utterance):
    """Teacher-forced cross-entropy, summed over the reference plus EOS."""
    reference = list(utterance.reference)
    if not reference:
        raise ValueError(f"utterance {utterance.id!r} has an empty reference")
    context = encode(params, utterance.features)
    state = initial_state(params)
    prev = BOS
    terms = []
    for target in reference + [EOS]:
        log_probs, state = decoder_step(params, context, prev, state)
        terms.append(ad.index_select(log_probs, [target]))
        prev = target
    return ad.scale(ad.sum_all(ad.concat(terms)), -1.0)


# -- batched teacher-forced scoring ------------------------------------------

def encode_batch(params, feature_list):
    """Contexts for several utterances as one (U, H) tensor."""
    feats = [_check_features(params, f) for f in feature_list]
    K = params.config.pool_segments
    pooled = np.stack([pool_features(f, K) for f in feats])
    return ad.tanh(ad.add(ad.matmul(pooled, params.W_enc, trans_b=True), params.b_enc))


def score_sequences(params, contexts, rows):
    """Log-probabilities of whole token sequences under teacher forcing.

    ``rows`` is a list of ``(context_index, tokens)`` where ``tokens`` are the
    emitted tokens (ending in EOS if the sequence is terminated).  Returns a
    tensor of shape ``(len(rows),)`` holding ``sum_t log P(tokens[t] | tokens[:t], X)``.
    """
    V = params.config.vocab_size
    seqs = [np.asarray(tokens, dtype=np.intp) for _, tokens in rows]
    for s in seqs:
        if s.size == 0:
            raise ValueError("cannot score an empty token sequence")
        if s.min() < 0 or s.max() >= V:
            raise IndexError(f"token ids out of range for vocabulary of {V}")
    B = len(rows)
    T = max(s.size for s in seqs)
    lengths = np.array([s.size for s in seqs])
    padded = np.full((B, T), EOS, dtype=np.intp)
    for i, s in enumerate(seqs):
        padded[i, :s.size] = s
    prev = np.concatenate([np.full((B, 1), BOS, dtype=np.intp), padded[:, :-1]], axis=1)

    ctx_idx = np.array([c for c, _ in rows], dtype=np.intp)
    ctx_bias = ad.add(ad.matmul(contexts, params.W_c, trans_b=True), params.b_h)
    ctx_rows = ad.embedding_lookup(ctx_bias, ctx_idx)
    emb_proj = ad.matmul(params.Emb, params.W_e, trans_b=True)

    h = None
    picked = []
    owner = []
    for t in range(T):
        pre = ad.add(ad.embedding_lookup(emb_proj, prev[:, t]), ctx_rows)
        if h is not None:
            pre = ad.add(ad.matmul(h, params.W_h, trans_b=True), pre)
        h = ad.tanh(pre)
        log_probs = ad.log_softmax(ad.add(ad.matmul(h, params.W_o, trans_b=True), params.b_o))
        live = np.flatnonzero(lengths > t)
        picked.append(ad.index_select(log_probs, (live, padded[live, t])))
        owner.append(live)
    owner = np.concatenate(owner)
    seg = np.zeros((B, owner.size))
    seg[owner, np.arange(owner.size)] = 1.0
    return ad.matmul(seg, ad.concat(picked))


# -- plain numpy forward used by decoding -------------------------------------

class InferenceModel:
    """Detached numpy view of the parameters for fast decoding."""

    def __init__(self, params):
        p = {k: t.value for k, t in params.tensors().items()}
        self.config = params.config
        self.segments = params.config.pool_segments
        self.W_enc, self.b_enc = p["W_enc"], p["b_enc"]
        self.W_h, self.W_c, self.b_h = p["W_h"], p["W_c"], p["b_h"]
        self.W_o, self.b_o = p["W_o"], p["b_o"]
        self.emb_proj = p["Emb"] @ p["W_e"].T

    def context(self, features):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1:
            raise ValueError("features must be a non-empty frames x feature_dim matrix")
        return np.tanh(self.W_enc @ pool_features(features, self.segments) + self.b_enc)

    def step(self, ctx_bias, prev_tokens, h):
        """One decoder step for a batch of beams; ``h`` has shape (B, H)."""
        h = np.tanh(h @ self.W_h.T + self.emb_proj[prev_tokens] + ctx_bias)
        logits = h @ self.W_o.T + self.b_o
        z = logits - logits.max(axis=1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True)), h


# -- checkpoints ----------------------------------------------------------------

def save_checkpoint(params, path):
    cfg = params.config
    lines = [CHECKPOINT_MAGIC]
    for f in fields(cfg):
        lines.append(f"{f.name} {getattr(cfg, f.name)}")
    for name, t in params.tensors().items():
        lines.append(f"tensor {name} {','.join(str(d) for d in t.shape)}")
        lines.append(" ".join(repr(float(v)) for v in t.value.ravel()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (missing {CHECKPOINT_MAGIC} header)")
    names = [f.name for f in fields(ModelConfig)]
    cfg_values = {}
    for line, name in zip(lines[1:], names):
        key, _, value = line.partition(" ")
        if key != name:
            raise ValueError(f"{path}: expected config field {name!r}, found {key!r}")
        cfg_values[key] = int(value)
    config = ModelConfig(**cfg_values)
    body = lines[1 + len(names):]
    tensors = {}
    for header, data in zip(body[0::2], body[1::2]):
        tag, name, dims = header.split(" ")
        if tag != "tensor":
            raise ValueError(f"{path}: malformed tensor header {header!r}")
        shape = tuple(int(d) for d in dims.split(","))
        values = np.array([float(v) for v in data.split()], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise ValueError(f"{path}: tensor {name} has {values.size} values for shape {shape}")
        tensors[name] = ad.Tensor(values.reshape(shape), requires_grad=True)
    missing = set(PARAM_NAMES) - set(tensors)
    if missing:
        raise ValueError(f"{path}: missing tensors {sorted(missing)}")
    return ModelParams(config, tensors)
